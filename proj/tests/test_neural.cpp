#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "xaichest/neural.hpp"
#include "xaichest/rng.hpp"

using namespace xaichest;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_vec(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

bool grad_close(double analytic, double numeric, double tol) {
    double diff = std::abs(analytic - numeric);
    return diff <= tol * std::max(std::abs(analytic), std::abs(numeric)) || diff < 1e-8;
}

// Central finite differences through an arbitrary scalar function of the
// model parameters.
template <typename LossFn>
void check_param_grads(Mlp& model, const Gradients& grads, LossFn loss, double tol) {
    const double h = 1e-5;
    for (int l = 0; l < model.num_layers(); ++l) {
        for (std::size_t i = 0; i < model.weights[l].size(); ++i) {
            double keep = model.weights[l][i];
            model.weights[l][i] = keep + h;
            double lp = loss();
            model.weights[l][i] = keep - h;
            double lm = loss();
            model.weights[l][i] = keep;
            CHECK(grad_close(grads.w[l][i], (lp - lm) / (2 * h), tol));
        }
        for (std::size_t i = 0; i < model.biases[l].size(); ++i) {
            double keep = model.biases[l][i];
            model.biases[l][i] = keep + h;
            double lp = loss();
            model.biases[l][i] = keep - h;
            double lm = loss();
            model.biases[l][i] = keep;
            CHECK(grad_close(grads.b[l][i], (lp - lm) / (2 * h), tol));
        }
    }
}

// Zero-initialized biases can park ReLU preactivations exactly on the kink
// (where central differences are meaningless), so gradient checks run at a
// generic point with randomized biases.
void randomize_biases(Mlp& m, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : m.biases) {
        for (auto& b : layer) b = 0.3 * rng.normal();
    }
}

Dataset linear_dataset(int n, int d_in, int d_out, std::uint64_t seed) {
    // targets = A x with a fixed random matrix A.
    Rng rng(seed);
    std::vector<double> a(static_cast<std::size_t>(d_out) * d_in);
    for (auto& v : a) v = rng.normal() * 0.5;
    Dataset ds;
    ds.d_in = d_in;
    ds.d_out = d_out;
    for (int r = 0; r < n; ++r) {
        std::vector<double> x(d_in);
        for (auto& v : x) v = rng.normal();
        for (int i = 0; i < d_in; ++i) ds.inputs.push_back(static_cast<float>(x[i]));
        for (int o = 0; o < d_out; ++o) {
            double acc = 0.0;
            for (int i = 0; i < d_in; ++i) acc += a[o * d_in + i] * x[i];
            ds.targets.push_back(static_cast<float>(acc));
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("stack/unstack") {
    CVec v = {{1.0, 2.0}};
    std::vector<double> s = stack_complex(v);
    CHECK(s == std::vector<double>{1.0, 2.0});
    CHECK(stack_complex(CVec(3, {0.0, 0.0})) == std::vector<double>(6, 0.0));

    Rng rng(5);
    CVec r(17);
    for (auto& x : r) x = rng.cnormal();
    CVec back = unstack_complex(stack_complex(r));
    for (std::size_t i = 0; i < r.size(); ++i) CHECK(back[i] == r[i]);

    CHECK_THROWS_AS(unstack_complex(std::vector<double>{1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("forward basics") {
    SUBCASE("zero parameters, identity output") {
        Mlp m = make_mlp({3, 4, 2}, OutputActivation::Identity, 1);
        for (auto& layer : m.weights) std::fill(layer.begin(), layer.end(), 0.0);
        std::vector<double> y = forward(m, {1.0, -2.0, 3.0});
        CHECK(y == std::vector<double>(2, 0.0));
    }

    SUBCASE("relu clips negatives") {
        Mlp m;
        m.dims = {2, 2, 2};
        m.weights = {{1, 0, 0, 1}, {1, 0, 0, 1}};  // identity maps
        m.biases = {{0, 0}, {0, 0}};
        std::vector<double> y = forward(m, {-1.0, 2.0});
        CHECK(y == std::vector<double>{0.0, 2.0});
    }

    SUBCASE("sigmoid of zero preactivation is one half") {
        Mlp m = make_mlp({4, 3}, OutputActivation::Sigmoid, 2);
        for (auto& layer : m.weights) std::fill(layer.begin(), layer.end(), 0.0);
        std::vector<double> y = forward(m, random_vec(4, 3));
        for (double v : y) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
    }

    SUBCASE("size mismatch") {
        Mlp m = make_mlp({3, 2}, OutputActivation::Identity, 1);
        CHECK_THROWS_AS(forward(m, {1.0}), std::invalid_argument);
    }
}

TEST_CASE("mse loss") {
    std::vector<double> t = {1.0, 2.0, 3.0};
    CHECK(mse_loss(t, t).loss == 0.0);
    MseResult ones = mse_loss({2.0, 3.0, 4.0}, t);
    CHECK(ones.loss == doctest::Approx(1.0).epsilon(1e-15));

    std::vector<double> p = random_vec(5, 7), q = random_vec(5, 8);
    MseResult r = mse_loss(p, q);
    const double h = 1e-6;
    for (int i = 0; i < 5; ++i) {
        std::vector<double> pp = p, pm = p;
        pp[i] += h;
        pm[i] -= h;
        double num = (mse_loss(pp, q).loss - mse_loss(pm, q).loss) / (2 * h);
        CHECK(std::abs(num - r.grad[i]) < 1e-6);
    }
    CHECK_THROWS_AS(mse_loss({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("backward matches finite differences on an 8-5-3 network") {
    Mlp m = make_mlp({8, 5, 3}, OutputActivation::Identity, 11);
    randomize_biases(m, 14);
    std::vector<double> x = random_vec(8, 12);
    std::vector<double> t = random_vec(3, 13);

    ForwardCache cache;
    std::vector<double> y = forward(m, x, &cache);
    MseResult mse = mse_loss(y, t);
    Gradients grads = zero_gradients(m);
    std::vector<double> input_grad = backward(m, cache, mse.grad, &grads);

    auto loss = [&] { return mse_loss(forward(m, x), t).loss; };
    check_param_grads(m, grads, loss, 1e-4);

    const double h = 1e-5;
    for (int i = 0; i < 8; ++i) {
        std::vector<double> xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double num = (mse_loss(forward(m, xp), t).loss - mse_loss(forward(m, xm), t).loss) / (2 * h);
        CHECK(grad_close(input_grad[i], num, 1e-4));
    }

    SUBCASE("zero upstream gradient zeroes everything") {
        Gradients zg = zero_gradients(m);
        std::vector<double> ig = backward(m, cache, std::vector<double>(3, 0.0), &zg);
        for (double v : ig) CHECK(v == 0.0);
        for (const auto& layer : zg.w) {
            for (double v : layer) CHECK(v == 0.0);
        }
    }
}

TEST_CASE("gradient property over random architectures") {
    Rng arch_rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        int depth = 2 + static_cast<int>(arch_rng.below(3));
        std::vector<int> dims;
        for (int l = 0; l <= depth; ++l) dims.push_back(2 + static_cast<int>(arch_rng.below(6)));
        OutputActivation act =
            trial % 2 == 0 ? OutputActivation::Identity : OutputActivation::Sigmoid;
        Mlp m = make_mlp(dims, act, 1000 + trial);
        randomize_biases(m, 4000 + trial);
        std::vector<double> x = random_vec(dims.front(), 2000 + trial);
        std::vector<double> t = random_vec(dims.back(), 3000 + trial);
        if (act == OutputActivation::Sigmoid) {
            for (auto& v : t) v = 0.5 + 0.3 * std::tanh(v);
        }
        ForwardCache cache;
        std::vector<double> y = forward(m, x, &cache);
        MseResult mse = mse_loss(y, t);
        Gradients grads = zero_gradients(m);
        std::vector<double> input_grad = backward(m, cache, mse.grad, &grads);
        auto loss = [&] { return mse_loss(forward(m, x), t).loss; };
        check_param_grads(m, grads, loss, 1e-4);
        const double h = 1e-5;
        for (int i = 0; i < dims.front(); ++i) {
            std::vector<double> xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            double num =
                (mse_loss(forward(m, xp), t).loss - mse_loss(forward(m, xm), t).loss) / (2 * h);
            CHECK(grad_close(input_grad[i], num, 1e-4));
        }
    }
}

TEST_CASE("adam") {
    Mlp m = make_mlp({3, 4, 2}, OutputActivation::Identity, 21);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;

    SUBCASE("zero gradient leaves parameters unchanged") {
        Mlp before = m;
        AdamState st = make_adam_state(m);
        adam_step(m, st, zero_gradients(m), cfg);
        for (int l = 0; l < m.num_layers(); ++l) {
            CHECK(m.weights[l] == before.weights[l]);
            CHECK(m.biases[l] == before.biases[l]);
        }
        CHECK(st.step == 1);
    }

    SUBCASE("first step moves each coordinate by about the learning rate") {
        AdamState st = make_adam_state(m);
        Gradients g = zero_gradients(m);
        Rng rng(31);
        for (auto& layer : g.w) {
            for (auto& v : layer) v = rng.normal() + 3.0;  // keep |g| well above eps
        }
        Mlp before = m;
        adam_step(m, st, g, cfg);
        for (int l = 0; l < m.num_layers(); ++l) {
            for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
                double delta = before.weights[l][i] - m.weights[l][i];
                double want = cfg.learning_rate * g.w[l][i] /
                              (std::abs(g.w[l][i]) + cfg.adam_eps);
                CHECK(delta == doctest::Approx(want).epsilon(1e-9));
            }
        }
    }

    SUBCASE("bitwise deterministic") {
        Mlp m2 = m;
        AdamState s1 = make_adam_state(m), s2 = make_adam_state(m2);
        Gradients g = zero_gradients(m);
        Rng rng(33);
        for (auto& layer : g.w) {
            for (auto& v : layer) v = rng.normal();
        }
        adam_step(m, s1, g, cfg);
        adam_step(m2, s2, g, cfg);
        for (int l = 0; l < m.num_layers(); ++l) CHECK(m.weights[l] == m2.weights[l]);
    }
}

TEST_CASE("initialization keeps preactivation variance in range") {
    // He-style check: unit-variance inputs, hidden preactivation variance
    // near 2 (He-uniform) with statistical headroom on the band.
    Rng rng(41);
    double min_var = 1e9, max_var = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Mlp m = make_mlp({64, 32, 32, 8}, OutputActivation::Identity, 500 + trial);
        double acc = 0.0;
        int count = 0;
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<double> x(64);
            for (auto& v : x) v = rng.normal();
            ForwardCache cache;
            forward(m, x, &cache);
            for (double z : cache.preacts[0]) {
                acc += z * z;
                ++count;
            }
        }
        double var = acc / count;
        min_var = std::min(min_var, var);
        max_var = std::max(max_var, var);
    }
    CHECK(min_var > 0.5);
    CHECK(max_var < 2.0 * 1.15);
}

TEST_CASE("train_u") {
    SUBCASE("learns a linear map") {
        Dataset ds = linear_dataset(256, 6, 4, 51);
        TrainConfig cfg;
        cfg.epochs = 500;
        cfg.batch_size = 32;
        cfg.learning_rate = 0.003;
        cfg.seed = 3;
        TrainResult r = train_u(ds, {16}, cfg);
        CHECK(r.history.back() < 1e-3);
        CHECK(r.history.front() > r.history.back());
    }

    SUBCASE("zero epochs returns the seeded initialization") {
        Dataset ds = linear_dataset(32, 5, 3, 52);
        TrainConfig cfg;
        cfg.epochs = 0;
        cfg.seed = 9;
        TrainResult r = train_u(ds, {7}, cfg);
        Mlp init = make_mlp({5, 7, 3}, OutputActivation::Identity, 9);
        for (int l = 0; l < init.num_layers(); ++l) {
            CHECK(r.model.weights[l] == init.weights[l]);
            CHECK(r.model.biases[l] == init.biases[l]);
        }
        CHECK(r.history.empty());
    }

    SUBCASE("same seed, same weights") {
        Dataset ds = linear_dataset(64, 4, 4, 53);
        TrainConfig cfg;
        cfg.epochs = 5;
        cfg.batch_size = 16;
        cfg.seed = 77;
        TrainResult a = train_u(ds, {6}, cfg);
        TrainResult b = train_u(ds, {6}, cfg);
        for (int l = 0; l < a.model.num_layers(); ++l) {
            CHECK(a.model.weights[l] == b.model.weights[l]);
        }
        CHECK(a.history == b.history);
    }

    SUBCASE("empty dataset is rejected") {
        Dataset empty;
        empty.d_in = 4;
        empty.d_out = 4;
        CHECK_THROWS_AS(train_u(empty, {4}, TrainConfig{}), std::invalid_argument);
    }
}

TEST_CASE("model persistence") {
    fs::path dir = fs::temp_directory_path() / "xaichest_model_test";
    fs::create_directories(dir);
    fs::path path = dir / "m.txt";

    SUBCASE("round trip is bit exact") {
        Mlp m = make_mlp({9, 5, 4}, OutputActivation::Sigmoid, 71);
        save_model(m, path);
        Mlp back = load_model(path);
        CHECK(back.dims == m.dims);
        CHECK(back.output_activation == m.output_activation);
        for (int l = 0; l < m.num_layers(); ++l) {
            CHECK(back.weights[l] == m.weights[l]);
            CHECK(back.biases[l] == m.biases[l]);
        }
    }

    SUBCASE("truncated file reports a parse error") {
        Mlp m = make_mlp({4, 3}, OutputActivation::Identity, 72);
        save_model(m, path);
        std::ifstream in(path);
        std::string content((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
        in.close();
        std::ofstream out(path, std::ios::binary);
        out.write(content.data(), static_cast<std::streamsize>(content.size() / 2));
        out.close();
        CHECK_THROWS_AS(load_model(path), std::runtime_error);
    }

    SUBCASE("version mismatch is reported") {
        std::ofstream out(path, std::ios::binary);
        out << "xcmodel 9\ndims 2 2\noutput identity\n";
        out.close();
        CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("version"),
                             std::runtime_error);
    }
    fs::remove_all(dir);
}
