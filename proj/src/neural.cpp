#include "xaichest/neural.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "xaichest/rng.hpp"

namespace xaichest {

Mlp make_mlp(const std::vector<int>& dims, OutputActivation output_activation,
             std::uint64_t seed) {
    if (dims.size() < 2) {
        throw std::invalid_argument("make_mlp: need at least input and output dims");
    }
    for (int d : dims) {
        if (d <= 0) throw std::invalid_argument("make_mlp: non-positive layer dim");
    }
    Mlp m;
    m.dims = dims;
    m.output_activation = output_activation;
    Rng rng(derive_seed(seed, SeedPurpose::Init));
    int layers = m.num_layers();
    m.weights.resize(layers);
    m.biases.resize(layers);
    for (int l = 0; l < layers; ++l) {
        int in = dims[l], out = dims[l + 1];
        bool is_output = l == layers - 1;
        double bound = is_output ? std::sqrt(6.0 / (in + out)) : std::sqrt(6.0 / in);
        m.weights[l].resize(static_cast<std::size_t>(out) * in);
        for (auto& w : m.weights[l]) {
            w = (2.0 * rng.uniform() - 1.0) * bound;
        }
        m.biases[l].assign(out, 0.0);
    }
    return m;
}

std::vector<double> forward(const Mlp& model, const std::vector<double>& x,
                            ForwardCache* cache) {
    if (static_cast<int>(x.size()) != model.input_dim()) {
        throw std::invalid_argument("forward: input size mismatch");
    }
    int layers = model.num_layers();
    if (cache) {
        cache->inputs.resize(layers);
        cache->preacts.resize(layers);
    }
    std::vector<double> cur = x;
    for (int l = 0; l < layers; ++l) {
        int in = model.dims[l], out = model.dims[l + 1];
        if (cache) cache->inputs[l] = cur;
        std::vector<double> z(out);
        const double* w = model.weights[l].data();
        for (int o = 0; o < out; ++o) {
            double acc = model.biases[l][o];
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) acc += row[i] * cur[i];
            z[o] = acc;
        }
        if (cache) cache->preacts[l] = z;
        bool is_output = l == layers - 1;
        if (!is_output) {
            for (auto& v : z) v = v > 0.0 ? v : 0.0;
        } else if (model.output_activation == OutputActivation::Sigmoid) {
            for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
        }
        cur = std::move(z);
    }
    return cur;
}

Gradients zero_gradients(const Mlp& model) {
    Gradients g;
    g.w.resize(model.num_layers());
    g.b.resize(model.num_layers());
    for (int l = 0; l < model.num_layers(); ++l) {
        g.w[l].assign(model.weights[l].size(), 0.0);
        g.b[l].assign(model.biases[l].size(), 0.0);
    }
    return g;
}

void scale_gradients(Gradients& g, double factor) {
    for (auto& layer : g.w) {
        for (auto& v : layer) v *= factor;
    }
    for (auto& layer : g.b) {
        for (auto& v : layer) v *= factor;
    }
}

std::vector<double> backward(const Mlp& model, const ForwardCache& cache,
                             const std::vector<double>& grad_output, Gradients* grads) {
    int layers = model.num_layers();
    if (static_cast<int>(cache.inputs.size()) != layers ||
        static_cast<int>(grad_output.size()) != model.output_dim()) {
        throw std::invalid_argument("backward: cache/grad shape mismatch");
    }
    std::vector<double> delta = grad_output;
    for (int l = layers - 1; l >= 0; --l) {
        int in = model.dims[l], out = model.dims[l + 1];
        bool is_output = l == layers - 1;
        if (is_output) {
            if (model.output_activation == OutputActivation::Sigmoid) {
                for (int o = 0; o < out; ++o) {
                    double s = 1.0 / (1.0 + std::exp(-cache.preacts[l][o]));
                    delta[o] *= s * (1.0 - s);
                }
            }
        } else {
            for (int o = 0; o < out; ++o) {
                if (cache.preacts[l][o] <= 0.0) delta[o] = 0.0;
            }
        }
        if (grads) {
            double* gw = grads->w[l].data();
            const double* xin = cache.inputs[l].data();
            for (int o = 0; o < out; ++o) {
                double d = delta[o];
                grads->b[l][o] += d;
                double* row = gw + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) row[i] += d * xin[i];
            }
        }
        std::vector<double> prev(in, 0.0);
        const double* w = model.weights[l].data();
        for (int o = 0; o < out; ++o) {
            double d = delta[o];
            const double* row = w + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) prev[i] += d * row[i];
        }
        delta = std::move(prev);
    }
    return delta;
}

MseResult mse_loss(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty()) {
        throw std::invalid_argument("mse_loss: size mismatch");
    }
    MseResult r;
    r.grad.resize(pred.size());
    double acc = 0.0;
    double inv = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double e = pred[i] - target[i];
        acc += e * e;
        r.grad[i] = 2.0 * e * inv;
    }
    r.loss = acc * inv;
    return r;
}

AdamState make_adam_state(const Mlp& model) {
    AdamState s;
    s.m = zero_gradients(model);
    s.v = zero_gradients(model);
    s.step = 0;
    return s;
}

namespace {

void adam_update(std::vector<double>& param, std::vector<double>& m, std::vector<double>& v,
                 const std::vector<double>& g, const TrainConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
        v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

}  // namespace

void adam_step(Mlp& model, AdamState& state, const Gradients& grads, const TrainConfig& cfg) {
    if (grads.w.size() != model.weights.size()) {
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
    for (int l = 0; l < model.num_layers(); ++l) {
        if (grads.w[l].size() != model.weights[l].size() ||
            grads.b[l].size() != model.biases[l].size()) {
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        }
        adam_update(model.weights[l], state.m.w[l], state.v.w[l], grads.w[l], cfg, bc1, bc2);
        adam_update(model.biases[l], state.m.b[l], state.v.b[l], grads.b[l], cfg, bc1, bc2);
    }
}

std::vector<double> stack_complex(const CVec& v) {
    std::vector<double> out(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i].real();
        out[i + v.size()] = v[i].imag();
    }
    return out;
}

CVec unstack_complex(const std::vector<double>& v) {
    if (v.size() % 2 != 0) {
        throw std::invalid_argument("unstack_complex: odd length");
    }
    std::size_t m = v.size() / 2;
    CVec out(m);
    for (std::size_t i = 0; i < m; ++i) {
        out[i] = {v[i], v[i + m]};
    }
    return out;
}

std::vector<double> Dataset::input_row(std::size_t r) const {
    std::vector<double> out(d_in);
    const float* p = inputs.data() + r * static_cast<std::size_t>(d_in);
    for (int i = 0; i < d_in; ++i) out[i] = p[i];
    return out;
}

std::vector<double> Dataset::target_row(std::size_t r) const {
    std::vector<double> out(d_out);
    const float* p = targets.data() + r * static_cast<std::size_t>(d_out);
    for (int i = 0; i < d_out; ++i) out[i] = p[i];
    return out;
}

TrainResult train_u(const Dataset& data, const std::vector<int>& hidden,
                    const TrainConfig& cfg) {
    if (data.rows() == 0) {
        throw std::invalid_argument("train_u: empty dataset");
    }
    std::vector<int> dims;
    dims.push_back(data.d_in);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(data.d_out);

    TrainResult res;
    res.model = make_mlp(dims, OutputActivation::Identity, cfg.seed);
    AdamState adam = make_adam_state(res.model);
    Gradients grads = zero_gradients(res.model);
    ForwardCache cache;

    std::size_t n = data.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    res.history.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, SeedPurpose::Shuffle, epoch));
        for (std::size_t i = n - 1; i > 0; --i) {
            std::size_t j = shuffle_rng.below(i + 1);
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < n) {
            std::size_t count = std::min<std::size_t>(cfg.batch_size, n - pos);
            for (auto& layer : grads.w) std::fill(layer.begin(), layer.end(), 0.0);
            for (auto& layer : grads.b) std::fill(layer.begin(), layer.end(), 0.0);
            double inv = 1.0 / static_cast<double>(count);
            for (std::size_t s = 0; s < count; ++s) {
                std::size_t r = order[pos + s];
                std::vector<double> x = data.input_row(r);
                std::vector<double> t = data.target_row(r);
                std::vector<double> y = forward(res.model, x, &cache);
                MseResult mse = mse_loss(y, t);
                epoch_loss += mse.loss;
                for (auto& g : mse.grad) g *= inv;
                backward(res.model, cache, mse.grad, &grads);
            }
            adam_step(res.model, adam, grads, cfg);
            pos += count;
        }
        res.history.push_back(epoch_loss / static_cast<double>(n));
    }
    return res;
}

double dataset_mse(const Mlp& model, const Dataset& data, std::size_t max_rows) {
    std::size_t n = data.rows();
    if (max_rows > 0 && max_rows < n) n = max_rows;
    if (n == 0) {
        throw std::invalid_argument("dataset_mse: empty dataset");
    }
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        std::vector<double> y = forward(model, data.input_row(r));
        acc += mse_loss(y, data.target_row(r)).loss;
    }
    return acc / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Persistence. Grammar (one item per line, '#' comments allowed):
//   xcmodel 1
//   dims <d0> <d1> ... <dL>
//   output <identity|sigmoid>
//   layer <l>
//   w <hexfloat> x out*in   (row-major)
//   b <hexfloat> x out
// Hex floats keep the round trip bit exact.

void save_model(const Mlp& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_model: cannot open " + path.string());
    }
    out << "xcmodel 1\n";
    out << "dims";
    for (int d : model.dims) out << ' ' << d;
    out << "\n";
    out << "output "
        << (model.output_activation == OutputActivation::Sigmoid ? "sigmoid" : "identity")
        << "\n";
    char buf[64];
    auto write_values = [&](const char* tag, const std::vector<double>& vals) {
        out << tag;
        for (double v : vals) {
            std::snprintf(buf, sizeof(buf), " %a", v);
            out << buf;
        }
        out << "\n";
    };
    for (int l = 0; l < model.num_layers(); ++l) {
        out << "layer " << l << "\n";
        write_values("w", model.weights[l]);
        write_values("b", model.biases[l]);
    }
    if (!out) {
        throw std::runtime_error("save_model: write failed for " + path.string());
    }
}

namespace {

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line, const std::string& what) {
    throw std::runtime_error("load_model: " + path.string() + ":" + std::to_string(line) +
                             ": " + what);
}

std::vector<double> parse_values(const std::string& rest, std::size_t expect,
                                 const std::filesystem::path& path, int line) {
    std::vector<double> vals;
    vals.reserve(expect);
    const char* p = rest.c_str();
    char* end = nullptr;
    while (*p) {
        double v = std::strtod(p, &end);
        if (end == p) break;
        vals.push_back(v);
        p = end;
    }
    if (vals.size() != expect) {
        parse_fail(path, line, "expected " + std::to_string(expect) + " values, got " +
                                   std::to_string(vals.size()));
    }
    return vals;
}

}  // namespace

Mlp load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_model: cannot open " + path.string());
    }
    std::string line;
    int lineno = 0;
    auto next_line = [&](const char* what) {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line[0] != '#') return;
        }
        parse_fail(path, lineno, std::string("unexpected end of file, wanted ") + what);
    };

    next_line("header");
    {
        std::istringstream ss(line);
        std::string magic;
        int version = -1;
        ss >> magic >> version;
        if (magic != "xcmodel") parse_fail(path, lineno, "bad magic '" + magic + "'");
        if (version != 1) {
            parse_fail(path, lineno, "unsupported format version " + std::to_string(version));
        }
    }
    Mlp m;
    next_line("dims");
    {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "dims") parse_fail(path, lineno, "expected dims line");
        int d;
        while (ss >> d) m.dims.push_back(d);
        if (m.dims.size() < 2) parse_fail(path, lineno, "need at least two dims");
    }
    next_line("output");
    {
        std::istringstream ss(line);
        std::string tag, act;
        ss >> tag >> act;
        if (tag != "output") parse_fail(path, lineno, "expected output line");
        if (act == "identity") {
            m.output_activation = OutputActivation::Identity;
        } else if (act == "sigmoid") {
            m.output_activation = OutputActivation::Sigmoid;
        } else {
            parse_fail(path, lineno, "unknown output activation '" + act + "'");
        }
    }
    int layers = m.num_layers();
    m.weights.resize(layers);
    m.biases.resize(layers);
    for (int l = 0; l < layers; ++l) {
        next_line("layer");
        {
            std::istringstream ss(line);
            std::string tag;
            int idx = -1;
            ss >> tag >> idx;
            if (tag != "layer" || idx != l) parse_fail(path, lineno, "expected layer " + std::to_string(l));
        }
        std::size_t in = m.dims[l], out = m.dims[l + 1];
        next_line("weights");
        if (line.rfind("w", 0) != 0) parse_fail(path, lineno, "expected weight line");
        m.weights[l] = parse_values(line.substr(1), in * out, path, lineno);
        next_line("biases");
        if (line.rfind("b", 0) != 0) parse_fail(path, lineno, "expected bias line");
        m.biases[l] = parse_values(line.substr(1), out, path, lineno);
    }
    return m;
}

}  // namespace xaichest
