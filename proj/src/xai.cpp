#include "xaichest/xai.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "xaichest/rng.hpp"

namespace xaichest {

NLoss n_loss_and_grads(const Mlp& u_model, const Mlp& n_model,
                       const std::vector<double>& input,
                       const std::vector<double>& target,
                       const std::vector<double>& eps, double lambda,
                       Gradients* n_grads) {
    if (n_model.input_dim() != u_model.input_dim() ||
        n_model.output_dim() != u_model.input_dim()) {
        throw std::invalid_argument("n_loss: N model must map the U input onto itself");
    }
    if (eps.size() != input.size()) {
        throw std::invalid_argument("n_loss: eps length mismatch");
    }
    std::size_t d = input.size();

    ForwardCache n_cache;
    std::vector<double> mask = forward(n_model, input, n_grads ? &n_cache : nullptr);
    std::vector<bool> clamped(d, false);
    for (std::size_t j = 0; j < d; ++j) {
        if (mask[j] < kMaskFloor) {
            mask[j] = kMaskFloor;
            clamped[j] = true;
        } else if (mask[j] > kMaskCeil) {
            mask[j] = kMaskCeil;
            clamped[j] = true;
        }
    }

    std::vector<double> noisy(d);
    for (std::size_t j = 0; j < d; ++j) noisy[j] = input[j] + mask[j] * eps[j];

    ForwardCache u_cache;
    std::vector<double> u_out = forward(u_model, noisy, &u_cache);
    MseResult mse = mse_loss(u_out, target);

    NLoss loss;
    loss.l_u = mse.loss;
    double log_acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) log_acc += std::log(mask[j]);
    loss.l_x = log_acc / static_cast<double>(d);
    loss.total = loss.l_u - lambda * loss.l_x;

    if (!std::isfinite(loss.total)) {
        throw std::runtime_error("n_loss: non-finite loss");
    }
    if (n_grads) {
        // dL_U/db_j flows through the frozen U via its input gradient;
        // dL_X/db_j = 1/(d * b_j).
        std::vector<double> u_input_grad = backward(u_model, u_cache, mse.grad, nullptr);
        std::vector<double> mask_grad(d);
        for (std::size_t j = 0; j < d; ++j) {
            if (clamped[j]) {
                mask_grad[j] = 0.0;
            } else {
                mask_grad[j] = u_input_grad[j] * eps[j] -
                               lambda / (static_cast<double>(d) * mask[j]);
            }
        }
        backward(n_model, n_cache, mask_grad, n_grads);
    }
    return loss;
}

NoiseMask eval_mask(const Mlp& n_model, const std::vector<double>& input) {
    NoiseMask m;
    m.values = forward(n_model, input);
    for (auto& v : m.values) v = std::clamp(v, kMaskFloor, kMaskCeil);
    return m;
}

NTrainResult train_n_model(const Mlp& u_model, const Dataset& data,
                           const std::vector<int>& hidden, const TrainConfig& cfg) {
    if (data.rows() == 0) {
        throw std::invalid_argument("train_n_model: empty dataset");
    }
    if (u_model.input_dim() != data.d_in) {
        throw std::invalid_argument("train_n_model: U input dim != dataset d_in");
    }
    std::vector<int> dims;
    dims.push_back(data.d_in);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(data.d_in);

    NTrainResult res;
    res.model = make_mlp(dims, OutputActivation::Sigmoid, derive_seed(cfg.seed, SeedPurpose::Init, 1));
    AdamState adam = make_adam_state(res.model);
    Gradients grads = zero_gradients(res.model);

    std::size_t n = data.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> eps(data.d_in);

    res.history.reserve(cfg.epochs);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, SeedPurpose::Shuffle, epoch, 1));
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
            for (std::size_t s = 0; s < count; ++s) {
                std::size_t r = order[pos + s];
                // One fresh noise draw per sample per epoch.
                Rng eps_rng(derive_seed(cfg.seed, SeedPurpose::Epsilon, epoch, r));
                for (auto& e : eps) e = eps_rng.normal();
                NLoss loss = n_loss_and_grads(u_model, res.model, data.input_row(r),
                                              data.target_row(r), eps, cfg.lambda, &grads);
                epoch_loss += loss.total;
            }
            scale_gradients(grads, 1.0 / static_cast<double>(count));
            adam_step(res.model, adam, grads, cfg);
            pos += count;
        }
        res.history.push_back(epoch_loss / static_cast<double>(n));
    }
    return res;
}

AggregatedMask aggregate_mask(const NoiseMask& mask, int k_on) {
    if (mask.values.size() != static_cast<std::size_t>(2 * k_on)) {
        throw std::invalid_argument("aggregate_mask: mask length != 2*k_on");
    }
    AggregatedMask out;
    out.values.resize(k_on);
    for (int k = 0; k < k_on; ++k) {
        out.values[k] = 0.5 * (mask.values[k] + mask.values[k + k_on]);
    }
    return out;
}

AggregatedMask mean_aggregated_mask(const Mlp& n_model, const Dataset& data) {
    if (data.rows() == 0) {
        throw std::invalid_argument("mean_aggregated_mask: empty dataset");
    }
    if (data.d_in % 2 != 0 || n_model.input_dim() != data.d_in) {
        throw std::invalid_argument("mean_aggregated_mask: dataset/model dim mismatch");
    }
    int k_on = data.d_in / 2;
    AggregatedMask acc;
    acc.values.assign(k_on, 0.0);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        NoiseMask m = eval_mask(n_model, data.input_row(r));
        AggregatedMask a = aggregate_mask(m, k_on);
        for (int k = 0; k < k_on; ++k) acc.values[k] += a.values[k];
    }
    double inv = 1.0 / static_cast<double>(data.rows());
    for (auto& v : acc.values) v *= inv;
    return acc;
}

RelevanceSet classify_subcarriers(const AggregatedMask& mask, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("classify_subcarriers: gamma must be in (0,1)");
    }
    RelevanceSet r;
    r.gamma = gamma;
    for (int k = 0; k < static_cast<int>(mask.values.size()); ++k) {
        if (mask.values[k] < gamma) {
            r.relevant.push_back(k);
        } else {
            r.irrelevant.push_back(k);
        }
    }
    return r;
}

Dataset filter_dataset(const Dataset& data, const RelevanceSet& rel) {
    if (rel.relevant.empty()) {
        throw std::invalid_argument("filter_dataset: empty relevant set");
    }
    int k_on = data.d_in / 2;
    if (data.d_in % 2 != 0) {
        throw std::invalid_argument("filter_dataset: dataset d_in must be 2*k_on");
    }
    for (int k : rel.relevant) {
        if (k < 0 || k >= k_on) {
            throw std::invalid_argument("filter_dataset: relevant index out of range");
        }
    }
    Dataset out;
    out.d_in = 2 * static_cast<int>(rel.relevant.size());
    out.d_out = data.d_out;
    out.targets = data.targets;
    out.meta = data.meta;
    std::size_t n = data.rows();
    out.inputs.resize(n * static_cast<std::size_t>(out.d_in));
    for (std::size_t r = 0; r < n; ++r) {
        const float* src = data.inputs.data() + r * static_cast<std::size_t>(data.d_in);
        float* dst = out.inputs.data() + r * static_cast<std::size_t>(out.d_in);
        for (std::size_t j = 0; j < rel.relevant.size(); ++j) {
            dst[j] = src[rel.relevant[j]];
            dst[j + rel.relevant.size()] = src[rel.relevant[j] + k_on];
        }
    }
    return out;
}

namespace {

double eval_candidate_ber(const SweepConfig& cfg, const Mlp& model,
                          const std::vector<int>& relevant) {
    LinkConfig link = cfg.link;
    link.model = &model;
    link.relevant = relevant;
    return run_link(link, cfg.snr_db).ber();
}

}  // namespace

SweepResult threshold_sweep(const AggregatedMask& mask, const Dataset& train_data,
                            const Dataset& test_data, const SweepConfig& cfg) {
    if (cfg.gammas.empty()) {
        throw std::invalid_argument("threshold_sweep: empty gamma grid");
    }
    SweepResult res;
    res.rows.resize(cfg.gammas.size());
    res.relevant_models.resize(cfg.gammas.size());
    res.irrelevant_models.resize(cfg.gammas.size());
    for (std::size_t gi = 0; gi < cfg.gammas.size(); ++gi) {
        res.rows[gi].gamma = cfg.gammas[gi];
        res.rows[gi].n_relevant =
            static_cast<int>(classify_subcarriers(mask, cfg.gammas[gi]).relevant.size());
    }

    // Work items: the full baseline plus a (relevant, irrelevant) pair per
    // gamma. Each retrains U from scratch; items are independent.
    const double inf = std::numeric_limits<double>::infinity();
    parallel_for(1 + 2 * cfg.gammas.size(), cfg.workers, [&](std::size_t item) {
        if (item == 0) {
            TrainResult full = train_u(train_data, cfg.hidden, cfg.train);
            res.mse_full = dataset_mse(full.model, test_data, cfg.mse_rows);
            res.ber_full = eval_candidate_ber(cfg, full.model, {});
            res.full_model = std::move(full.model);
            return;
        }
        std::size_t gi = (item - 1) / 2;
        bool relevant_side = (item - 1) % 2 == 0;
        RelevanceSet rel = classify_subcarriers(mask, cfg.gammas[gi]);
        SweepRow& row = res.rows[gi];
        const std::vector<int>& keep = relevant_side ? rel.relevant : rel.irrelevant;
        double& ber_out = relevant_side ? row.ber_relevant : row.ber_irrelevant;
        if (keep.empty()) {
            ber_out = inf;
            if (relevant_side) row.mse = inf;
            return;
        }
        RelevanceSet side;
        side.gamma = rel.gamma;
        side.relevant = keep;
        Dataset filtered = filter_dataset(train_data, side);
        TrainResult trained = train_u(filtered, cfg.hidden, cfg.train);
        if (relevant_side) {
            Dataset filtered_test = filter_dataset(test_data, side);
            row.mse = dataset_mse(trained.model, filtered_test, cfg.mse_rows);
        }
        ber_out = eval_candidate_ber(cfg, trained.model, keep);
        (relevant_side ? res.relevant_models[gi] : res.irrelevant_models[gi]) =
            std::move(trained.model);
    });

    res.selected_index = -1;
    double best = inf;
    for (std::size_t gi = 0; gi < res.rows.size(); ++gi) {
        const SweepRow& row = res.rows[gi];
        if (!std::isfinite(row.ber_relevant)) continue;
        if (row.ber_relevant <= res.ber_full && row.ber_relevant < best) {
            best = row.ber_relevant;
            res.selected_index = static_cast<int>(gi);
        }
    }
    if (res.selected_index >= 0) {
        res.rows[res.selected_index].selected = true;
    } else {
        res.no_improvement = true;
    }
    return res;
}

std::vector<ProbePoint> loss_landscape_probe(const Mlp& u_model, const Dataset& data,
                                             std::uint64_t direction_seed,
                                             const std::vector<double>& t_grid,
                                             std::size_t max_rows) {
    if (t_grid.empty()) {
        throw std::invalid_argument("loss_landscape_probe: empty t grid");
    }
    Rng rng(derive_seed(direction_seed, SeedPurpose::Direction));
    Mlp direction = u_model;
    double norm2 = 0.0;
    for (auto& layer : direction.weights) {
        for (auto& w : layer) {
            w = rng.normal();
            norm2 += w * w;
        }
    }
    for (auto& layer : direction.biases) {
        for (auto& b : layer) {
            b = rng.normal();
            norm2 += b * b;
        }
    }
    double inv_norm = 1.0 / std::sqrt(norm2);

    std::vector<ProbePoint> curve(t_grid.size());
    Mlp probe = u_model;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
        double t = t_grid[i] * inv_norm;
        for (int l = 0; l < u_model.num_layers(); ++l) {
            for (std::size_t j = 0; j < u_model.weights[l].size(); ++j) {
                probe.weights[l][j] = u_model.weights[l][j] + t * direction.weights[l][j];
            }
            for (std::size_t j = 0; j < u_model.biases[l].size(); ++j) {
                probe.biases[l][j] = u_model.biases[l][j] + t * direction.biases[l][j];
            }
        }
        curve[i] = {t_grid[i], dataset_mse(probe, data, max_rows)};
    }
    return curve;
}

std::vector<ConvexityViolation> find_convexity_violations(const std::vector<ProbePoint>& curve,
                                                          double rel_tol) {
    std::vector<ConvexityViolation> out;
    if (curve.size() < 3) return out;
    double lo = curve[0].loss, hi = curve[0].loss;
    for (const auto& p : curve) {
        lo = std::min(lo, p.loss);
        hi = std::max(hi, p.loss);
    }
    double tol = rel_tol * (hi - lo);
    int n = static_cast<int>(curve.size());
    for (int half = 1; 2 * half < n; ++half) {
        for (int m = half; m + half < n; ++m) {
            double chord = 0.5 * (curve[m - half].loss + curve[m + half].loss);
            double gap = curve[m].loss - chord;
            if (gap > tol) {
                out.push_back({m - half, m, m + half, gap});
            }
        }
    }
    return out;
}

}  // namespace xaichest
