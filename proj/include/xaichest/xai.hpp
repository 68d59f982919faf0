#pragma once

#include <cstdint>
#include <vector>

#include "xaichest/eval.hpp"
#include "xaichest/neural.hpp"

namespace xaichest {

// Mask values are clamped to [kMaskFloor, kMaskCeil] so log(b) stays finite;
// the gradient is gated to zero where a clamp is active.
inline constexpr double kMaskFloor = 1e-6;
inline constexpr double kMaskCeil = 1.0 - 1e-12;

struct NoiseMask {
    std::vector<double> values;  // length 2*k_on, in (0,1)
};

struct AggregatedMask {
    std::vector<double> values;  // length k_on; real/imag weights averaged
};

struct RelevanceSet {
    double gamma = 0.0;
    std::vector<int> relevant;    // {k : b[k] < gamma}, sorted
    std::vector<int> irrelevant;  // complement, sorted
};

struct NLoss {
    double total = 0.0;  // L_N = L_U - lambda * L_X
    double l_u = 0.0;
    double l_x = 0.0;
};

// Composite N-model loss for one sample with a fixed noise draw eps. The U
// model stays frozen; gradients flow through its input back into the mask.
// n_grads may be null to evaluate the loss only.
NLoss n_loss_and_grads(const Mlp& u_model, const Mlp& n_model,
                       const std::vector<double>& input,
                       const std::vector<double>& target,
                       const std::vector<double>& eps, double lambda,
                       Gradients* n_grads);

NoiseMask eval_mask(const Mlp& n_model, const std::vector<double>& input);

struct NTrainResult {
    Mlp model;
    std::vector<double> history;  // mean L_N per epoch
};

// Trains the interpretability network against a frozen U model: per sample,
// b' = N(x), x'' = x + b' (.) eps with eps ~ N(0,1), and
// L_N = MSE(h, U(x'')) - lambda * mean(log b').
NTrainResult train_n_model(const Mlp& u_model, const Dataset& data,
                           const std::vector<int>& hidden, const TrainConfig& cfg);

AggregatedMask aggregate_mask(const NoiseMask& mask, int k_on);

// Mean aggregated mask over a dataset (the testing-phase view).
AggregatedMask mean_aggregated_mask(const Mlp& n_model, const Dataset& data);

// relevant = {k : b[k] < gamma}; entries equal to gamma are irrelevant.
RelevanceSet classify_subcarriers(const AggregatedMask& mask, double gamma);

// Keeps the input columns for the real and imaginary parts of the relevant
// subcarriers; targets keep the full width.
Dataset filter_dataset(const Dataset& data, const RelevanceSet& rel);

struct SweepRow {
    double gamma = 0.0;
    int n_relevant = 0;
    double ber_relevant = 0.0;
    double ber_irrelevant = 0.0;
    double mse = 0.0;  // test MSE of the relevant-input model
    bool selected = false;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double ber_full = 0.0;
    double mse_full = 0.0;
    int selected_index = -1;     // -1 when no gamma satisfies the constraint
    bool no_improvement = false;
    std::vector<Mlp> relevant_models;    // parallel to rows; empty net when skipped
    std::vector<Mlp> irrelevant_models;
    Mlp full_model;
};

struct SweepConfig {
    std::vector<double> gammas;
    std::vector<int> hidden;   // U architecture (hidden dims)
    TrainConfig train;
    LinkConfig link;           // model/relevant fields are filled per candidate
    double snr_db = 40.0;
    int workers = 1;
    std::size_t mse_rows = 0;  // cap for the test-MSE column; 0 = all
};

// Retrains U from scratch per (gamma, polarity), evaluates BER at the given
// SNR, and selects the gamma minimizing BER(relevant) subject to
// BER(relevant) <= BER(full). Ties go to the smallest gamma.
SweepResult threshold_sweep(const AggregatedMask& mask, const Dataset& train_data,
                            const Dataset& test_data, const SweepConfig& cfg);

struct ProbePoint {
    double t = 0.0;
    double loss = 0.0;
};

struct ConvexityViolation {
    int a = 0, m = 0, b = 0;  // grid indices with m the midpoint
    double gap = 0.0;         // g(m) - (g(a)+g(b))/2
};

// Restricted loss g(t) = L_U(theta + t v) along a seeded random unit
// direction, evaluated on at most max_rows dataset rows (0 = all).
std::vector<ProbePoint> loss_landscape_probe(const Mlp& u_model, const Dataset& data,
                                             std::uint64_t direction_seed,
                                             const std::vector<double>& t_grid,
                                             std::size_t max_rows = 0);

// Midpoint-convexity scan over a uniformly sampled curve; a certificate is a
// triple with g(m) above the chord by more than rel_tol * curve range.
std::vector<ConvexityViolation> find_convexity_violations(const std::vector<ProbePoint>& curve,
                                                          double rel_tol = 1e-9);

}  // namespace xaichest
