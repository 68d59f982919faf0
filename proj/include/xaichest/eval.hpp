#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xaichest/channel.hpp"
#include "xaichest/estimators.hpp"
#include "xaichest/neural.hpp"
#include "xaichest/phy.hpp"

namespace xaichest {

struct LinkConfig {
    FrameSpec frame;
    ModulationScheme scheme;
    ChannelProfile profile;
    HpaModel hpa;
    EstimatorKind estimator = EstimatorKind::Sta;
    StaParams sta;
    const Mlp* model = nullptr;        // optional post-processing network
    std::vector<int> relevant;         // k_on indices kept as model input; empty = all
    bool feedback_fnn = true;          // corrected estimate threads into the next DPA step
    bool genie = false;                // equalize with the true channel (validation mode)
    bool awgn_only = false;            // identity channel, noise only (validation mode)
    int n_frames = 200;
    std::uint64_t seed = 1;
};

struct FrameStats {
    std::uint64_t bit_errors = 0;
    std::uint64_t total_bits = 0;
    double mse_sum = 0.0;  // summed per-symbol channel MSE
    int mse_count = 0;
    bool excluded = false;  // non-finite estimate encountered
};

// Per-symbol capture used for dataset generation.
struct FrameCapture {
    std::vector<CVec> conv_estimates;
    std::vector<CVec> true_channels;
};

FrameStats run_frame(const LinkConfig& cfg, double snr_db, std::uint64_t frame_index,
                     FrameCapture* capture = nullptr);

struct LinkStats {
    std::uint64_t bit_errors = 0;
    std::uint64_t total_bits = 0;
    double mse_channel = 0.0;  // mean per-symbol channel MSE
    std::uint64_t frames_excluded = 0;

    double ber() const {
        return total_bits == 0 ? 0.0 : static_cast<double>(bit_errors) / static_cast<double>(total_bits);
    }
};

LinkStats run_link(const LinkConfig& cfg, double snr_db);

struct BerPoint {
    double snr_db = 0.0;
    std::uint64_t bit_errors = 0;
    std::uint64_t total_bits = 0;
    double ber = 0.0;
    double mse_channel = 0.0;
    std::uint64_t frames_excluded = 0;
};

struct BerCurve {
    std::vector<BerPoint> points;
    std::string config_digest;
};

// Raw counts per SNR point, each with its own derived seed stream. No
// monotone smoothing is ever applied.
BerCurve ber_curve(const LinkConfig& cfg, const std::vector<double>& snr_grid_db,
                   int workers = 1);

struct FlopsReport {
    struct Layer {
        int in = 0;
        int out = 0;
        long long mult_adds = 0;     // 2 * in * out
        long long bias_adds = 0;     // out
        long long activations = 0;   // out (reported, excluded from total)
    };
    std::vector<Layer> layers;
    long long total = 0;             // sum of mult_adds + bias_adds
    long long total_activations = 0;
};

FlopsReport count_flops(const std::vector<int>& dims);

struct Histogram {
    std::vector<double> bin_low;
    std::vector<double> bin_high;
    std::vector<long long> count_data;
    std::vector<long long> count_pilot;
};

// Pools per-subcarrier weights over all masks into uniform bins on [0,1];
// values of exactly 1 land in the last bin.
Histogram noise_weight_histogram(const std::vector<std::vector<double>>& masks, int bins,
                                 const std::vector<int>& pilot_indices);

// Runs fn(0..n-1) on up to `workers` threads. Work items must be independent;
// results are indexed, so the output is identical for any worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace xaichest
