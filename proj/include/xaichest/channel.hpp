#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xaichest/phy.hpp"

namespace xaichest {

enum class ProfileKind { VtvExpressway, VtvSdww };

struct ChannelProfile {
    std::string name;
    std::vector<double> path_gains_db;   // normalized so linear powers sum to 1
    std::vector<double> path_delays_ns;
    double doppler_hz = 0.0;
};

// Vehicle-to-vehicle tapped-delay-line profiles (Expressway = low frequency
// selectivity, Same-Direction-With-Wall = high), power-normalized.
ChannelProfile make_profile(ProfileKind kind, double doppler_hz);

struct ChannelRealization {
    std::vector<CVec> tap_gains;          // [tap][sample]
    std::vector<int> tap_delays_samples;
    ChannelProfile profile;
    std::uint64_t seed = 0;
    std::size_t num_samples = 0;
    bool isi_warning = false;  // a quantized delay reaches the CP guard
};

// Per-tap sum-of-sinusoids Rayleigh process with Jakes autocorrelation
// J0(2 pi f_d tau). Tap powers follow the (normalized) profile gains; delays
// quantize to the sample grid.
ChannelRealization generate_realization(const ChannelProfile& profile,
                                        std::size_t num_samples,
                                        double sample_rate_hz,
                                        std::uint64_t seed,
                                        int cp_guard_samples = 16);

// y[n] = sum_l g_l[n] x[n - d_l]; output length equals input length.
TimeSignal apply_channel(const TimeSignal& tx, const ChannelRealization& ch);

// Per-symbol channel on the active subcarriers, time-averaged over the
// symbol's K useful samples. symbol_index counts (K+CP)-sample blocks from
// the start of the realization.
CVec true_freq_response(const ChannelRealization& ch, int symbol_index,
                        const FrameSpec& spec);

// Doppler-induced inter-carrier interference for one symbol (validation
// quantity; the main chain never uses it).
CVec ici_term(const ChannelRealization& ch, const CVec& symbol,
              int symbol_index, const FrameSpec& spec);

// Adds circular complex Gaussian noise with total variance
// signal_power_ref / 10^(snr_db/10). +infinity snr is the no-noise sentinel.
TimeSignal add_awgn(const TimeSignal& signal, double snr_db,
                    double signal_power_ref, std::uint64_t seed);

}  // namespace xaichest
