#include "xaichest/channel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "xaichest/rng.hpp"

namespace xaichest {

namespace {
constexpr int kSinusoidsPerTap = 32;
constexpr int kRotatorRenormInterval = 4096;
}  // namespace

ChannelProfile make_profile(ProfileKind kind, double doppler_hz) {
    if (doppler_hz < 0.0) {
        throw std::invalid_argument("make_profile: negative Doppler");
    }
    ChannelProfile p;
    p.doppler_hz = doppler_hz;
    if (kind == ProfileKind::VtvExpressway) {
        p.name = "VTV-EX";
        p.path_gains_db = {0, 0, 0, -6.3, -6.3, -25.1, -25.1, -25.1, -22.7, -22.7, -22.7};
        p.path_delays_ns = {0, 1, 2, 100, 101, 200, 201, 202, 300, 301, 302};
    } else {
        p.name = "VTV-SDWW";
        p.path_gains_db = {0, 0, -11.2, -11.2, -19, -21.9, -25.3, -25.3, -24.4, -28, -26.1, -26.1};
        p.path_delays_ns = {0, 1, 100, 101, 200, 300, 400, 401, 500, 600, 700, 701};
    }
    // Normalize so the linear tap powers sum to one.
    double total = 0.0;
    for (double g : p.path_gains_db) total += std::pow(10.0, g / 10.0);
    for (double& g : p.path_gains_db) g -= 10.0 * std::log10(total);
    return p;
}

ChannelRealization generate_realization(const ChannelProfile& profile,
                                        std::size_t num_samples,
                                        double sample_rate_hz,
                                        std::uint64_t seed,
                                        int cp_guard_samples) {
    if (num_samples == 0) {
        throw std::invalid_argument("generate_realization: num_samples must be positive");
    }
    if (profile.path_gains_db.size() != profile.path_delays_ns.size()) {
        throw std::invalid_argument("generate_realization: gain/delay length mismatch");
    }
    ChannelRealization ch;
    ch.profile = profile;
    ch.seed = seed;
    ch.num_samples = num_samples;

    std::size_t n_taps = profile.path_gains_db.size();
    ch.tap_delays_samples.resize(n_taps);
    for (std::size_t l = 0; l < n_taps; ++l) {
        int d = static_cast<int>(std::llround(profile.path_delays_ns[l] * 1e-9 * sample_rate_hz));
        ch.tap_delays_samples[l] = d;
        if (d >= cp_guard_samples) ch.isi_warning = true;
    }

    double total = 0.0;
    std::vector<double> power(n_taps);
    for (std::size_t l = 0; l < n_taps; ++l) {
        power[l] = std::pow(10.0, profile.path_gains_db[l] / 10.0);
        total += power[l];
    }
    for (auto& pw : power) pw /= total;

    constexpr int m_count = kSinusoidsPerTap;
    const double pi = std::numbers::pi;
    ch.tap_gains.assign(n_taps, CVec());
    for (std::size_t l = 0; l < n_taps; ++l) {
        Rng rng(derive_seed(seed, SeedPurpose::Channel, l));
        double theta = 2.0 * pi * rng.uniform();
        // Two independent sinusoid banks (real/imag components) sharing the
        // same arrival angles; the complex autocorrelation tends to J0.
        std::vector<std::complex<double>> rot_c(m_count), rot_s(m_count);
        std::vector<std::complex<double>> step(m_count);
        for (int m = 0; m < m_count; ++m) {
            double alpha = (2.0 * pi * (m + 1) - pi + theta) / (4.0 * m_count);
            double omega = 2.0 * pi * profile.doppler_hz * std::cos(alpha) / sample_rate_hz;
            step[m] = {std::cos(omega), std::sin(omega)};
            double phi = 2.0 * pi * rng.uniform();
            double psi = 2.0 * pi * rng.uniform();
            rot_c[m] = {std::cos(phi), std::sin(phi)};
            rot_s[m] = {std::cos(psi), std::sin(psi)};
        }
        double amp = std::sqrt(power[l] / m_count);
        CVec& g = ch.tap_gains[l];
        g.resize(num_samples);
        for (std::size_t n = 0; n < num_samples; ++n) {
            double xc = 0.0, xs = 0.0;
            for (int m = 0; m < m_count; ++m) {
                xc += rot_c[m].real();
                xs += rot_s[m].real();
                rot_c[m] *= step[m];
                rot_s[m] *= step[m];
            }
            g[n] = {amp * xc, amp * xs};
            if ((n + 1) % kRotatorRenormInterval == 0) {
                for (int m = 0; m < m_count; ++m) {
                    rot_c[m] /= std::abs(rot_c[m]);
                    rot_s[m] /= std::abs(rot_s[m]);
                }
            }
        }
    }
    return ch;
}

TimeSignal apply_channel(const TimeSignal& tx, const ChannelRealization& ch) {
    if (ch.num_samples < tx.samples.size()) {
        throw std::invalid_argument("apply_channel: realization shorter than signal");
    }
    TimeSignal out;
    out.sample_rate_hz = tx.sample_rate_hz;
    out.samples.assign(tx.samples.size(), {0.0, 0.0});
    for (std::size_t l = 0; l < ch.tap_gains.size(); ++l) {
        int d = ch.tap_delays_samples[l];
        const CVec& g = ch.tap_gains[l];
        for (std::size_t n = static_cast<std::size_t>(d); n < tx.samples.size(); ++n) {
            out.samples[n] += g[n] * tx.samples[n - d];
        }
    }
    return out;
}

namespace {

void check_symbol_bounds(const ChannelRealization& ch, int symbol_index,
                         const FrameSpec& spec) {
    if (symbol_index < 0 ||
        static_cast<std::size_t>(symbol_index + 1) * spec.symbol_samples() > ch.num_samples) {
        throw std::out_of_range("symbol_index outside channel realization");
    }
}

}  // namespace

CVec true_freq_response(const ChannelRealization& ch, int symbol_index,
                        const FrameSpec& spec) {
    check_symbol_bounds(ch, symbol_index, spec);
    std::size_t base = static_cast<std::size_t>(symbol_index) * spec.symbol_samples() + spec.k_cp;
    std::size_t n_taps = ch.tap_gains.size();

    // Time-average each tap over the useful samples, then evaluate the DFT of
    // the averaged impulse response on the active bins.
    std::vector<std::complex<double>> g_bar(n_taps, {0.0, 0.0});
    for (std::size_t l = 0; l < n_taps; ++l) {
        for (int n = 0; n < spec.k_total; ++n) {
            g_bar[l] += ch.tap_gains[l][base + n];
        }
        g_bar[l] /= static_cast<double>(spec.k_total);
    }
    CVec h(spec.k_on, {0.0, 0.0});
    for (int j = 0; j < spec.k_on; ++j) {
        int q = spec.active_bins[j];
        for (std::size_t l = 0; l < n_taps; ++l) {
            double ang = -2.0 * std::numbers::pi * q * ch.tap_delays_samples[l] / spec.k_total;
            h[j] += g_bar[l] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
    }
    return h;
}

CVec ici_term(const ChannelRealization& ch, const CVec& symbol, int symbol_index,
              const FrameSpec& spec) {
    check_symbol_bounds(ch, symbol_index, spec);
    if (static_cast<int>(symbol.size()) != spec.k_on) {
        throw std::invalid_argument("ici_term: symbol length != k_on");
    }
    std::size_t base = static_cast<std::size_t>(symbol_index) * spec.symbol_samples() + spec.k_cp;
    std::size_t n_taps = ch.tap_gains.size();
    const int K = spec.k_total;
    const double pi = std::numbers::pi;

    // G_l[m] = (1/K) sum_n g_l[n] e^{-j 2 pi n m / K}
    std::vector<CVec> tap_dft(n_taps, CVec(K, {0.0, 0.0}));
    for (std::size_t l = 0; l < n_taps; ++l) {
        CVec buf(ch.tap_gains[l].begin() + base, ch.tap_gains[l].begin() + base + K);
        fft_unitary(buf, false);
        double scale = 1.0 / std::sqrt(static_cast<double>(K));  // unitary -> 1/K total
        for (int m = 0; m < K; ++m) tap_dft[l][m] = buf[m] * scale;
    }

    CVec e(spec.k_on, {0.0, 0.0});
    for (int jk = 0; jk < spec.k_on; ++jk) {
        int k = spec.active_bins[jk];
        std::complex<double> acc{0.0, 0.0};
        for (int jq = 0; jq < spec.k_on; ++jq) {
            int q = spec.active_bins[jq];
            if (q == k) continue;
            int m = ((k - q) % K + K) % K;
            std::complex<double> hq{0.0, 0.0};
            for (std::size_t l = 0; l < n_taps; ++l) {
                double ang = -2.0 * pi * q * ch.tap_delays_samples[l] / K;
                hq += tap_dft[l][m] * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            acc += hq * symbol[jq];
        }
        e[jk] = acc;
    }
    return e;
}

TimeSignal add_awgn(const TimeSignal& signal, double snr_db, double signal_power_ref,
                    std::uint64_t seed) {
    if (signal_power_ref <= 0.0) {
        throw std::invalid_argument("add_awgn: non-positive reference power");
    }
    if (std::isinf(snr_db) && snr_db > 0) {
        return signal;
    }
    double sigma = std::sqrt(signal_power_ref / std::pow(10.0, snr_db / 10.0));
    TimeSignal out = signal;
    Rng rng(seed);
    for (auto& x : out.samples) {
        x += sigma * rng.cnormal();
    }
    return out;
}

}  // namespace xaichest
