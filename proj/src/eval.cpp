#include "xaichest/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "xaichest/rng.hpp"

namespace xaichest {

namespace {

bool all_finite(const CVec& v) {
    for (const auto& x : v) {
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    }
    return true;
}

std::uint64_t snr_key(double snr_db) {
    if (std::isinf(snr_db)) return 0xffffffffull;
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(std::llround(snr_db * 1000.0)));
}

}  // namespace

FrameStats run_frame(const LinkConfig& cfg, double snr_db, std::uint64_t frame_index,
                     FrameCapture* capture) {
    const FrameSpec& spec = cfg.frame;
    const std::uint64_t key = snr_key(snr_db);
    FrameStats stats;

    // Transmitter.
    Rng bits_rng(derive_seed(cfg.seed, SeedPurpose::Bits, key, frame_index));
    std::size_t n_bits = static_cast<std::size_t>(spec.n_symbols) * spec.k_data *
                         cfg.scheme.bits_per_symbol;
    BitVec tx_bits(n_bits);
    for (auto& b : tx_bits) b = static_cast<std::uint8_t>(bits_rng.bits() & 1);
    CVec data = map_bits(tx_bits, cfg.scheme);
    std::vector<CVec> symbols = build_frame(data, spec);
    CVec preamble = preamble_symbol(spec);
    std::vector<CVec> all_symbols;
    all_symbols.reserve(spec.n_preambles + symbols.size());
    for (int p = 0; p < spec.n_preambles; ++p) all_symbols.push_back(preamble);
    all_symbols.insert(all_symbols.end(), symbols.begin(), symbols.end());
    TimeSignal tx = ofdm_modulate(all_symbols, spec);

    // Nonlinear RF with Bussgang gain compensation at the transmitter.
    TimeSignal u = tx;
    if (cfg.hpa.kind != HpaKind::Linear) {
        TimeSignal amplified = hpa_apply(tx, cfg.hpa);
        BussgangResult bg = bussgang_decompose(tx, amplified);
        u.samples.resize(amplified.samples.size());
        for (std::size_t i = 0; i < amplified.samples.size(); ++i) {
            u.samples[i] = amplified.samples[i] / bg.rho;
        }
    }
    double ref_power = mean_power(u.samples);

    // Channel + noise.
    ChannelRealization ch;
    TimeSignal rx = u;
    if (!cfg.awgn_only) {
        ch = generate_realization(
            cfg.profile, u.samples.size(), spec.sample_rate_hz,
            derive_seed(cfg.seed, SeedPurpose::Channel, key, frame_index), spec.k_cp);
        rx = apply_channel(u, ch);
    }
    rx = add_awgn(rx, snr_db, ref_power,
                  derive_seed(cfg.seed, SeedPurpose::Noise, key, frame_index));
    std::vector<CVec> rx_symbols = ofdm_demodulate(rx, spec);

    // Receiver.
    std::vector<CVec> rx_preambles(rx_symbols.begin(), rx_symbols.begin() + spec.n_preambles);
    ChannelEstimate h_state = ls_preamble(rx_preambles, preamble);
    ChannelEstimate h_dpa_track = h_state;
    CVec y_prev = rx_symbols[spec.n_preambles - 1];

    std::vector<double> model_input;
    const CVec identity_channel(spec.k_on, {1.0, 0.0});
    for (int i = 0; i < spec.n_symbols; ++i) {
        const CVec& y = rx_symbols[spec.n_preambles + i];
        CVec h_true = cfg.awgn_only ? identity_channel
                                    : true_freq_response(ch, spec.n_preambles + i, spec);

        CVec h_conv;
        switch (cfg.estimator) {
            case EstimatorKind::Dpa:
                h_conv = dpa_step(y, h_state, cfg.scheme, spec).h;
                break;
            case EstimatorKind::Sta: {
                const ChannelEstimate& eq_source =
                    cfg.sta.separate_dpa_track ? h_dpa_track : h_state;
                DpaResult dpa = dpa_step(y, eq_source, cfg.scheme, spec);
                h_dpa_track = dpa.h;
                h_conv = sta_smooth(dpa.h, h_state, cfg.sta);
                break;
            }
            case EstimatorKind::Trfi:
                h_conv = trfi_estimate(y, y_prev, h_state, cfg.scheme, spec).h;
                break;
        }
        // Pilot positions carry exact known-symbol observations; the smoothed
        // estimate never overrides them. DPA and TRFI already emit the raw
        // pilot LS, so this only refreshes the STA output.
        for (int p = 0; p < spec.k_pilot; ++p) {
            int k = spec.pilot_indices[p];
            h_conv[k] = y[k] / spec.pilot_values[p];
        }

        if (capture) {
            capture->conv_estimates.push_back(h_conv);
            capture->true_channels.push_back(h_true);
        }

        CVec h_eq = h_conv;
        if (cfg.model) {
            model_input = stack_complex(h_conv);
            if (!cfg.relevant.empty()) {
                std::vector<double> filtered(2 * cfg.relevant.size());
                for (std::size_t j = 0; j < cfg.relevant.size(); ++j) {
                    filtered[j] = model_input[cfg.relevant[j]];
                    filtered[j + cfg.relevant.size()] = model_input[cfg.relevant[j] + spec.k_on];
                }
                model_input = std::move(filtered);
            }
            h_eq = unstack_complex(forward(*cfg.model, model_input));
        }
        if (cfg.genie) {
            h_eq = h_true;
        }
        if (!all_finite(h_eq)) {
            stats.excluded = true;
            return stats;
        }

        for (int k = 0; k < spec.k_on; ++k) {
            stats.mse_sum += std::norm(h_eq[k] - h_true[k]);
        }
        stats.mse_count += spec.k_on;

        CVec eq(spec.k_data);
        for (int d = 0; d < spec.k_data; ++d) {
            eq[d] = y[spec.data_indices[d]] / h_eq[spec.data_indices[d]];
        }
        DemapResult dec = demap_nearest(eq, cfg.scheme);
        std::size_t bit_base = static_cast<std::size_t>(i) * spec.k_data *
                               cfg.scheme.bits_per_symbol;
        for (std::size_t b = 0; b < dec.bits.size(); ++b) {
            stats.bit_errors += dec.bits[b] != tx_bits[bit_base + b];
        }
        stats.total_bits += dec.bits.size();

        // State threading for the next symbol.
        if (cfg.genie) {
            h_state = h_true;
        } else if (cfg.model && cfg.feedback_fnn) {
            h_state = h_eq;
        } else {
            h_state = h_conv;
        }
        y_prev = y;
    }
    return stats;
}

LinkStats run_link(const LinkConfig& cfg, double snr_db) {
    LinkStats out;
    double mse_sum = 0.0;
    std::uint64_t mse_count = 0;
    for (int f = 0; f < cfg.n_frames; ++f) {
        FrameStats fs = run_frame(cfg, snr_db, static_cast<std::uint64_t>(f));
        if (fs.excluded) {
            ++out.frames_excluded;
            continue;
        }
        out.bit_errors += fs.bit_errors;
        out.total_bits += fs.total_bits;
        mse_sum += fs.mse_sum;
        mse_count += fs.mse_count;
    }
    out.mse_channel = mse_count == 0 ? 0.0 : mse_sum / static_cast<double>(mse_count);
    return out;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::size_t n_threads = std::min<std::size_t>(workers, n);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

BerCurve ber_curve(const LinkConfig& cfg, const std::vector<double>& snr_grid_db, int workers) {
    BerCurve curve;
    curve.points.resize(snr_grid_db.size());
    parallel_for(snr_grid_db.size(), workers, [&](std::size_t i) {
        LinkStats s = run_link(cfg, snr_grid_db[i]);
        BerPoint& p = curve.points[i];
        p.snr_db = snr_grid_db[i];
        p.bit_errors = s.bit_errors;
        p.total_bits = s.total_bits;
        p.ber = s.ber();
        p.mse_channel = s.mse_channel;
        p.frames_excluded = s.frames_excluded;
    });
    return curve;
}

FlopsReport count_flops(const std::vector<int>& dims) {
    if (dims.size() < 2) {
        throw std::invalid_argument("count_flops: need at least two dims");
    }
    FlopsReport r;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        FlopsReport::Layer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.mult_adds = 2ll * dims[l] * dims[l + 1];
        layer.bias_adds = dims[l + 1];
        layer.activations = dims[l + 1];
        r.total += layer.mult_adds + layer.bias_adds;
        r.total_activations += layer.activations;
        r.layers.push_back(layer);
    }
    return r;
}

Histogram noise_weight_histogram(const std::vector<std::vector<double>>& masks, int bins,
                                 const std::vector<int>& pilot_indices) {
    if (bins < 2) {
        throw std::invalid_argument("noise_weight_histogram: need >= 2 bins");
    }
    Histogram h;
    h.bin_low.resize(bins);
    h.bin_high.resize(bins);
    h.count_data.assign(bins, 0);
    h.count_pilot.assign(bins, 0);
    for (int b = 0; b < bins; ++b) {
        h.bin_low[b] = static_cast<double>(b) / bins;
        h.bin_high[b] = static_cast<double>(b + 1) / bins;
    }
    std::vector<bool> is_pilot;
    for (const auto& mask : masks) {
        if (is_pilot.size() != mask.size()) {
            is_pilot.assign(mask.size(), false);
            for (int p : pilot_indices) {
                if (p >= 0 && static_cast<std::size_t>(p) < mask.size()) is_pilot[p] = true;
            }
        }
        for (std::size_t k = 0; k < mask.size(); ++k) {
            int b = static_cast<int>(mask[k] * bins);
            b = std::clamp(b, 0, bins - 1);
            if (is_pilot[k]) {
                ++h.count_pilot[b];
            } else {
                ++h.count_data[b];
            }
        }
    }
    return h;
}

}  // namespace xaichest
