#include "xaichest/phy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "xaichest/rng.hpp"

namespace xaichest {

namespace {

// Axis position i (0 = most positive level) for each Gray code value.
std::vector<int> gray_axis_positions(int axis_bits) {
    int levels = 1 << axis_bits;
    std::vector<int> pos(levels);
    for (int i = 0; i < levels; ++i) {
        pos[i ^ (i >> 1)] = i;
    }
    return pos;
}

}  // namespace

ModulationScheme make_modulation(Modulation m) {
    ModulationScheme s;
    s.name = m;
    switch (m) {
        case Modulation::Qpsk: s.bits_per_symbol = 2; break;
        case Modulation::Qam16: s.bits_per_symbol = 4; break;
        case Modulation::Qam64: s.bits_per_symbol = 6; break;
    }
    int axis_bits = s.bits_per_symbol / 2;
    int levels = 1 << axis_bits;
    auto pos = gray_axis_positions(axis_bits);

    double axis_power = 0.0;
    for (int i = 0; i < levels; ++i) {
        double lvl = levels - 1 - 2 * i;
        axis_power += lvl * lvl;
    }
    axis_power /= levels;
    double scale = 1.0 / std::sqrt(2.0 * axis_power);

    int n = 1 << s.bits_per_symbol;
    s.points.resize(n);
    for (int c = 0; c < n; ++c) {
        int vi = c >> axis_bits;          // first half of the bits -> I
        int vq = c & (levels - 1);        // second half -> Q
        double li = levels - 1 - 2 * pos[vi];
        double lq = levels - 1 - 2 * pos[vq];
        s.points[c] = {scale * li, scale * lq};
    }
    return s;
}

int nearest_point(std::complex<double> x, const ModulationScheme& scheme) {
    int best = 0;
    double best_d2 = std::norm(x - scheme.points[0]);
    for (int i = 1; i < static_cast<int>(scheme.points.size()); ++i) {
        double d2 = std::norm(x - scheme.points[i]);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    return best;
}

CVec map_bits(const BitVec& bits, const ModulationScheme& scheme) {
    int bps = scheme.bits_per_symbol;
    if (bits.size() % static_cast<std::size_t>(bps) != 0) {
        throw std::invalid_argument("map_bits: bit count not divisible by bits_per_symbol");
    }
    CVec out(bits.size() / bps);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int code = 0;
        for (int b = 0; b < bps; ++b) {
            code = (code << 1) | (bits[i * bps + b] & 1);
        }
        out[i] = scheme.points[code];
    }
    return out;
}

DemapResult demap_nearest(const CVec& symbols, const ModulationScheme& scheme) {
    DemapResult r;
    int bps = scheme.bits_per_symbol;
    r.hard.resize(symbols.size());
    r.bits.resize(symbols.size() * bps);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
        int idx = nearest_point(symbols[i], scheme);
        r.hard[i] = scheme.points[idx];
        for (int b = 0; b < bps; ++b) {
            r.bits[i * bps + b] = static_cast<std::uint8_t>((idx >> (bps - 1 - b)) & 1);
        }
    }
    return r;
}

FrameSpec ieee80211p_frame_spec(int n_symbols) {
    FrameSpec s;
    s.k_total = 64;
    s.k_cp = 16;
    s.n_symbols = n_symbols;
    s.n_preambles = 2;
    s.sample_rate_hz = 10e6;

    // Active logical tones -26..-1, 1..26; DC and 11 outer guards are null.
    std::vector<int> logical;
    for (int f = -26; f <= 26; ++f) {
        if (f != 0) logical.push_back(f);
    }
    s.k_on = static_cast<int>(logical.size());
    s.k_null = s.k_total - s.k_on;
    s.active_bins.resize(s.k_on);
    for (int j = 0; j < s.k_on; ++j) {
        int f = logical[j];
        s.active_bins[j] = f >= 0 ? f : s.k_total + f;
    }

    const int pilot_tones[4] = {-21, -7, 7, 21};
    for (int p : pilot_tones) {
        auto it = std::find(logical.begin(), logical.end(), p);
        s.pilot_indices.push_back(static_cast<int>(it - logical.begin()));
        s.pilot_values.push_back({1.0, 0.0});
    }
    for (int j = 0; j < s.k_on; ++j) {
        if (std::find(s.pilot_indices.begin(), s.pilot_indices.end(), j) == s.pilot_indices.end()) {
            s.data_indices.push_back(j);
        }
    }
    s.k_pilot = static_cast<int>(s.pilot_indices.size());
    s.k_data = static_cast<int>(s.data_indices.size());
    return s;
}

CVec preamble_symbol(const FrameSpec& spec) {
    Rng rng(derive_seed(0x802110f0ull, SeedPurpose::Preamble));
    CVec v(spec.k_on);
    for (auto& x : v) {
        x = {rng.bits() & 1 ? 1.0 : -1.0, 0.0};
    }
    return v;
}

std::vector<CVec> build_frame(const CVec& data, const FrameSpec& spec) {
    std::size_t need = static_cast<std::size_t>(spec.n_symbols) * spec.k_data;
    if (data.size() != need) {
        throw std::invalid_argument("build_frame: expected n_symbols*k_data data symbols");
    }
    std::vector<CVec> out(spec.n_symbols);
    std::size_t pos = 0;
    for (int i = 0; i < spec.n_symbols; ++i) {
        CVec v(spec.k_on);
        for (int p = 0; p < spec.k_pilot; ++p) {
            v[spec.pilot_indices[p]] = spec.pilot_values[p];
        }
        for (int d = 0; d < spec.k_data; ++d) {
            v[spec.data_indices[d]] = data[pos++];
        }
        out[i] = std::move(v);
    }
    return out;
}

CVec extract_data(const CVec& symbol, const FrameSpec& spec) {
    CVec out(spec.k_data);
    for (int d = 0; d < spec.k_data; ++d) {
        out[d] = symbol[spec.data_indices[d]];
    }
    return out;
}

void fft_unitary(CVec& a, bool inverse) {
    std::size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw std::invalid_argument("fft_unitary: size must be a power of two");
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    double sign = inverse ? 1.0 : -1.0;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& x : a) x *= scale;
}

TimeSignal ofdm_modulate(const std::vector<CVec>& symbols, const FrameSpec& spec) {
    TimeSignal out;
    out.sample_rate_hz = spec.sample_rate_hz;
    out.samples.reserve(symbols.size() * spec.symbol_samples());
    for (const auto& sym : symbols) {
        if (static_cast<int>(sym.size()) != spec.k_on) {
            throw std::invalid_argument("ofdm_modulate: symbol length != k_on");
        }
        CVec grid(spec.k_total, {0.0, 0.0});
        for (int j = 0; j < spec.k_on; ++j) {
            grid[spec.active_bins[j]] = sym[j];
        }
        fft_unitary(grid, true);
        for (int i = spec.k_total - spec.k_cp; i < spec.k_total; ++i) {
            out.samples.push_back(grid[i]);
        }
        out.samples.insert(out.samples.end(), grid.begin(), grid.end());
    }
    return out;
}

std::vector<CVec> ofdm_demodulate(const TimeSignal& signal, const FrameSpec& spec) {
    std::size_t block = static_cast<std::size_t>(spec.symbol_samples());
    if (signal.samples.size() % block != 0) {
        throw std::invalid_argument("ofdm_demodulate: sample count not a multiple of K+K_cp");
    }
    std::size_t n_sym = signal.samples.size() / block;
    std::vector<CVec> out(n_sym);
    for (std::size_t i = 0; i < n_sym; ++i) {
        CVec grid(signal.samples.begin() + i * block + spec.k_cp,
                  signal.samples.begin() + (i + 1) * block);
        fft_unitary(grid, false);
        CVec sym(spec.k_on);
        for (int j = 0; j < spec.k_on; ++j) {
            sym[j] = grid[spec.active_bins[j]];
        }
        out[i] = std::move(sym);
    }
    return out;
}

double mean_power(const CVec& samples) {
    double acc = 0.0;
    for (const auto& x : samples) acc += std::norm(x);
    return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

TimeSignal hpa_apply(const TimeSignal& signal, const HpaModel& hpa) {
    if (hpa.kind == HpaKind::Linear) {
        return signal;
    }
    TimeSignal out = signal;
    double p_in = mean_power(signal.samples);
    if (p_in <= 0.0) {
        return out;
    }
    double a_sat = std::sqrt(p_in * std::pow(10.0, hpa.ibo_db / 10.0));
    double two_p = 2.0 * hpa.smoothness;
    for (auto& x : out.samples) {
        double amp = std::abs(x);
        if (amp == 0.0) continue;
        double gain = std::pow(1.0 + std::pow(amp / a_sat, two_p), -1.0 / two_p);
        x *= gain;
    }
    return out;
}

BussgangResult bussgang_decompose(const TimeSignal& input, const TimeSignal& output) {
    if (input.samples.size() != output.samples.size()) {
        throw std::invalid_argument("bussgang_decompose: length mismatch");
    }
    std::complex<double> cross{0.0, 0.0};
    double p_in = 0.0;
    for (std::size_t i = 0; i < input.samples.size(); ++i) {
        cross += output.samples[i] * std::conj(input.samples[i]);
        p_in += std::norm(input.samples[i]);
    }
    if (p_in <= 0.0) {
        throw std::invalid_argument("bussgang_decompose: zero input power");
    }
    std::complex<double> rho = cross / p_in;
    if (std::abs(rho) < 1e-300) {
        throw std::invalid_argument("bussgang_decompose: degenerate gain");
    }
    BussgangResult r;
    r.rho = rho;
    r.distortion.sample_rate_hz = input.sample_rate_hz;
    r.distortion.samples.resize(input.samples.size());
    for (std::size_t i = 0; i < input.samples.size(); ++i) {
        r.distortion.samples[i] = output.samples[i] / rho - input.samples[i];
    }
    return r;
}

}  // namespace xaichest
