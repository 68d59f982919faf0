#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace xaichest {

using CVec = std::vector<std::complex<double>>;
using BitVec = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Constellations

enum class Modulation { Qpsk, Qam16, Qam64 };

struct ModulationScheme {
    Modulation name = Modulation::Qpsk;
    int bits_per_symbol = 2;
    CVec points;  // indexed by codeword value (MSB-first bit grouping)
};

// Rectangular Gray-coded constellation scaled to unit average power.
ModulationScheme make_modulation(Modulation m);

// Index of the Euclidean-nearest constellation point; ties resolve to the
// lowest index.
int nearest_point(std::complex<double> x, const ModulationScheme& scheme);

CVec map_bits(const BitVec& bits, const ModulationScheme& scheme);

struct DemapResult {
    CVec hard;
    BitVec bits;
};
DemapResult demap_nearest(const CVec& symbols, const ModulationScheme& scheme);

// ---------------------------------------------------------------------------
// OFDM numerology

struct FrameSpec {
    int k_total = 0;   // FFT size K
    int k_on = 0;      // active subcarriers
    int k_pilot = 0;
    int k_data = 0;
    int k_null = 0;
    int k_cp = 0;      // cyclic prefix samples
    int n_symbols = 0; // data symbols per frame
    int n_preambles = 0;
    std::vector<int> pilot_indices;  // positions within the k_on ordering
    std::vector<int> data_indices;
    std::vector<int> active_bins;    // FFT bin for each k_on position
    CVec pilot_values;
    double sample_rate_hz = 0.0;

    int symbol_samples() const { return k_total + k_cp; }
};

// IEEE 802.11p numerology: K=64, CP=16, 52 active subcarriers (-26..26 minus
// DC), comb pilots at logical tones {-21,-7,+7,+21} with value +1, 10 MHz.
FrameSpec ieee80211p_frame_spec(int n_symbols = 50);

// Fixed +/-1 training symbol loading every active subcarrier. The sequence is
// a seeded constant, identical across runs.
CVec preamble_symbol(const FrameSpec& spec);

std::vector<CVec> build_frame(const CVec& data, const FrameSpec& spec);

// Data subcarriers of one k_on-ordered symbol, in data_indices order.
CVec extract_data(const CVec& symbol, const FrameSpec& spec);

struct TimeSignal {
    CVec samples;
    double sample_rate_hz = 0.0;
};

TimeSignal ofdm_modulate(const std::vector<CVec>& symbols, const FrameSpec& spec);
std::vector<CVec> ofdm_demodulate(const TimeSignal& signal, const FrameSpec& spec);

// Unitary (1/sqrt(N)-scaled) radix-2 transform, in place. N must be a power
// of two.
void fft_unitary(CVec& a, bool inverse);

// ---------------------------------------------------------------------------
// High-power amplifier

enum class HpaKind { Linear, Rapp };

struct HpaModel {
    HpaKind kind = HpaKind::Linear;
    double ibo_db = 8.0;      // input back-off: 10 log10(A_sat^2 / P_in,avg)
    double smoothness = 3.0;  // Rapp p-factor
    std::complex<double> rho{1.0, 0.0};  // last estimated Bussgang gain
};

// Rapp AM/AM per sample (phase preserved); saturation level is set by ibo_db
// relative to the mean input power. Linear kind is the identity.
TimeSignal hpa_apply(const TimeSignal& signal, const HpaModel& hpa);

struct BussgangResult {
    std::complex<double> rho;
    TimeSignal distortion;  // output/rho - input
};

// Sample-estimate Bussgang split: rho = <out,in>/<in,in>, so the distortion
// is orthogonal to the input by construction.
BussgangResult bussgang_decompose(const TimeSignal& input, const TimeSignal& output);

double mean_power(const CVec& samples);

}  // namespace xaichest
