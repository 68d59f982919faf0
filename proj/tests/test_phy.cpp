#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>

#include "doctest.h"
#include "xaichest/phy.hpp"
#include "xaichest/rng.hpp"

using namespace xaichest;

namespace {

double max_abs_diff(const CVec& a, const CVec& b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

BitVec random_bits(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    BitVec bits(n);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.bits() & 1);
    return bits;
}

}  // namespace

TEST_CASE("constellations are unit power and Gray coded") {
    for (Modulation m : {Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64}) {
        ModulationScheme s = make_modulation(m);
        CHECK(static_cast<int>(s.points.size()) == 1 << s.bits_per_symbol);
        double power = 0.0;
        for (auto p : s.points) power += std::norm(p);
        power /= static_cast<double>(s.points.size());
        CHECK(power == doctest::Approx(1.0).epsilon(1e-12));

        // Geometric nearest neighbors must differ in exactly one bit.
        double min_d2 = 1e30;
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            for (std::size_t j = i + 1; j < s.points.size(); ++j) {
                min_d2 = std::min(min_d2, std::norm(s.points[i] - s.points[j]));
            }
        }
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            for (std::size_t j = i + 1; j < s.points.size(); ++j) {
                if (std::norm(s.points[i] - s.points[j]) < min_d2 * 1.0001) {
                    int hamming = __builtin_popcount(static_cast<unsigned>(i ^ j));
                    CHECK(hamming == 1);
                }
            }
        }
    }
}

TEST_CASE("map_bits basics") {
    ModulationScheme qpsk = make_modulation(Modulation::Qpsk);
    CVec s = map_bits({0, 0}, qpsk);
    REQUIRE(s.size() == 1);
    CHECK(s[0].real() == doctest::Approx(0.7071).epsilon(1e-4));
    CHECK(s[0].imag() == doctest::Approx(0.7071).epsilon(1e-4));

    CHECK(map_bits({}, qpsk).empty());
    CHECK_THROWS_AS(map_bits({0, 1, 0}, qpsk), std::invalid_argument);

    // All 16QAM codewords: distinct points, unit mean power by enumeration.
    ModulationScheme qam16 = make_modulation(Modulation::Qam16);
    BitVec all;
    for (int c = 0; c < 16; ++c) {
        for (int b = 3; b >= 0; --b) all.push_back((c >> b) & 1);
    }
    CVec pts = map_bits(all, qam16);
    double power = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        power += std::norm(pts[i]);
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            CHECK(std::abs(pts[i] - pts[j]) > 1e-9);
        }
    }
    CHECK(power / 16.0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("demap_nearest") {
    ModulationScheme qpsk = make_modulation(Modulation::Qpsk);

    // Exact constellation points map to themselves, all schemes.
    for (Modulation m : {Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64}) {
        ModulationScheme s = make_modulation(m);
        DemapResult r = demap_nearest(s.points, s);
        CHECK(max_abs_diff(r.hard, s.points) == 0.0);
        for (std::size_t i = 0; i < s.points.size(); ++i) {
            int code = 0;
            for (int b = 0; b < s.bits_per_symbol; ++b) {
                code = (code << 1) | r.bits[i * s.bits_per_symbol + b];
            }
            CHECK(code == static_cast<int>(i));
        }
    }

    // Brute-force distance oracle on a noisy input.
    DemapResult r = demap_nearest({{0.9, 0.1}}, qpsk);
    CHECK(r.hard[0].real() == doctest::Approx(0.70710678).epsilon(1e-8));
    CHECK(r.hard[0].imag() == doctest::Approx(0.70710678).epsilon(1e-8));

    // Midpoint tie: lowest constellation index wins.
    ModulationScheme qam64 = make_modulation(Modulation::Qam64);
    std::complex<double> mid = 0.5 * (qam64.points[0] + qam64.points[1]);
    DemapResult tie = demap_nearest({mid}, qam64);
    int best = 0;
    double best_d2 = std::norm(mid - qam64.points[0]);
    for (int i = 1; i < 64; ++i) {
        double d2 = std::norm(mid - qam64.points[i]);
        if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
        }
    }
    CHECK(tie.hard[0] == qam64.points[best]);
    CHECK(std::abs(std::norm(mid - qam64.points[0]) - std::norm(mid - qam64.points[1])) < 1e-15);
    CHECK(tie.hard[0] == qam64.points[0]);
}

TEST_CASE("demap of map is the identity over all codewords") {
    for (Modulation m : {Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64}) {
        ModulationScheme s = make_modulation(m);
        BitVec bits;
        for (std::size_t c = 0; c < s.points.size(); ++c) {
            for (int b = s.bits_per_symbol - 1; b >= 0; --b) bits.push_back((c >> b) & 1);
        }
        DemapResult r = demap_nearest(map_bits(bits, s), s);
        CHECK(r.bits == bits);
    }
}

TEST_CASE("ieee80211p frame spec") {
    FrameSpec spec = ieee80211p_frame_spec();
    CHECK(spec.k_total == 64);
    CHECK(spec.k_on == 52);
    CHECK(spec.k_pilot == 4);
    CHECK(spec.k_data == 48);
    CHECK(spec.k_null == 12);
    CHECK(spec.k_cp == 16);
    CHECK(spec.n_symbols == 50);
    CHECK(spec.k_on == spec.k_pilot + spec.k_data);
    CHECK(spec.k_null == spec.k_total - spec.k_on);
    // Pilots at logical tones {-21,-7,+7,+21} under the -26..-1,1..26 ordering.
    CHECK(spec.pilot_indices == std::vector<int>{5, 19, 32, 46});
    for (int p : spec.pilot_indices) {
        for (int d : spec.data_indices) CHECK(p != d);
    }
    CHECK(static_cast<int>(spec.data_indices.size()) == spec.k_data);
}

TEST_CASE("build_frame places pilots and data") {
    FrameSpec spec = ieee80211p_frame_spec(1);
    CVec zeros(48, {0.0, 0.0});
    auto syms = build_frame(zeros, spec);
    REQUIRE(syms.size() == 1);
    REQUIRE(syms[0].size() == 52);
    for (int p = 0; p < spec.k_pilot; ++p) {
        CHECK(syms[0][spec.pilot_indices[p]] == spec.pilot_values[p]);
    }
    for (int d : spec.data_indices) {
        CHECK(syms[0][d] == std::complex<double>{0.0, 0.0});
    }

    // Round trip through extract_data.
    ModulationScheme qpsk = make_modulation(Modulation::Qpsk);
    CVec data = map_bits(random_bits(96, 7), qpsk);
    auto framed = build_frame(data, spec);
    CHECK(max_abs_diff(extract_data(framed[0], spec), data) == 0.0);

    CHECK_THROWS_AS(build_frame(CVec(47), spec), std::invalid_argument);

    // Full 802.11p frame: 50 symbols of length 52.
    FrameSpec full = ieee80211p_frame_spec();
    auto frame = build_frame(CVec(50 * 48, {1.0, 0.0}), full);
    CHECK(frame.size() == 50);
    for (const auto& s : frame) CHECK(s.size() == 52);
}

TEST_CASE("ofdm modulation") {
    FrameSpec spec = ieee80211p_frame_spec(1);

    SUBCASE("single tone has constant modulus 1/sqrt(K)") {
        CVec sym(spec.k_on, {0.0, 0.0});
        sym[26] = {1.0, 0.0};  // logical tone +1
        TimeSignal t = ofdm_modulate({sym}, spec);
        REQUIRE(static_cast<int>(t.samples.size()) == spec.symbol_samples());
        for (const auto& x : t.samples) {
            CHECK(std::abs(x) == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
        }
    }

    SUBCASE("all-zero symbol gives all-zero samples") {
        TimeSignal t = ofdm_modulate({CVec(spec.k_on, {0.0, 0.0})}, spec);
        for (const auto& x : t.samples) CHECK(std::abs(x) == 0.0);
    }

    SUBCASE("modulate-demodulate round trip") {
        ModulationScheme qam64 = make_modulation(Modulation::Qam64);
        CVec data = map_bits(random_bits(48 * 6, 11), qam64);
        auto syms = build_frame(data, spec);
        auto back = ofdm_demodulate(ofdm_modulate(syms, spec), spec);
        REQUIRE(back.size() == syms.size());
        CHECK(max_abs_diff(back[0], syms[0]) < 1e-10);
    }

    SUBCASE("demodulate rejects misaligned input") {
        TimeSignal t;
        t.samples.resize(81);
        CHECK_THROWS_AS(ofdm_demodulate(t, spec), std::invalid_argument);
    }

    SUBCASE("Parseval: time energy (excluding CP) equals frequency energy") {
        ModulationScheme qpsk = make_modulation(Modulation::Qpsk);
        CVec data = map_bits(random_bits(96, 13), qpsk);
        auto syms = build_frame(data, spec);
        TimeSignal t = ofdm_modulate(syms, spec);
        double freq_energy = 0.0;
        for (const auto& v : syms[0]) freq_energy += std::norm(v);
        double time_energy = 0.0;
        for (int n = spec.k_cp; n < spec.symbol_samples(); ++n) {
            time_energy += std::norm(t.samples[n]);
        }
        CHECK(time_energy == doctest::Approx(freq_energy).epsilon(1e-10));
    }
}

TEST_CASE("hpa") {
    Rng rng(42);
    TimeSignal sig;
    sig.sample_rate_hz = 10e6;
    sig.samples.resize(4096);
    for (auto& x : sig.samples) x = rng.cnormal();

    SUBCASE("linear kind is the identity") {
        HpaModel hpa;
        TimeSignal out = hpa_apply(sig, hpa);
        CHECK(max_abs_diff(out.samples, sig.samples) == 0.0);
    }

    SUBCASE("small signals pass almost unchanged") {
        HpaModel hpa{HpaKind::Rapp, 30.0, 3.0, {1.0, 0.0}};
        TimeSignal out = hpa_apply(sig, hpa);
        for (std::size_t i = 0; i < sig.samples.size(); ++i) {
            CHECK(std::abs(out.samples[i] - sig.samples[i]) <= 0.01 * std::abs(sig.samples[i]));
        }
    }

    SUBCASE("hard limiter regime clamps at the saturation level") {
        // p=100 approximates the p->infinity limiter; drive one sample at
        // twice the saturation amplitude.
        TimeSignal probe;
        probe.samples.assign(1000, {1.0, 0.0});
        HpaModel hpa{HpaKind::Rapp, 0.0, 100.0, {1.0, 0.0}};
        double a_sat = 1.0;  // ibo 0 dB on unit-power input
        probe.samples[0] = {2.0 * a_sat, 0.0};
        TimeSignal out = hpa_apply(probe, hpa);
        double p_in = mean_power(probe.samples);
        double sat = std::sqrt(p_in);  // actual saturation used inside
        CHECK(std::abs(out.samples[0]) == doctest::Approx(sat).epsilon(2e-3));
    }
}

TEST_CASE("bussgang decomposition") {
    Rng rng(9);
    TimeSignal in;
    in.samples.resize(100000);
    for (auto& x : in.samples) x = rng.cnormal();

    SUBCASE("identity output") {
        BussgangResult r = bussgang_decompose(in, in);
        CHECK(std::abs(r.rho - std::complex<double>{1.0, 0.0}) < 1e-12);
        CHECK(mean_power(r.distortion.samples) < 1e-24);
    }

    SUBCASE("pure gain") {
        TimeSignal out = in;
        for (auto& x : out.samples) x *= 0.5;
        BussgangResult r = bussgang_decompose(in, out);
        CHECK(std::abs(r.rho - std::complex<double>{0.5, 0.0}) < 1e-12);
        CHECK(mean_power(r.distortion.samples) < 1e-24);
    }

    SUBCASE("Rapp IBO=2dB: |rho|<1 and distortion orthogonal to input") {
        HpaModel hpa{HpaKind::Rapp, 2.0, 3.0, {1.0, 0.0}};
        TimeSignal out = hpa_apply(in, hpa);
        BussgangResult r = bussgang_decompose(in, out);
        CHECK(std::abs(r.rho) < 1.0);
        CHECK(std::abs(r.rho) > 0.5);
        std::complex<double> cross{0.0, 0.0};
        double pd = 0.0, pi = 0.0;
        for (std::size_t i = 0; i < in.samples.size(); ++i) {
            cross += r.distortion.samples[i] * std::conj(in.samples[i]);
            pd += std::norm(r.distortion.samples[i]);
            pi += std::norm(in.samples[i]);
        }
        CHECK(std::abs(cross) / (std::sqrt(pd) * std::sqrt(pi)) < 1e-10);
        // Exact reconstruction: output/rho = input + distortion.
        for (std::size_t i = 0; i < 100; ++i) {
            std::complex<double> lhs = out.samples[i] / r.rho;
            std::complex<double> rhs = in.samples[i] + r.distortion.samples[i];
            CHECK(std::abs(lhs - rhs) < 1e-12);
        }
    }

    SUBCASE("zero input power is rejected") {
        TimeSignal z;
        z.samples.assign(16, {0.0, 0.0});
        CHECK_THROWS_AS(bussgang_decompose(z, z), std::invalid_argument);
    }
}
