#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "xaichest/eval.hpp"
#include "xaichest/rng.hpp"

using namespace xaichest;

namespace {

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

LinkConfig base_config() {
    LinkConfig cfg;
    cfg.frame = ieee80211p_frame_spec();
    cfg.scheme = make_modulation(Modulation::Qpsk);
    cfg.profile = make_profile(ProfileKind::VtvSdww, 1000.0);
    cfg.estimator = EstimatorKind::Sta;
    cfg.n_frames = 20;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("genie link is error free without noise") {
    LinkConfig cfg = base_config();
    cfg.genie = true;
    cfg.n_frames = 5;
    LinkStats s = run_link(cfg, std::numeric_limits<double>::infinity());
    CHECK(s.bit_errors == 0);
    CHECK(s.total_bits == 5ull * 50 * 48 * 2);
    CHECK(s.mse_channel < 1e-20);
}

TEST_CASE("binomial accounting matches the frame formula") {
    LinkConfig cfg = base_config();
    cfg.n_frames = 7;
    LinkStats s = run_link(cfg, 10.0);
    CHECK(s.total_bits ==
          static_cast<std::uint64_t>(7) * cfg.frame.n_symbols * cfg.frame.k_data *
              cfg.scheme.bits_per_symbol);
    CHECK(s.frames_excluded == 0);
}

TEST_CASE("run_link is deterministic under a fixed seed") {
    LinkConfig cfg = base_config();
    cfg.n_frames = 10;
    LinkStats a = run_link(cfg, 15.0);
    LinkStats b = run_link(cfg, 15.0);
    CHECK(a.bit_errors == b.bit_errors);
    CHECK(a.mse_channel == b.mse_channel);
    cfg.seed = 12;
    LinkStats c = run_link(cfg, 15.0);
    CHECK(a.bit_errors != c.bit_errors);
}

TEST_CASE("genie QPSK over the identity channel matches the AWGN closed form") {
    // Per-subcarrier SNR exceeds the time-domain SNR definition by K/K_on
    // because the null guards carry no signal power.
    LinkConfig cfg = base_config();
    cfg.awgn_only = true;
    cfg.genie = true;
    cfg.n_frames = 50;  // 240k bits; the acceptance suite runs >= 1e6
    cfg.seed = 21;
    for (double snr_db : {4.0, 8.0}) {
        LinkStats s = run_link(cfg, snr_db);
        double snr_sub = std::pow(10.0, snr_db / 10.0) * 64.0 / 52.0;
        double p = q_function(std::sqrt(snr_sub));
        double n = static_cast<double>(s.total_bits);
        double sigma = std::sqrt(p * (1.0 - p) / n);
        CHECK(std::abs(s.ber() - p) < 4.0 * sigma);
    }
}

TEST_CASE("genie BER is non-increasing in SNR within confidence bounds") {
    LinkConfig cfg = base_config();
    cfg.awgn_only = true;
    cfg.genie = true;
    cfg.n_frames = 20;
    BerCurve curve = ber_curve(cfg, {2.0, 4.0, 6.0, 8.0}, 2);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        double n = static_cast<double>(curve.points[i].total_bits);
        double p = curve.points[i - 1].ber;
        double slack = 4.0 * std::sqrt(std::max(p, 1e-9) * (1 - p) / n);
        CHECK(curve.points[i].ber <= p + slack);
    }
}

TEST_CASE("ber_curve") {
    LinkConfig cfg = base_config();
    cfg.n_frames = 5;

    SUBCASE("one point reduces to run_link") {
        BerCurve curve = ber_curve(cfg, {12.0});
        LinkStats direct = run_link(cfg, 12.0);
        REQUIRE(curve.points.size() == 1);
        CHECK(curve.points[0].bit_errors == direct.bit_errors);
        CHECK(curve.points[0].total_bits == direct.total_bits);
    }

    SUBCASE("grid size and worker independence") {
        std::vector<double> grid;
        for (int s = 0; s <= 40; s += 5) grid.push_back(s);
        BerCurve seq = ber_curve(cfg, grid, 1);
        BerCurve par = ber_curve(cfg, grid, 2);
        REQUIRE(seq.points.size() == 9);
        for (std::size_t i = 0; i < 9; ++i) {
            CHECK(seq.points[i].bit_errors == par.points[i].bit_errors);
            CHECK(seq.points[i].mse_channel == par.points[i].mse_channel);
        }
    }
}

TEST_CASE("count_flops") {
    SUBCASE("single layer closed form") {
        FlopsReport r = count_flops({7, 3});
        CHECK(r.total == 2 * 7 * 3 + 3);
        CHECK(r.layers.size() == 1);
        CHECK(r.total_activations == 3);
    }

    SUBCASE("stock architecture near the published figure") {
        FlopsReport r = count_flops({104, 15, 15, 15, 104});
        CHECK(r.total == 7289);
        CHECK(std::abs(r.total - 7520.0) / 7520.0 < 0.10);
    }

    SUBCASE("reduced architecture near the published figure") {
        FlopsReport r = count_flops({8, 10, 104});
        CHECK(r.total == 2354);
        CHECK(std::abs(r.total - 2480.0) / 2480.0 < 0.10);
    }

    SUBCASE("needs two dims") {
        CHECK_THROWS_AS(count_flops({5}), std::invalid_argument);
    }
}

TEST_CASE("noise weight histogram") {
    std::vector<int> pilots = {5, 19, 32, 46};

    SUBCASE("constant masks occupy a single bin") {
        std::vector<std::vector<double>> masks(3, std::vector<double>(52, 0.5));
        Histogram h = noise_weight_histogram(masks, 10, pilots);
        long long data_total = 0, pilot_total = 0;
        for (int b = 0; b < 10; ++b) {
            data_total += h.count_data[b];
            pilot_total += h.count_pilot[b];
            if (b != 5) {
                CHECK(h.count_data[b] == 0);
                CHECK(h.count_pilot[b] == 0);
            }
        }
        CHECK(h.count_data[5] == 3 * 48);
        CHECK(h.count_pilot[5] == 3 * 4);
        CHECK(data_total + pilot_total == 3 * 52);
    }

    SUBCASE("counts sum to n_masks * k_on and ones land in the last bin") {
        std::vector<std::vector<double>> masks(2, std::vector<double>(52, 1.0));
        Histogram h = noise_weight_histogram(masks, 7, pilots);
        CHECK(h.count_data[6] + h.count_pilot[6] == 2 * 52);
    }

    SUBCASE("uniform synthetic weights pass a chi-squared check") {
        Rng rng(61);
        std::vector<std::vector<double>> masks(200, std::vector<double>(52));
        for (auto& m : masks) {
            for (auto& v : m) v = rng.uniform();
        }
        Histogram h = noise_weight_histogram(masks, 10, pilots);
        double n = 200.0 * 52.0;
        double expect = n / 10.0;
        double chi2 = 0.0;
        for (int b = 0; b < 10; ++b) {
            double got = static_cast<double>(h.count_data[b] + h.count_pilot[b]);
            chi2 += (got - expect) * (got - expect) / expect;
        }
        CHECK(chi2 < 21.67);  // chi-squared critical value, 9 dof, alpha=0.01
    }

    SUBCASE("needs at least two bins") {
        CHECK_THROWS_AS(noise_weight_histogram({}, 1, pilots), std::invalid_argument);
    }
}

TEST_CASE("model-in-the-loop link accepts reduced inputs") {
    // A pilots-only identity-ish model wired into the link: mechanics only,
    // quality is covered by the xai/acceptance suites.
    LinkConfig cfg = base_config();
    cfg.n_frames = 3;
    std::vector<int> pilots = cfg.frame.pilot_indices;
    Mlp m = make_mlp({8, 6, 104}, OutputActivation::Identity, 5);
    cfg.model = &m;
    cfg.relevant = pilots;
    LinkStats s = run_link(cfg, 30.0);
    CHECK(s.total_bits == 3ull * 50 * 48 * 2);
}
