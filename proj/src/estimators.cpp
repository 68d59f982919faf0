#include "xaichest/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xaichest {

ChannelEstimate ls_preamble(const std::vector<CVec>& rx_preambles, const CVec& known) {
    if (rx_preambles.empty()) {
        throw std::invalid_argument("ls_preamble: no preambles");
    }
    for (const auto& v : known) {
        if (std::norm(v) == 0.0) {
            throw std::invalid_argument("ls_preamble: zero known preamble value");
        }
    }
    ChannelEstimate est(known.size(), {0.0, 0.0});
    for (const auto& rx : rx_preambles) {
        if (rx.size() != known.size()) {
            throw std::invalid_argument("ls_preamble: preamble length mismatch");
        }
        for (std::size_t k = 0; k < known.size(); ++k) {
            est[k] += rx[k] / known[k];
        }
    }
    double inv = 1.0 / static_cast<double>(rx_preambles.size());
    for (auto& v : est) v *= inv;
    return est;
}

DpaResult dpa_step(const CVec& y, const ChannelEstimate& h_prev,
                   const ModulationScheme& scheme, const FrameSpec& spec) {
    if (static_cast<int>(y.size()) != spec.k_on || h_prev.size() != y.size()) {
        throw std::invalid_argument("dpa_step: length mismatch");
    }
    DpaResult r;
    r.decided.resize(spec.k_on);
    r.h.resize(spec.k_on);
    for (int p = 0; p < spec.k_pilot; ++p) {
        r.decided[spec.pilot_indices[p]] = spec.pilot_values[p];
    }
    for (int d = 0; d < spec.k_data; ++d) {
        int k = spec.data_indices[d];
        if (std::norm(h_prev[k]) == 0.0) {
            throw std::invalid_argument("dpa_step: zero element in previous estimate");
        }
        std::complex<double> eq = y[k] / h_prev[k];
        r.decided[k] = scheme.points[nearest_point(eq, scheme)];
    }
    for (int k = 0; k < spec.k_on; ++k) {
        r.h[k] = y[k] / r.decided[k];
    }
    return r;
}

ChannelEstimate sta_smooth(const ChannelEstimate& h_dpa, const ChannelEstimate& h_sta_prev,
                           const StaParams& params) {
    if (params.alpha < 1.0 || params.beta < 0) {
        throw std::invalid_argument("sta_smooth: invalid averaging parameters");
    }
    int n = static_cast<int>(h_dpa.size());
    ChannelEstimate out(n);
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        int count = 0;
        for (int lam = -params.beta; lam <= params.beta; ++lam) {
            int kk = k + lam;
            if (kk < 0 || kk >= n) continue;
            acc += h_dpa[kk];
            ++count;
        }
        std::complex<double> h_fd = acc / static_cast<double>(count);
        out[k] = (1.0 - 1.0 / params.alpha) * h_sta_prev[k] + (1.0 / params.alpha) * h_fd;
    }
    return out;
}

ChannelEstimate sta_estimate(const CVec& y, const ChannelEstimate& h_sta_prev,
                             const StaParams& params, const ModulationScheme& scheme,
                             const FrameSpec& spec) {
    DpaResult dpa = dpa_step(y, h_sta_prev, scheme, spec);
    return sta_smooth(dpa.h, h_sta_prev, params);
}

std::vector<bool> trfi_reliable_set(const CVec& y_prev, const ChannelEstimate& h_candidate,
                                    const ChannelEstimate& h_prev,
                                    const ModulationScheme& scheme, const FrameSpec& spec) {
    std::vector<bool> reliable(spec.k_on, false);
    for (int p = 0; p < spec.k_pilot; ++p) {
        reliable[spec.pilot_indices[p]] = true;
    }
    auto finite = [](std::complex<double> v) {
        return std::isfinite(v.real()) && std::isfinite(v.imag());
    };
    for (int d = 0; d < spec.k_data; ++d) {
        int k = spec.data_indices[d];
        if (std::norm(h_candidate[k]) == 0.0 || std::norm(h_prev[k]) == 0.0) continue;
        std::complex<double> eq_cand = y_prev[k] / h_candidate[k];
        std::complex<double> eq_prev = y_prev[k] / h_prev[k];
        if (!finite(eq_cand) || !finite(eq_prev)) continue;
        reliable[k] = nearest_point(eq_cand, scheme) == nearest_point(eq_prev, scheme);
    }
    return reliable;
}

namespace {

// Dense complex linear solve with partial pivoting; the systems here are at
// most k_on x k_on.
CVec solve_dense(std::vector<std::complex<double>> a, CVec b, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(a[col * n + col]);
        for (int r = col + 1; r < n; ++r) {
            double m = std::abs(a[r * n + col]);
            if (m > best) {
                best = m;
                piv = r;
            }
        }
        if (best == 0.0) {
            throw std::runtime_error("singular interpolation system");
        }
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        for (int r = col + 1; r < n; ++r) {
            std::complex<double> f = a[r * n + col] / a[col * n + col];
            if (f == std::complex<double>{0.0, 0.0}) continue;
            for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    CVec x(n);
    for (int r = n - 1; r >= 0; --r) {
        std::complex<double> acc = b[r];
        for (int c = r + 1; c < n; ++c) acc -= a[r * n + c] * x[c];
        x[r] = acc / a[r * n + r];
    }
    return x;
}

}  // namespace

CVec cubic_interp_not_a_knot(const std::vector<double>& xs, const CVec& ys,
                             const std::vector<double>& eval_xs) {
    int n = static_cast<int>(xs.size());
    if (n < 4 || ys.size() != xs.size()) {
        throw std::invalid_argument("cubic_interp_not_a_knot: need >= 4 knots");
    }
    for (int i = 1; i < n; ++i) {
        if (!(xs[i] > xs[i - 1])) {
            throw std::invalid_argument("cubic_interp_not_a_knot: knots must increase");
        }
    }
    std::vector<double> h(n - 1);
    for (int i = 0; i + 1 < n; ++i) h[i] = xs[i + 1] - xs[i];

    // Solve for the second derivatives M_i. Rows 1..n-2 are the standard
    // continuity equations; the end rows impose third-derivative continuity
    // at the second and penultimate knots (not-a-knot).
    std::vector<std::complex<double>> a(static_cast<std::size_t>(n) * n, {0.0, 0.0});
    CVec rhs(n, {0.0, 0.0});
    a[0 * n + 0] = 1.0 / h[0];
    a[0 * n + 1] = -(1.0 / h[0] + 1.0 / h[1]);
    a[0 * n + 2] = 1.0 / h[1];
    for (int i = 1; i <= n - 2; ++i) {
        a[i * n + i - 1] = h[i - 1];
        a[i * n + i] = 2.0 * (h[i - 1] + h[i]);
        a[i * n + i + 1] = h[i];
        rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
    }
    a[(n - 1) * n + n - 3] = 1.0 / h[n - 3];
    a[(n - 1) * n + n - 2] = -(1.0 / h[n - 3] + 1.0 / h[n - 2]);
    a[(n - 1) * n + n - 1] = 1.0 / h[n - 2];
    CVec m = solve_dense(std::move(a), std::move(rhs), n);

    CVec out(eval_xs.size());
    for (std::size_t e = 0; e < eval_xs.size(); ++e) {
        double x = eval_xs[e];
        int seg = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
        seg = std::clamp(seg, 0, n - 2);
        double dx = x - xs[seg];
        double hs = h[seg];
        std::complex<double> c0 = ys[seg];
        std::complex<double> c1 = (ys[seg + 1] - ys[seg]) / hs - hs * (2.0 * m[seg] + m[seg + 1]) / 6.0;
        std::complex<double> c2 = m[seg] / 2.0;
        std::complex<double> c3 = (m[seg + 1] - m[seg]) / (6.0 * hs);
        out[e] = c0 + dx * (c1 + dx * (c2 + dx * c3));
    }
    return out;
}

TrfiResult trfi_estimate(const CVec& y, const CVec& y_prev, const ChannelEstimate& h_prev,
                         const ModulationScheme& scheme, const FrameSpec& spec) {
    DpaResult dpa = dpa_step(y, h_prev, scheme, spec);
    std::vector<bool> reliable = trfi_reliable_set(y_prev, dpa.h, h_prev, scheme, spec);

    std::vector<double> xs;
    CVec ys;
    for (int k = 0; k < spec.k_on; ++k) {
        if (reliable[k]) {
            xs.push_back(static_cast<double>(k));
            ys.push_back(dpa.h[k]);
        }
    }
    if (xs.size() < 4) {
        return {dpa.h, true};
    }
    std::vector<double> eval_xs;
    std::vector<int> eval_ks;
    for (int k = 0; k < spec.k_on; ++k) {
        if (!reliable[k]) {
            eval_xs.push_back(static_cast<double>(k));
            eval_ks.push_back(k);
        }
    }
    TrfiResult r{dpa.h, false};
    if (!eval_xs.empty()) {
        CVec fixed = cubic_interp_not_a_knot(xs, ys, eval_xs);
        for (std::size_t i = 0; i < eval_ks.size(); ++i) {
            r.h[eval_ks[i]] = fixed[i];
        }
    }
    return r;
}

std::vector<ChannelEstimate> run_conventional(const std::vector<CVec>& rx_symbols,
                                              const ChannelEstimate& preamble_estimate,
                                              const CVec& last_rx_preamble,
                                              EstimatorKind kind, const StaParams& params,
                                              const ModulationScheme& scheme,
                                              const FrameSpec& spec) {
    std::vector<ChannelEstimate> out;
    out.reserve(rx_symbols.size());
    ChannelEstimate h = preamble_estimate;
    ChannelEstimate h_dpa_track = preamble_estimate;
    CVec y_prev = last_rx_preamble;
    for (const auto& y : rx_symbols) {
        switch (kind) {
            case EstimatorKind::Dpa: {
                h = dpa_step(y, h, scheme, spec).h;
                break;
            }
            case EstimatorKind::Sta: {
                const ChannelEstimate& eq_source = params.separate_dpa_track ? h_dpa_track : h;
                DpaResult dpa = dpa_step(y, eq_source, scheme, spec);
                h_dpa_track = dpa.h;
                h = sta_smooth(dpa.h, h, params);
                break;
            }
            case EstimatorKind::Trfi: {
                h = trfi_estimate(y, y_prev, h, scheme, spec).h;
                break;
            }
        }
        y_prev = y;
        out.push_back(h);
    }
    return out;
}

}  // namespace xaichest
