#pragma once

#include <vector>

#include "xaichest/phy.hpp"

namespace xaichest {

using ChannelEstimate = CVec;

struct StaParams {
    double alpha = 2.0;  // time-averaging coefficient, >= 1
    int beta = 2;        // frequency window half-width, >= 0
    // When set, run_conventional threads a raw DPA track into the next DPA
    // step instead of the smoothed STA output.
    bool separate_dpa_track = false;
};

enum class EstimatorKind { Dpa, Sta, Trfi };

// Element-wise average over preambles of rx/known.
ChannelEstimate ls_preamble(const std::vector<CVec>& rx_preambles, const CVec& known);

struct DpaResult {
    ChannelEstimate h;  // y / d
    CVec decided;       // demapped data, known pilots
};

// Data-pilot-aided update: equalize by the previous estimate, decide, and
// re-estimate. Pilot subcarriers use their known values.
DpaResult dpa_step(const CVec& y, const ChannelEstimate& h_prev,
                   const ModulationScheme& scheme, const FrameSpec& spec);

// Frequency averaging (truncated/renormalized equal window of half-width
// beta) followed by time averaging with coefficient alpha.
ChannelEstimate sta_smooth(const ChannelEstimate& h_dpa, const ChannelEstimate& h_sta_prev,
                           const StaParams& params);

ChannelEstimate sta_estimate(const CVec& y, const ChannelEstimate& h_sta_prev,
                             const StaParams& params, const ModulationScheme& scheme,
                             const FrameSpec& spec);

// Reliable iff equalizing the previous received symbol by the candidate and
// by the previous estimate decides the same constellation point. Pilots are
// always reliable; non-finite ratios are unreliable.
std::vector<bool> trfi_reliable_set(const CVec& y_prev, const ChannelEstimate& h_candidate,
                                    const ChannelEstimate& h_prev,
                                    const ModulationScheme& scheme, const FrameSpec& spec);

struct TrfiResult {
    ChannelEstimate h;
    bool fallback = false;  // fewer than 4 reliable subcarriers: DPA output kept
};

TrfiResult trfi_estimate(const CVec& y, const CVec& y_prev, const ChannelEstimate& h_prev,
                         const ModulationScheme& scheme, const FrameSpec& spec);

// Not-a-knot cubic spline through (xs, ys), evaluated at eval_xs. With exactly
// four knots this is the unique interpolating cubic. Points outside the knot
// range extrapolate with the end polynomial.
CVec cubic_interp_not_a_knot(const std::vector<double>& xs, const CVec& ys,
                             const std::vector<double>& eval_xs);

// Runs the chosen estimator across a frame, threading state from the LS
// preamble estimate. last_rx_preamble seeds the TRFI reliability test.
std::vector<ChannelEstimate> run_conventional(const std::vector<CVec>& rx_symbols,
                                              const ChannelEstimate& preamble_estimate,
                                              const CVec& last_rx_preamble,
                                              EstimatorKind kind, const StaParams& params,
                                              const ModulationScheme& scheme,
                                              const FrameSpec& spec);

}  // namespace xaichest
