#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mindkit/common.hpp"
#include "mindkit/session.hpp"

namespace mindkit {

struct DriftFit {
    double intercept_mv = 0.0;
    double slope_mv_per_s = 0.0;
    double r_squared = 0.0;
};

// Median of a sequence; even lengths take the lower of the two middle values,
// so subtraction never introduces voltages absent from the data.
inline double lower_median(std::vector<double> v) {
    if (v.empty()) throw Error("median of empty sequence");
    const std::size_t mid = (v.size() - 1) / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

inline std::vector<double> channel_medians(const Trace& trace) {
    std::vector<double> meds;
    meds.reserve(trace.n_channels());
    for (const auto& ch : trace.volts) meds.push_back(lower_median(ch));
    return meds;
}

// Subtract the per-channel median.
inline Trace center_median(const Trace& trace) {
    if (trace.n_samples() == 0) throw Error("center_median: empty trace");
    Trace out = trace;
    for (auto& ch : out.volts) {
        const double med = lower_median(ch);
        for (double& v : ch) v -= med;
    }
    return out;
}

// Centered moving average; edge windows truncate symmetrically so the filter
// stays centered and constant signals are fixed points.
inline Trace smooth_moving_mean(const Trace& trace, std::size_t window_samples) {
    const std::size_t n = trace.n_samples();
    if (window_samples == 0 || window_samples % 2 == 0)
        throw Error("smooth_moving_mean: window must be an odd positive integer");
    if (window_samples > n) throw Error("smooth_moving_mean: window exceeds trace length");
    Trace out = trace;
    const std::size_t half = window_samples / 2;
    std::vector<double> prefix(n + 1);
    for (std::size_t c = 0; c < trace.n_channels(); ++c) {
        const auto& src = trace.volts[c];
        prefix[0] = 0.0;
        for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + src[i];
        auto& dst = out.volts[c];
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t m = std::min({half, i, n - 1 - i});
            dst[i] = (prefix[i + m + 1] - prefix[i - m]) / static_cast<double>(2 * m + 1);
        }
    }
    return out;
}

// Ordinary least-squares line per channel over [t_lo, t_hi] (trace times).
// r_squared = 1 - SS_res/SS_tot, defined as 0 when SS_tot == 0.
inline std::vector<DriftFit> fit_linear_drift(const Trace& trace, double t_lo, double t_hi) {
    const std::size_t i0 = trace.index_at_or_after(t_lo);
    std::size_t i1 = trace.index_at_or_after(t_hi);
    if (i1 < trace.n_samples() && trace.time_at(i1) <= t_hi + 1e-9) ++i1;
    if (i1 <= i0 + 1) throw Error("fit_linear_drift: window holds fewer than 2 samples");
    const std::size_t n = i1 - i0;

    // Center times for conditioning; recover the raw intercept afterward.
    double t_mean = 0.0;
    for (std::size_t i = i0; i < i1; ++i) t_mean += trace.time_at(i);
    t_mean /= static_cast<double>(n);
    double sxx = 0.0;
    for (std::size_t i = i0; i < i1; ++i) {
        const double dt = trace.time_at(i) - t_mean;
        sxx += dt * dt;
    }
    if (sxx <= 0.0) throw Error("fit_linear_drift: degenerate window (all timestamps equal)");

    std::vector<DriftFit> fits;
    fits.reserve(trace.n_channels());
    for (std::size_t c = 0; c < trace.n_channels(); ++c) {
        const auto& v = trace.volts[c];
        double y_mean = 0.0;
        for (std::size_t i = i0; i < i1; ++i) y_mean += v[i];
        y_mean /= static_cast<double>(n);
        double sxy = 0.0, syy = 0.0;
        for (std::size_t i = i0; i < i1; ++i) {
            const double dt = trace.time_at(i) - t_mean;
            const double dy = v[i] - y_mean;
            sxy += dt * dy;
            syy += dy * dy;
        }
        DriftFit fit;
        fit.slope_mv_per_s = sxy / sxx;
        fit.intercept_mv = y_mean - fit.slope_mv_per_s * t_mean;
        double ss_res = 0.0;
        for (std::size_t i = i0; i < i1; ++i) {
            const double r = v[i] - (fit.intercept_mv + fit.slope_mv_per_s * trace.time_at(i));
            ss_res += r * r;
        }
        fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 0.0;
        fits.push_back(fit);
    }
    return fits;
}

inline std::vector<DriftFit> fit_linear_drift(const Trace& trace) {
    return fit_linear_drift(trace, trace.t0_s, trace.end_time_s());
}

// Per-channel standard deviation over a time window; used as the noise
// reference for onset detection and SNR.
inline std::vector<double> baseline_sigma(const Trace& trace, double t_lo, double t_hi) {
    const std::size_t i0 = trace.index_at_or_after(t_lo);
    std::size_t i1 = trace.index_at_or_after(t_hi);
    if (i1 < trace.n_samples() && trace.time_at(i1) <= t_hi + 1e-9) ++i1;
    if (i1 <= i0 + 1) throw Error("baseline_sigma: window holds fewer than 2 samples");
    std::vector<double> sigmas;
    sigmas.reserve(trace.n_channels());
    const double n = static_cast<double>(i1 - i0);
    for (const auto& v : trace.volts) {
        double mean = 0.0;
        for (std::size_t i = i0; i < i1; ++i) mean += v[i];
        mean /= n;
        double ss = 0.0;
        for (std::size_t i = i0; i < i1; ++i) {
            const double d = v[i] - mean;
            ss += d * d;
        }
        sigmas.push_back(std::sqrt(ss / (n - 1.0)));
    }
    return sigmas;
}

}  // namespace mindkit
