#pragma once

#include <cmath>
#include <vector>

#include "geoflow/errors.hpp"

namespace geoflow {

/// Result of a log-linear fit d(t) ~ K * d(t0) * exp(-lambda * (t - t0)).
template <typename Scalar>
struct DecayFit {
    Scalar K = Scalar(0);
    Scalar lambda = Scalar(0);
    Scalar residual = Scalar(0);  // RMS of the log-linear fit
    Scalar window_lo = Scalar(0);
    Scalar window_hi = Scalar(0);
};

/// Least-squares exponential-rate fit of a positive series. The leading
/// window_frac fraction is discarded as transient; the window is truncated at
/// the first sample below 1e-12 (numerical zero).
template <typename Scalar>
DecayFit<Scalar> fit_decay(const std::vector<Scalar>& times, const std::vector<Scalar>& values,
                           Scalar window_frac = Scalar(0.2)) {
    if (times.size() != values.size() || times.empty())
        throw WindowTooSmall("fit_decay: empty or mismatched series");
    const std::size_t n = times.size();
    std::size_t begin = static_cast<std::size_t>(std::floor(window_frac * n));
    if (begin >= n) throw WindowTooSmall("fit_decay: window fraction leaves no samples");
    if (values[begin] <= Scalar(0)) throw NonPositiveSample("fit_decay: window starts at a non-positive sample");
    std::size_t end = n;
    for (std::size_t i = begin; i < n; ++i) {
        if (values[i] < Scalar(1e-12)) {
            end = i;
            break;
        }
    }
    if (end - begin < 10) throw WindowTooSmall("fit_decay: fewer than 10 usable samples");

    const Scalar t0 = times.front();
    Scalar mx = 0, my = 0;
    for (std::size_t i = begin; i < end; ++i) {
        mx += times[i] - t0;
        my += std::log(values[i]);
    }
    const Scalar cnt = Scalar(end - begin);
    mx /= cnt;
    my /= cnt;
    Scalar sxx = 0, sxy = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const Scalar dx = (times[i] - t0) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(values[i]) - my);
    }
    if (sxx <= Scalar(0)) throw WindowTooSmall("fit_decay: degenerate time window");
    const Scalar slope = sxy / sxx;
    const Scalar intercept = my - slope * mx;

    DecayFit<Scalar> fit;
    fit.lambda = -slope;
    fit.K = std::exp(intercept) / values.front();
    Scalar ss = 0;
    for (std::size_t i = begin; i < end; ++i) {
        const Scalar r = std::log(values[i]) - (intercept + slope * (times[i] - t0));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / cnt);
    fit.window_lo = times[begin];
    fit.window_hi = times[end - 1];
    return fit;
}

}  // namespace geoflow
