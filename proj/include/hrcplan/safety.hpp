#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "hrcplan/core.hpp"

namespace hrcplan {

/// Piecewise-constant speed scaling over human-robot distance bands.
///
/// Band i covers [d_{i-1}, d_i) with d_0 = 0 and d_K = +inf, so a distance
/// exactly on a threshold belongs to the band above it.
class StaircaseSafety {
public:
    StaircaseSafety(std::vector<double> thresholds, std::vector<double> values)
        : thresholds_(std::move(thresholds)), values_(std::move(values)) {
        if (values_.size() != thresholds_.size() + 1) throw Error("safety: need len(values) = len(thresholds) + 1");
        for (std::size_t i = 0; i < thresholds_.size(); ++i) {
            if (!(thresholds_[i] > 0.0)) throw Error("safety: thresholds must be > 0");
            if (i > 0 && !(thresholds_[i] > thresholds_[i - 1])) throw Error("safety: thresholds must increase");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) throw Error("safety: values must lie in [0,1]");
            if (i > 0 && !(values_[i] > values_[i - 1])) throw Error("safety: values must strictly increase");
        }
    }

    explicit StaircaseSafety(const SafetyDescription& d) : StaircaseSafety(d.thresholds, d.values) {}

    /// K evenly spaced thresholds ending at `last_threshold` and evenly spaced values 0..1.
    static StaircaseSafety evenly_spaced(int k, double last_threshold) {
        if (k < 2) throw Error("safety: evenly_spaced needs K >= 2");
        std::vector<double> t, v;
        for (int i = 1; i < k; ++i) t.push_back(last_threshold * i / (k - 1));
        for (int i = 0; i < k; ++i) v.push_back(static_cast<double>(i) / (k - 1));
        return {t, v};
    }

    std::size_t steps() const { return values_.size(); }
    const std::vector<double>& thresholds() const { return thresholds_; }
    const std::vector<double>& values() const { return values_; }

    SafetyDescription description() const { return {thresholds_, values_}; }

    /// Band index (0-based) for a distance.
    std::size_t band(double d) const {
        // upper_bound: first threshold strictly greater than d.
        std::size_t lo = 0, hi = thresholds_.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (thresholds_[mid] <= d)
                lo = mid + 1;
            else
                hi = mid;
        }
        return lo;
    }

    double at_distance(double d) const { return values_[band(d)]; }

    double operator()(Vec3 robot, Vec3 human) const { return at_distance(distance(robot, human)); }

private:
    std::vector<double> thresholds_;
    std::vector<double> values_;
};

inline double eval_scaling(const StaircaseSafety& safety, Vec3 robot, Vec3 human) { return safety(robot, human); }

/// Scaling samples at a uniform period.
struct ScalingTrace {
    double t0 = 0.0;
    double period = 0.1;
    std::vector<double> s;

    double time(std::size_t i) const { return t0 + period * static_cast<double>(i); }
};

namespace detail {

inline std::size_t window_start(const ScalingTrace& trace, double t_bar, std::size_t n) {
    if (!(trace.period > 0.0)) throw Error("trace period must be > 0");
    const double pos = (t_bar - trace.t0) / trace.period;
    const double idx = std::round(pos);
    if (idx < 0 || std::abs(pos - idx) > 1e-6) throw Error("window start is not a trace sample");
    const auto first = static_cast<std::size_t>(idx);
    if (first + n >= trace.s.size()) throw Error("insufficient trace");
    return first;
}

}  // namespace detail

/// Mean of the n+1 samples starting at t_bar.
inline double window_average(const ScalingTrace& trace, double t_bar, std::size_t n) {
    const std::size_t first = detail::window_start(trace, t_bar, n);
    double sum = 0.0;
    for (std::size_t i = 0; i <= n; ++i) sum += trace.s[first + i];
    return sum / static_cast<double>(n + 1);
}

/// Fraction of the window's n+1 samples spent on each plateau.
inline std::vector<double> alpha_decompose(const ScalingTrace& trace, const StaircaseSafety& safety, double t_bar,
                                           std::size_t n) {
    const std::size_t first = detail::window_start(trace, t_bar, n);
    const auto& values = safety.values();
    std::vector<std::size_t> counts(values.size(), 0);
    for (std::size_t i = 0; i <= n; ++i) {
        const double s = trace.s[first + i];
        std::size_t match = values.size();
        for (std::size_t k = 0; k < values.size(); ++k)
            if (std::abs(values[k] - s) <= 1e-9) {
                match = k;
                break;
            }
        if (match == values.size()) throw Error("off-staircase sample");
        ++counts[match];
    }
    std::vector<double> alpha(values.size());
    for (std::size_t k = 0; k < values.size(); ++k)
        alpha[k] = static_cast<double>(counts[k]) / static_cast<double>(n + 1);
    return alpha;
}

}  // namespace hrcplan
