#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hrcplan/core.hpp"

namespace hrcplan {

/// A 1-D clustering of sorted data: cluster c spans [starts[c], starts[c+1]).
struct Clustering1D {
    std::vector<std::size_t> starts;
    std::vector<double> centroids;

    std::size_t k() const { return centroids.size(); }
};

namespace detail {

struct PrefixSums {
    std::vector<double> s1, s2;

    explicit PrefixSums(std::span<const double> x) : s1(x.size() + 1, 0.0), s2(x.size() + 1, 0.0) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            s1[i + 1] = s1[i] + x[i];
            s2[i + 1] = s2[i] + x[i] * x[i];
        }
    }

    double sum(std::size_t a, std::size_t b) const { return s1[b] - s1[a]; }

    /// Within-cluster sum of squares of x[a..b).
    double sse(std::size_t a, std::size_t b) const {
        const double n = static_cast<double>(b - a);
        const double m = sum(a, b);
        return std::max(0.0, (s2[b] - s2[a]) - m * m / n);
    }
};

}  // namespace detail

/// Exact 1-D k-means by dynamic programming for every k in [1, k_max].
/// Input must be sorted ascending. Entry k-1 of the result holds the optimum for k clusters.
inline std::vector<Clustering1D> kmeans_1d_all(std::span<const double> sorted, std::size_t k_max) {
    const std::size_t n = sorted.size();
    if (n == 0) throw Error("kmeans: empty input");
    k_max = std::min(k_max, n);
    const detail::PrefixSums ps(sorted);
    constexpr double inf = std::numeric_limits<double>::infinity();

    // cost[k][j]: best SSE for the first j points in k+1 clusters; arg[k][j]: start of the last cluster.
    std::vector<std::vector<double>> cost(k_max, std::vector<double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> arg(k_max, std::vector<std::size_t>(n + 1, 0));
    for (std::size_t j = 1; j <= n; ++j) cost[0][j] = ps.sse(0, j);
    for (std::size_t k = 1; k < k_max; ++k) {
        for (std::size_t j = k + 1; j <= n; ++j) {
            double best = inf;
            std::size_t best_i = k;
            for (std::size_t i = k; i < j; ++i) {
                const double c = cost[k - 1][i] + ps.sse(i, j);
                if (c < best) {
                    best = c;
                    best_i = i;
                }
            }
            cost[k][j] = best;
            arg[k][j] = best_i;
        }
    }

    std::vector<Clustering1D> out;
    for (std::size_t k = 0; k < k_max; ++k) {
        Clustering1D c;
        c.starts.assign(k + 2, 0);
        c.starts[k + 1] = n;
        std::size_t j = n;
        for (std::size_t kk = k; kk > 0; --kk) {
            j = arg[kk][j];
            c.starts[kk] = j;
        }
        for (std::size_t q = 0; q <= k; ++q)
            c.centroids.push_back(ps.sum(c.starts[q], c.starts[q + 1]) /
                                  static_cast<double>(c.starts[q + 1] - c.starts[q]));
        out.push_back(std::move(c));
    }
    return out;
}

/// Mean silhouette of sorted 1-D data partitioned at `cuts` (cuts[c] = first index of cluster c+1).
///
/// In one dimension the closest other cluster by mean distance is always an
/// adjacent one, and intra-cluster distance sums follow from prefix sums, so the
/// score is exact in O(n).
inline double silhouette_1d(std::span<const double> sorted, const std::vector<std::size_t>& starts) {
    const std::size_t n = sorted.size();
    const std::size_t k = starts.size() - 1;
    if (k < 2) return 0.0;
    const detail::PrefixSums ps(sorted);
    std::vector<double> mean(k);
    for (std::size_t c = 0; c < k; ++c)
        mean[c] = ps.sum(starts[c], starts[c + 1]) / static_cast<double>(starts[c + 1] - starts[c]);

    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t a = starts[c], b = starts[c + 1];
        const std::size_t size = b - a;
        if (size == 1) continue;  // singleton clusters score 0
        for (std::size_t i = a; i < b; ++i) {
            const double x = sorted[i];
            const double left = x * static_cast<double>(i - a) - ps.sum(a, i);
            const double right = ps.sum(i + 1, b) - x * static_cast<double>(b - i - 1);
            const double intra = (left + right) / static_cast<double>(size - 1);
            double inter = std::numeric_limits<double>::infinity();
            if (c > 0) inter = std::min(inter, x - mean[c - 1]);
            if (c + 1 < k) inter = std::min(inter, mean[c + 1] - x);
            const double denom = std::max(intra, inter);
            if (denom > 0.0) total += (inter - intra) / denom;
        }
    }
    return total / static_cast<double>(n);
}

struct KEstimate {
    int k = 1;
    std::vector<double> silhouettes;  // index i holds the score for k = i + 2
    std::vector<double> plateaus;     // centroids of the chosen clustering
};

/// Number of distinct scaling plateaus, chosen by maximum silhouette over k in [2, k_max].
/// Ties go to the smaller k. Large inputs are reduced to an evenly strided
/// quantile subsample before clustering.
inline KEstimate estimate_k_detailed(std::span<const double> samples, int k_max = 20,
                                     std::size_t max_points = 2000) {
    if (samples.size() < 100) throw Error("insufficient data");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    KEstimate est;
    if (sorted.back() - sorted.front() < 1e-6) {
        est.plateaus = {sorted.front()};
        return est;
    }
    std::vector<double> sub;
    if (sorted.size() > max_points) {
        sub.reserve(max_points);
        for (std::size_t i = 0; i < max_points; ++i)
            sub.push_back(sorted[i * (sorted.size() - 1) / (max_points - 1)]);
    } else {
        sub = sorted;
    }
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < sub.size(); ++i)
        if (sub[i] != sub[i - 1]) ++distinct;

    const auto k_cap = std::min<std::size_t>(static_cast<std::size_t>(k_max), distinct);
    const auto all = kmeans_1d_all(sub, k_cap);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 2; k <= k_cap; ++k) {
        const double score = silhouette_1d(sub, all[k - 1].starts);
        est.silhouettes.push_back(score);
        if (score > best + 1e-12) {
            best = score;
            est.k = static_cast<int>(k);
            est.plateaus = all[k - 1].centroids;
        }
    }
    return est;
}

inline int estimate_k(std::span<const double> samples, int k_max = 20) { return estimate_k_detailed(samples, k_max).k; }

}  // namespace hrcplan
