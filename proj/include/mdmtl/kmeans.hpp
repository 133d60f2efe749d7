#pragma once

#include <mdmtl/core.hpp>
#include <mdmtl/random.hpp>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace mdmtl {

struct KMeansResult {
    std::vector<int> labels;  // canonical: first-occurrence order
    double sse = 0.0;
};

namespace detail {

/// Relabels so that cluster ids appear in order of first occurrence.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
    std::vector<int> map;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        if (l >= static_cast<int>(map.size())) map.resize(static_cast<std::size_t>(l) + 1, -1);
        if (map[static_cast<std::size_t>(l)] < 0) {
            map[static_cast<std::size_t>(l)] =
                static_cast<int>(std::count_if(map.begin(), map.end(), [](int m) { return m >= 0; }));
        }
        out[i] = map[static_cast<std::size_t>(l)];
    }
    return out;
}

template <typename Scalar>
KMeansResult lloyd(const Mat<Scalar>& points, Mat<Scalar> centers, int max_iters) {
    const auto n = points.rows();
    const auto k = centers.rows();
    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    double sse = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        bool changed = false;
        sse = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (Eigen::Index c = 0; c < k; ++c) {
                const double d = static_cast<double>((points.row(i) - centers.row(c)).squaredNorm());
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            sse += best_d;
            if (labels[static_cast<std::size_t>(i)] != best) {
                labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed && it > 0) break;
        Mat<Scalar> sums = Mat<Scalar>::Zero(k, points.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
            ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / Scalar(counts[static_cast<std::size_t>(c)]);
                continue;
            }
            // Empty cluster: move it onto the point farthest from its center.
            Eigen::Index far = 0;
            double far_d = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double d = static_cast<double>(
                    (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm());
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            centers.row(c) = points.row(far);
        }
    }
    return {std::move(labels), sse};
}

template <typename Scalar>
Mat<Scalar> kmeanspp_init(const Mat<Scalar>& points, Eigen::Index k, std::mt19937_64& rng) {
    const auto n = points.rows();
    Mat<Scalar> centers(k, points.cols());
    centers.row(0) = points.row(static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    for (Eigen::Index c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = static_cast<double>((points.row(i) - centers.row(c - 1)).squaredNorm());
            d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], d);
            total += d2[static_cast<std::size_t>(i)];
        }
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            double u = unit_uniform(rng) * total;
            for (Eigen::Index i = 0; i < n; ++i) {
                u -= d2[static_cast<std::size_t>(i)];
                if (u < 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(n)));
        }
        centers.row(c) = points.row(pick);
    }
    return centers;
}

}  // namespace detail

/// Seeded k-means with k-means++ seeding; keeps the lowest-SSE restart.
/// Rows of `points` are observations.
template <typename Scalar>
KMeansResult kmeans(const Mat<Scalar>& points, int k, std::uint64_t seed, int restarts = 50,
                    int max_iters = 300) {
    detail::require(k >= 1 && k <= points.rows(), "kmeans: k must lie in [1, n]");
    detail::require(restarts >= 1, "kmeans: restarts must be >= 1");
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.sse = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        auto centers = detail::kmeanspp_init(points, k, rng);
        auto res = detail::lloyd(points, std::move(centers), max_iters);
        if (res.sse < best.sse) best = std::move(res);
    }
    best.labels = detail::canonical_labels(best.labels);
    return best;
}

}  // namespace mdmtl
