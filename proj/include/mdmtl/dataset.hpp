#pragma once

#include <mdmtl/core.hpp>
#include <mdmtl/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mdmtl {

/// One task's design matrix (n_t x J) and outcome vector (n_t).
template <typename Scalar>
struct BasicTaskData {
    std::string label;
    Mat<Scalar> X;
    Vec<Scalar> Y;

    Eigen::Index rows() const { return X.rows(); }
};

/// Tasks sharing one feature space. Task order and feature order are
/// significant and preserved by every operation in this header.
template <typename Scalar>
struct BasicMultiTaskDataset {
    std::vector<BasicTaskData<Scalar>> tasks;
    std::vector<std::string> feature_names;

    Eigen::Index num_tasks() const { return static_cast<Eigen::Index>(tasks.size()); }
    Eigen::Index num_features() const {
        return static_cast<Eigen::Index>(feature_names.size());
    }
    Eigen::Index total_rows() const {
        Eigen::Index n = 0;
        for (const auto& t : tasks) n += t.rows();
        return n;
    }
    std::vector<std::string> task_labels() const {
        std::vector<std::string> out;
        out.reserve(tasks.size());
        for (const auto& t : tasks) out.push_back(t.label);
        return out;
    }
};

using TaskData = BasicTaskData<double>;
using MultiTaskDataset = BasicMultiTaskDataset<double>;

/// Throws if any dataset invariant is violated.
template <typename Scalar>
void validate(const BasicMultiTaskDataset<Scalar>& ds) {
    if (ds.tasks.empty()) throw DegenerateTaskError("dataset has no tasks");
    const auto J = ds.num_features();
    std::set<std::string> seen;
    for (const auto& name : ds.feature_names) {
        if (!seen.insert(name).second) throw SchemaError("duplicate feature name '" + name + "'");
    }
    for (const auto& t : ds.tasks) {
        if (t.rows() < 1) throw DegenerateTaskError("task '" + t.label + "' has no rows");
        if (t.X.cols() != J) {
            throw DimensionError("task '" + t.label + "' has " + std::to_string(t.X.cols()) +
                                 " feature columns, expected " + std::to_string(J));
        }
        if (t.Y.size() != t.X.rows()) {
            throw DimensionError("task '" + t.label + "': X has " + std::to_string(t.X.rows()) +
                                 " rows but Y has " + std::to_string(t.Y.size()));
        }
        if (!t.X.allFinite() || !t.Y.allFinite()) {
            throw InvalidArgument("task '" + t.label + "' contains non-finite values");
        }
    }
}

/// Per-feature (min, max) pairs, plus an optional outcome range.
template <typename Scalar>
struct BasicScalingParams {
    Vec<Scalar> feature_min;
    Vec<Scalar> feature_max;
    std::optional<std::pair<Scalar, Scalar>> outcome;

    Eigen::Index size() const { return feature_min.size(); }
};

using ScalingParams = BasicScalingParams<double>;

namespace detail {

template <typename Scalar>
Scalar unit_map(Scalar x, Scalar lo, Scalar hi) {
    // Constant columns collapse to 0.
    if (!(hi > lo)) return Scalar(0);
    return (x - lo) / (hi - lo);
}

template <typename Scalar>
Scalar unit_unmap(Scalar u, Scalar lo, Scalar hi) {
    if (!(hi > lo)) return lo;
    return lo + u * (hi - lo);
}

}  // namespace detail

/// Fits per-feature ranges pooled across every task.
template <typename Scalar>
BasicScalingParams<Scalar> fit_scaling(const BasicMultiTaskDataset<Scalar>& ds,
                                       bool scale_outcome = false) {
    validate(ds);
    const auto J = ds.num_features();
    BasicScalingParams<Scalar> p;
    p.feature_min = Vec<Scalar>::Constant(J, std::numeric_limits<Scalar>::infinity());
    p.feature_max = Vec<Scalar>::Constant(J, -std::numeric_limits<Scalar>::infinity());
    Scalar ylo = std::numeric_limits<Scalar>::infinity();
    Scalar yhi = -ylo;
    for (const auto& t : ds.tasks) {
        p.feature_min = p.feature_min.cwiseMin(t.X.colwise().minCoeff().transpose());
        p.feature_max = p.feature_max.cwiseMax(t.X.colwise().maxCoeff().transpose());
        ylo = std::min(ylo, t.Y.minCoeff());
        yhi = std::max(yhi, t.Y.maxCoeff());
    }
    if (scale_outcome) p.outcome = std::make_pair(ylo, yhi);
    return p;
}

/// Applies stored ranges. Values outside the fit range extrapolate linearly.
template <typename Scalar>
BasicMultiTaskDataset<Scalar> apply_scale(const BasicMultiTaskDataset<Scalar>& ds,
                                          const BasicScalingParams<Scalar>& params) {
    detail::require_dims(params.feature_max.size() == params.feature_min.size(),
                         "apply_scale: malformed scaling params");
    if (ds.num_features() != params.size()) {
        throw DimensionError("apply_scale: dataset has " + std::to_string(ds.num_features()) +
                             " features, scaling params have " + std::to_string(params.size()));
    }
    BasicMultiTaskDataset<Scalar> out = ds;
    for (auto& t : out.tasks) {
        for (Eigen::Index j = 0; j < t.X.cols(); ++j) {
            const Scalar lo = params.feature_min(j), hi = params.feature_max(j);
            t.X.col(j) = t.X.col(j).unaryExpr([=](Scalar x) { return detail::unit_map(x, lo, hi); });
        }
        if (params.outcome) {
            const auto [lo, hi] = *params.outcome;
            t.Y = t.Y.unaryExpr([=](Scalar y) { return detail::unit_map(y, lo, hi); });
        }
    }
    return out;
}

/// MinMax scaling to [0, 1]: fit on `ds`, then apply.
template <typename Scalar>
std::pair<BasicMultiTaskDataset<Scalar>, BasicScalingParams<Scalar>> minmax_scale(
    const BasicMultiTaskDataset<Scalar>& ds, bool scale_outcome = false) {
    auto params = fit_scaling(ds, scale_outcome);
    return {apply_scale(ds, params), std::move(params)};
}

/// Maps scaled outcomes (e.g. predictions) back to raw units. Identity when
/// the outcome was not scaled.
template <typename Scalar>
Vec<Scalar> invert_outcome(const Vec<Scalar>& y, const BasicScalingParams<Scalar>& params) {
    if (!params.outcome) return y;
    const auto [lo, hi] = *params.outcome;
    return y.unaryExpr([=](Scalar u) { return detail::unit_unmap(u, lo, hi); });
}

/// Inverse of apply_scale on features (and outcome, when scaled). Constant
/// columns come back as their stored value.
template <typename Scalar>
BasicMultiTaskDataset<Scalar> invert_scale(const BasicMultiTaskDataset<Scalar>& ds,
                                           const BasicScalingParams<Scalar>& params) {
    if (ds.num_features() != params.size()) throw DimensionError("invert_scale: dimension mismatch");
    BasicMultiTaskDataset<Scalar> out = ds;
    for (auto& t : out.tasks) {
        for (Eigen::Index j = 0; j < t.X.cols(); ++j) {
            const Scalar lo = params.feature_min(j), hi = params.feature_max(j);
            t.X.col(j) = t.X.col(j).unaryExpr([=](Scalar u) { return detail::unit_unmap(u, lo, hi); });
        }
        if (params.outcome) t.Y = invert_outcome(t.Y, params);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Splitting

namespace detail {

/// Fisher-Yates on 0..n-1 driven by mt19937_64 seeded with seed_seq{seed, task}.
inline std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, std::uint64_t seed,
                                                  std::uint64_t task) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(task & 0xffffffffu),
                      static_cast<std::uint32_t>(task >> 32)};
    std::mt19937_64 rng(seq);
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

template <typename Scalar>
BasicTaskData<Scalar> take_rows(const BasicTaskData<Scalar>& t,
                                const std::vector<Eigen::Index>& rows) {
    BasicTaskData<Scalar> out;
    out.label = t.label;
    out.X.resize(static_cast<Eigen::Index>(rows.size()), t.X.cols());
    out.Y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<Eigen::Index>(i)) = t.X.row(rows[i]);
        out.Y(static_cast<Eigen::Index>(i)) = t.Y(rows[i]);
    }
    return out;
}

}  // namespace detail

/// Row indices (into each task) assigned to the train side of a split.
struct SplitIndices {
    std::vector<std::vector<Eigen::Index>> train;
    std::vector<std::vector<Eigen::Index>> test;
};

/// Per-task shuffled partition; the first round(fraction * n_t) shuffled rows
/// go to train. Each side keeps at least one row per task.
template <typename Scalar>
SplitIndices split_indices(const BasicMultiTaskDataset<Scalar>& ds, double train_fraction,
                           std::uint64_t seed) {
    validate(ds);
    detail::require(train_fraction > 0.0 && train_fraction < 1.0,
                    "stratified_split: train_fraction must lie in (0, 1)");
    SplitIndices out;
    for (std::size_t t = 0; t < ds.tasks.size(); ++t) {
        const auto n = ds.tasks[t].rows();
        if (n < 2) {
            throw DegenerateTaskError("stratified_split: task '" + ds.tasks[t].label +
                                      "' has fewer than 2 rows");
        }
        auto idx = detail::shuffled_indices(n, seed, t);
        auto n_train = static_cast<Eigen::Index>(std::llround(train_fraction * static_cast<double>(n)));
        n_train = std::clamp<Eigen::Index>(n_train, 1, n - 1);
        out.train.emplace_back(idx.begin(), idx.begin() + n_train);
        out.test.emplace_back(idx.begin() + n_train, idx.end());
    }
    return out;
}

template <typename Scalar>
std::pair<BasicMultiTaskDataset<Scalar>, BasicMultiTaskDataset<Scalar>> stratified_split(
    const BasicMultiTaskDataset<Scalar>& ds, double train_fraction, std::uint64_t seed) {
    const auto split = split_indices(ds, train_fraction, seed);
    BasicMultiTaskDataset<Scalar> train, test;
    train.feature_names = test.feature_names = ds.feature_names;
    for (std::size_t t = 0; t < ds.tasks.size(); ++t) {
        train.tasks.push_back(detail::take_rows(ds.tasks[t], split.train[t]));
        test.tasks.push_back(detail::take_rows(ds.tasks[t], split.test[t]));
    }
    return {std::move(train), std::move(test)};
}

/// Reorders feature columns to `names`. Throws SchemaError naming the first
/// feature that is present on one side only.
template <typename Scalar>
BasicMultiTaskDataset<Scalar> align_features(const BasicMultiTaskDataset<Scalar>& ds,
                                             const std::vector<std::string>& names) {
    std::vector<Eigen::Index> source;
    source.reserve(names.size());
    for (const auto& name : names) {
        const auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
        if (it == ds.feature_names.end()) throw SchemaError("missing feature '" + name + "'");
        source.push_back(static_cast<Eigen::Index>(it - ds.feature_names.begin()));
    }
    for (const auto& name : ds.feature_names) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            throw SchemaError("unknown feature '" + name + "'");
        }
    }
    BasicMultiTaskDataset<Scalar> out;
    out.feature_names = names;
    for (const auto& t : ds.tasks) {
        BasicTaskData<Scalar> r;
        r.label = t.label;
        r.Y = t.Y;
        r.X.resize(t.rows(), static_cast<Eigen::Index>(names.size()));
        for (std::size_t j = 0; j < source.size(); ++j) r.X.col(static_cast<Eigen::Index>(j)) = t.X.col(source[j]);
        out.tasks.push_back(std::move(r));
    }
    return out;
}

/// All tasks stacked into one design matrix, in task order.
template <typename Scalar>
std::pair<Mat<Scalar>, Vec<Scalar>> pool_tasks(const BasicMultiTaskDataset<Scalar>& ds) {
    const auto n = ds.total_rows();
    Mat<Scalar> X(n, ds.num_features());
    Vec<Scalar> Y(n);
    Eigen::Index r = 0;
    for (const auto& t : ds.tasks) {
        X.middleRows(r, t.rows()) = t.X;
        Y.segment(r, t.rows()) = t.Y;
        r += t.rows();
    }
    return {std::move(X), std::move(Y)};
}

}  // namespace mdmtl
