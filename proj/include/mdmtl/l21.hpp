#pragma once

// L2,1-regularized multi-task least squares.
//
// Weights are a T x J matrix W whose row t is task t's coefficient vector.
// The penalty groups each feature column across tasks, so a feature is either
// kept for every task or dropped for every task.

#include <mdmtl/dataset.hpp>
#include <mdmtl/fista.hpp>

#include <optional>
#include <type_traits>

namespace mdmtl {

namespace detail {

template <typename Scalar, typename Derived>
void check_weights(const Eigen::MatrixBase<Derived>& W, const BasicMultiTaskDataset<Scalar>& ds,
                   const char* where) {
    if (W.rows() != ds.num_tasks() || W.cols() != ds.num_features()) {
        throw DimensionError(std::string(where) + ": weights are " + std::to_string(W.rows()) +
                             "x" + std::to_string(W.cols()) + ", dataset has " +
                             std::to_string(ds.num_tasks()) + " tasks and " +
                             std::to_string(ds.num_features()) + " features");
    }
}

}  // namespace detail

/// 0.5 * sum_t ||X_t w_t - Y_t||^2
template <typename Scalar>
Scalar loss(const std::type_identity_t<Mat<Scalar>>& W, const BasicMultiTaskDataset<Scalar>& ds) {
    detail::check_weights(W, ds, "loss");
    Scalar total(0);
    for (Eigen::Index t = 0; t < ds.num_tasks(); ++t) {
        const auto& task = ds.tasks[static_cast<std::size_t>(t)];
        total += (task.X * W.row(t).transpose() - task.Y).squaredNorm();
    }
    return total / Scalar(2);
}

/// Row t is (X_t^T (X_t w_t - Y_t))^T.
template <typename Scalar>
Mat<Scalar> grad_loss(const std::type_identity_t<Mat<Scalar>>& W, const BasicMultiTaskDataset<Scalar>& ds) {
    detail::check_weights(W, ds, "grad_loss");
    Mat<Scalar> G(W.rows(), W.cols());
    for (Eigen::Index t = 0; t < ds.num_tasks(); ++t) {
        const auto& task = ds.tasks[static_cast<std::size_t>(t)];
        const Vec<Scalar> r = task.X * W.row(t).transpose() - task.Y;
        G.row(t).noalias() = (task.X.transpose() * r).transpose();
    }
    return G;
}

/// Sum over feature columns of the column's Euclidean norm.
template <typename Derived>
typename Derived::Scalar l21_norm(const Eigen::MatrixBase<Derived>& W) {
    return W.colwise().norm().sum();
}

template <typename Scalar>
Scalar objective(const std::type_identity_t<Mat<Scalar>>& W, const BasicMultiTaskDataset<Scalar>& ds, std::type_identity_t<Scalar> lambda) {
    detail::require(lambda >= Scalar(0), "objective: lambda must be >= 0");
    return loss(W, ds) + lambda * l21_norm(W);
}

/// Group soft-thresholding of each feature column:
/// h_j -> max(0, 1 - threshold / ||h_j||) h_j, identity when threshold == 0.
template <typename Derived>
Mat<typename Derived::Scalar> prox_l21(const Eigen::MatrixBase<Derived>& H,
                                       typename Derived::Scalar threshold) {
    using Scalar = typename Derived::Scalar;
    detail::require(threshold >= Scalar(0), "prox_l21: threshold must be >= 0");
    Mat<Scalar> out = H;
    if (threshold == Scalar(0)) return out;
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const Scalar norm = out.col(j).norm();
        if (norm > threshold) out.col(j) *= Scalar(1) - threshold / norm;
        else out.col(j).setZero();
    }
    return out;
}

/// Smallest lambda for which the all-zero matrix is optimal: the largest
/// column norm of the loss gradient at zero.
template <typename Scalar>
Scalar lambda_max(const BasicMultiTaskDataset<Scalar>& ds) {
    const Mat<Scalar> zero = Mat<Scalar>::Zero(ds.num_tasks(), ds.num_features());
    return grad_loss(zero, ds).colwise().norm().maxCoeff();
}

template <typename Scalar>
struct BasicMtlModel {
    Mat<Scalar> weights;    // T x J
    Vec<Scalar> intercept;  // T, zero unless fit_intercept
    bool fit_intercept = false;
    Scalar lambda = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> task_labels;
    std::optional<BasicScalingParams<Scalar>> scaling;
    SolveTrace trace;
};

using MtlModel = BasicMtlModel<double>;

struct MtlOptions {
    /// Per-task intercept excluded from the penalty.
    bool fit_intercept = false;
};

namespace detail {

/// Appends a column of ones to every task's design matrix.
template <typename Scalar>
BasicMultiTaskDataset<Scalar> with_ones_column(const BasicMultiTaskDataset<Scalar>& ds) {
    BasicMultiTaskDataset<Scalar> out = ds;
    out.feature_names.push_back("(intercept)");
    for (auto& t : out.tasks) {
        t.X.conservativeResize(Eigen::NoChange, t.X.cols() + 1);
        t.X.col(t.X.cols() - 1).setOnes();
    }
    return out;
}

}  // namespace detail

/// Builds the FISTA problem for the L2,1 objective. Columns at index >=
/// `penalized` are left out of the penalty and the prox.
template <typename Scalar>
ProximalProblem<Scalar> make_l21_problem(const BasicMultiTaskDataset<Scalar>& ds, Scalar lambda,
                                         Eigen::Index penalized) {
    ProximalProblem<Scalar> p;
    p.smooth_value = [&ds](const Mat<Scalar>& W) { return loss(W, ds); };
    p.smooth_grad = [&ds](const Mat<Scalar>& W) { return grad_loss(W, ds); };
    p.prox = [lambda, penalized](const Mat<Scalar>& H, Scalar step) {
        Mat<Scalar> out = H;
        out.leftCols(penalized) = prox_l21(H.leftCols(penalized), lambda * step);
        return out;
    };
    p.full_objective = [&ds, lambda, penalized](const Mat<Scalar>& W) {
        return loss(W, ds) + lambda * l21_norm(W.leftCols(penalized));
    };
    return p;
}

/// Fits the L2,1 model from W = 0.
template <typename Scalar>
BasicMtlModel<Scalar> fit_mtl(const BasicMultiTaskDataset<Scalar>& ds, Scalar lambda,
                              const SolverConfig& cfg, const MtlOptions& opts = {}) {
    validate(ds);
    detail::require(lambda >= Scalar(0), "fit_mtl: lambda must be >= 0");
    const auto J = ds.num_features();
    const auto T = ds.num_tasks();

    BasicMtlModel<Scalar> model;
    model.lambda = lambda;
    model.fit_intercept = opts.fit_intercept;
    model.feature_names = ds.feature_names;
    model.task_labels = ds.task_labels();

    if (opts.fit_intercept) {
        const auto aug = detail::with_ones_column(ds);
        auto result = solve(make_l21_problem(aug, lambda, J), Mat<Scalar>::Zero(T, J + 1), cfg);
        model.weights = result.solution.leftCols(J);
        model.intercept = result.solution.col(J);
        model.trace = std::move(result.trace);
    } else {
        auto result = solve(make_l21_problem(ds, lambda, J), Mat<Scalar>::Zero(T, J), cfg);
        model.weights = std::move(result.solution);
        model.intercept = Vec<Scalar>::Zero(T);
        model.trace = std::move(result.trace);
    }
    return model;
}

/// X * w_t^T (+ intercept). Works for any model exposing `weights` and
/// `intercept`.
template <typename Model, typename Derived>
auto predict(const Model& model, const Eigen::MatrixBase<Derived>& X, Eigen::Index task_index) {
    using Scalar = typename Derived::Scalar;
    if (task_index < 0 || task_index >= model.weights.rows()) {
        throw InvalidArgument("predict: task index " + std::to_string(task_index) +
                              " out of range [0, " + std::to_string(model.weights.rows()) + ")");
    }
    if (X.cols() != model.weights.cols()) {
        throw DimensionError("predict: X has " + std::to_string(X.cols()) +
                             " columns, model has " + std::to_string(model.weights.cols()) +
                             " features");
    }
    Vec<Scalar> out = X * model.weights.row(task_index).transpose();
    if (model.intercept.size() == model.weights.rows()) {
        out.array() += model.intercept(task_index);
    }
    return out;
}

}  // namespace mdmtl
