#pragma once

// Convex-relaxed clustered multi-task learning.
//
// Jointly minimizes, over task weights W (T x J) and a relaxed cluster matrix
// C (T x T),
//
//   sum_t (1/N_t) ||X_t w_t - Y_t||^2 + rho1 eta (1 + eta) tr(W^T (eta I + C)^{-1} W)
//
// subject to tr(C) = K, 0 <= C <= I, with eta = rho2 / rho1. C acts on the
// task dimension; when it equals O O^T for a cluster indicator O the
// regularizer is a k-means penalty on the task weight vectors.

#include <mdmtl/dataset.hpp>
#include <mdmtl/fista.hpp>
#include <mdmtl/kmeans.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <optional>
#include <type_traits>
#include <vector>

namespace mdmtl {

struct CmtlParams {
    double rho1 = 1.0;
    double rho2 = 1.0;
    int k = 2;

    double eta() const { return rho2 / rho1; }
    /// rho1 * eta * (1 + eta), the regularizer's leading constant.
    double weight() const { return rho1 * eta() * (1.0 + eta()); }

    void validate(Eigen::Index num_tasks) const {
        detail::require(rho1 > 0.0, "CmtlParams: rho1 must be > 0");
        detail::require(rho2 > 0.0, "CmtlParams: rho2 must be > 0");
        detail::require(k >= 1 && k < num_tasks,
                        "CmtlParams: cluster count k must satisfy 1 <= k < T (T = " +
                            std::to_string(num_tasks) + ", k = " + std::to_string(k) + ")");
    }
};

// ---------------------------------------------------------------------------
// Feasible-set checks

template <typename Scalar>
struct FeasibilityReport {
    Scalar asymmetry;  // max |C - C^T|
    Scalar trace;
    Scalar min_eigenvalue;
    Scalar max_eigenvalue;
};

template <typename Derived>
FeasibilityReport<typename Derived::Scalar> feasibility(const Eigen::MatrixBase<Derived>& C) {
    using Scalar = typename Derived::Scalar;
    const Mat<Scalar> M = C;
    const Mat<Scalar> sym = (M + M.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym, Eigen::EigenvaluesOnly);
    return {(M - M.transpose()).cwiseAbs().maxCoeff(), M.trace(), es.eigenvalues().minCoeff(),
            es.eigenvalues().maxCoeff()};
}

/// tr(C) = K within 1e-8, spectrum in [-1e-8, 1 + 1e-8], symmetric within 1e-10.
template <typename Derived>
bool is_feasible_cluster_matrix(const Eigen::MatrixBase<Derived>& C, int k) {
    const auto r = feasibility(C);
    return r.asymmetry <= 1e-10 && std::abs(r.trace - k) <= 1e-8 && r.min_eigenvalue >= -1e-8 &&
           r.max_eigenvalue <= 1.0 + 1e-8;
}

namespace detail {

/// (eta I + C)^{-1} through the symmetric eigendecomposition of C. Empty when
/// eta I + C is not positive definite.
template <typename Scalar>
std::optional<Mat<Scalar>> shifted_inverse(const Mat<Scalar>& C, Scalar eta) {
    const Mat<Scalar> sym = (C + C.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym);
    if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Vec<Scalar> shifted = es.eigenvalues().array() + eta;
    if (shifted.minCoeff() <= Scalar(0)) return std::nullopt;
    return es.eigenvectors() * shifted.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

template <typename Scalar>
Mat<Scalar> require_shifted_inverse(const Mat<Scalar>& C, Scalar eta, const char* where) {
    auto inv = shifted_inverse(C, eta);
    if (!inv) throw NumericalError(std::string(where) + ": eta*I + C is not positive definite");
    return *std::move(inv);
}

template <typename Scalar, typename Derived>
void check_cluster_matrix(const Eigen::MatrixBase<Derived>& C, Eigen::Index T, const char* where) {
    if (C.rows() != T || C.cols() != T) {
        throw DimensionError(std::string(where) + ": cluster matrix must be " + std::to_string(T) +
                             "x" + std::to_string(T));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Objective pieces

/// rho1 eta (1 + eta) tr(W^T (eta I + C)^{-1} W)
template <typename Scalar>
Scalar cmtl_regularizer(const Mat<Scalar>& W, const Mat<Scalar>& C, const CmtlParams& params) {
    detail::check_cluster_matrix<Scalar>(C, W.rows(), "cmtl_regularizer");
    const Scalar eta = Scalar(params.eta());
    const Mat<Scalar> inv = detail::require_shifted_inverse(C, eta, "cmtl_regularizer");
    return Scalar(params.weight()) * (W.transpose() * inv * W).trace();
}

/// sum_t (1/N_t) ||X_t w_t - Y_t||^2
template <typename Scalar>
Scalar cmtl_loss(const std::type_identity_t<Mat<Scalar>>& W, const BasicMultiTaskDataset<Scalar>& ds) {
    if (W.rows() != ds.num_tasks() || W.cols() != ds.num_features()) {
        throw DimensionError("cmtl_loss: weight shape does not match dataset");
    }
    Scalar total(0);
    for (Eigen::Index t = 0; t < ds.num_tasks(); ++t) {
        const auto& task = ds.tasks[static_cast<std::size_t>(t)];
        total += (task.X * W.row(t).transpose() - task.Y).squaredNorm() / Scalar(task.rows());
    }
    return total;
}

template <typename Scalar>
Mat<Scalar> grad_cmtl_loss(const std::type_identity_t<Mat<Scalar>>& W, const BasicMultiTaskDataset<Scalar>& ds) {
    if (W.rows() != ds.num_tasks() || W.cols() != ds.num_features()) {
        throw DimensionError("grad_cmtl_loss: weight shape does not match dataset");
    }
    Mat<Scalar> G(W.rows(), W.cols());
    for (Eigen::Index t = 0; t < ds.num_tasks(); ++t) {
        const auto& task = ds.tasks[static_cast<std::size_t>(t)];
        const Vec<Scalar> r = task.X * W.row(t).transpose() - task.Y;
        G.row(t).noalias() = (Scalar(2) / Scalar(task.rows())) * (task.X.transpose() * r).transpose();
    }
    return G;
}

/// Gradient in W of cmtl_loss + cmtl_regularizer.
template <typename Scalar>
Mat<Scalar> grad_phi(const std::type_identity_t<Mat<Scalar>>& W, const std::type_identity_t<Mat<Scalar>>& C,
                     const BasicMultiTaskDataset<Scalar>& ds, const CmtlParams& params) {
    detail::check_cluster_matrix<Scalar>(C, W.rows(), "grad_phi");
    const Mat<Scalar> inv = detail::require_shifted_inverse(C, Scalar(params.eta()), "grad_phi");
    return grad_cmtl_loss(W, ds) + Scalar(2 * params.weight()) * inv * W;
}

/// (eta I + C)^{-1} W W^T (eta I + C)^{-1}; the regularizer's gradient in C
/// is -rho1 eta (1 + eta) times this.
template <typename Scalar>
Mat<Scalar> cluster_curvature(const Mat<Scalar>& W, const Mat<Scalar>& inv) {
    const Mat<Scalar> A = inv * W;
    Mat<Scalar> M = A * A.transpose();
    return (M + M.transpose()) / Scalar(2);
}

/// Gradient step on C at the search point:
/// C_S + (rho1 eta (1 + eta) / gamma) (eta I + C_S)^{-1} W_S W_S^T (eta I + C_S)^{-1}.
template <typename Scalar>
Mat<Scalar> grad_c_step(const Mat<Scalar>& W_s, const Mat<Scalar>& C_s, const CmtlParams& params,
                        Scalar gamma) {
    detail::check_cluster_matrix<Scalar>(C_s, W_s.rows(), "grad_c_step");
    detail::require(gamma > Scalar(0), "grad_c_step: gamma must be > 0");
    if ((C_s - C_s.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * (Scalar(1) + C_s.cwiseAbs().maxCoeff())) {
        throw InvalidArgument("grad_c_step: search point C_S is not symmetric");
    }
    const Mat<Scalar> inv = detail::require_shifted_inverse(C_s, Scalar(params.eta()), "grad_c_step");
    Mat<Scalar> G = C_s + (Scalar(params.weight()) / gamma) * cluster_curvature(W_s, inv);
    return (G + G.transpose()) / Scalar(2);
}

// ---------------------------------------------------------------------------
// Projections

/// Euclidean projection onto {s : sum s = k, 0 <= s <= 1}. Finds the shift
/// theta with sum clip(v - theta, 0, 1) = k exactly: the sum is piecewise
/// linear and non-increasing in theta with breakpoints v_t - 1 and v_t.
template <typename Derived>
Vec<typename Derived::Scalar> capped_simplex_project(const Eigen::MatrixBase<Derived>& v, int k) {
    using Scalar = typename Derived::Scalar;
    const auto n = v.size();
    if (k < 1 || k > n) {
        throw InvalidArgument("capped_simplex_project: k = " + std::to_string(k) +
                              " is infeasible for dimension " + std::to_string(n));
    }
    auto mass = [&](Scalar theta) {
        return (v.array() - theta).max(Scalar(0)).min(Scalar(1)).sum();
    };
    std::vector<Scalar> breaks;
    breaks.reserve(static_cast<std::size_t>(2 * n));
    for (Eigen::Index i = 0; i < n; ++i) {
        breaks.push_back(v(i) - Scalar(1));
        breaks.push_back(v(i));
    }
    std::sort(breaks.begin(), breaks.end());
    const Scalar target(k);
    // mass(breaks.front()) == n >= k and mass(breaks.back()) == 0 < k.
    Scalar theta = breaks.front();
    Scalar lo_mass = mass(breaks.front());
    for (std::size_t i = 1; i < breaks.size(); ++i) {
        const Scalar hi_mass = mass(breaks[i]);
        if (hi_mass <= target) {
            const Scalar a = breaks[i - 1], b = breaks[i];
            theta = lo_mass == hi_mass ? b : a + (lo_mass - target) * (b - a) / (lo_mass - hi_mass);
            break;
        }
        lo_mass = hi_mass;
    }
    return (v.array() - theta).max(Scalar(0)).min(Scalar(1)).matrix();
}

/// Frobenius-nearest matrix to (G + G^T)/2 in {C : tr C = k, 0 <= C <= I}:
/// eigendecompose, project the spectrum onto the capped simplex, recompose.
template <typename Derived>
Mat<typename Derived::Scalar> project_spectral(const Eigen::MatrixBase<Derived>& G, int k) {
    using Scalar = typename Derived::Scalar;
    if (G.rows() != G.cols()) throw DimensionError("project_spectral: matrix must be square");
    detail::require(k >= 1 && k < G.rows(), "project_spectral: k must satisfy 1 <= k < T");
    const Mat<Scalar> sym = (G + G.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym);
    if (es.info() != Eigen::Success) throw NumericalError("project_spectral: eigendecomposition failed");
    const Vec<Scalar> sigma = capped_simplex_project(es.eigenvalues(), k);
    Mat<Scalar> out = es.eigenvectors() * sigma.asDiagonal() * es.eigenvectors().transpose();
    return (out + out.transpose()) / Scalar(2);
}

// ---------------------------------------------------------------------------
// Hard clusters

/// Spectral rounding of a relaxed cluster matrix. Tasks are embedded with the
/// top-k eigenvectors of C, each scaled by the square root of its eigenvalue
/// (so the embedding's Gram matrix is the rank-k part of C), then grouped by
/// seeded k-means. Labels are numbered by first occurrence.
template <typename Scalar>
std::vector<int> extract_clusters(const Mat<Scalar>& C, int k, std::uint64_t seed,
                                  int restarts = 50) {
    if (C.rows() != C.cols()) throw DimensionError("extract_clusters: matrix must be square");
    const auto T = C.rows();
    detail::require(k >= 1 && k <= T, "extract_clusters: k must satisfy 1 <= k <= T");
    if (k == 1) return std::vector<int>(static_cast<std::size_t>(T), 0);
    const Mat<Scalar> sym = (C + C.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(sym);
    if (es.info() != Eigen::Success) throw NumericalError("extract_clusters: eigendecomposition failed");
    // Eigenvalues ascend; the top k are the last k columns.
    const Vec<Scalar> scale = es.eigenvalues().tail(k).cwiseMax(Scalar(0)).cwiseSqrt();
    const Mat<Scalar> embedding = es.eigenvectors().rightCols(k) * scale.asDiagonal();
    return kmeans(embedding, k, seed, restarts).labels;
}

// ---------------------------------------------------------------------------
// k-means identity helpers

/// Orthonormal cluster indicator: O(t, c) = 1/sqrt(n_c) when task t is in c.
template <typename Scalar = double>
Mat<Scalar> cluster_indicator(const std::vector<int>& assignments, int k) {
    Mat<Scalar> O = Mat<Scalar>::Zero(static_cast<Eigen::Index>(assignments.size()), k);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int a : assignments) {
        detail::require(a >= 0 && a < k, "cluster_indicator: assignment out of range");
        ++counts[static_cast<std::size_t>(a)];
    }
    for (std::size_t t = 0; t < assignments.size(); ++t) {
        const int a = assignments[t];
        O(static_cast<Eigen::Index>(t), a) = Scalar(1) / std::sqrt(Scalar(counts[static_cast<std::size_t>(a)]));
    }
    return O;
}

/// Sum over clusters of squared distances from task weight rows to their
/// cluster mean.
template <typename Scalar>
Scalar within_cluster_sse(const Mat<Scalar>& W, const std::vector<int>& assignments, int k) {
    detail::require_dims(static_cast<Eigen::Index>(assignments.size()) == W.rows(),
                         "within_cluster_sse: one assignment per task required");
    Mat<Scalar> means = Mat<Scalar>::Zero(k, W.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t t = 0; t < assignments.size(); ++t) {
        means.row(assignments[t]) += W.row(static_cast<Eigen::Index>(t));
        ++counts[static_cast<std::size_t>(assignments[t])];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) means.row(c) /= Scalar(counts[static_cast<std::size_t>(c)]);
    }
    Scalar sse(0);
    for (std::size_t t = 0; t < assignments.size(); ++t) {
        sse += (W.row(static_cast<Eigen::Index>(t)) - means.row(assignments[t])).squaredNorm();
    }
    return sse;
}

/// tr(W^T W) - tr(W^T O O^T W)
template <typename Scalar>
Scalar sse_trace_form(const Mat<Scalar>& W, const Mat<Scalar>& O) {
    const Mat<Scalar> P = O.transpose() * W;
    return W.squaredNorm() - P.squaredNorm();
}

// ---------------------------------------------------------------------------
// Fitting

template <typename Scalar>
struct BasicClusteredModel {
    Mat<Scalar> weights;    // T x J
    Vec<Scalar> intercept;  // always zero; keeps the predict() interface uniform
    Mat<Scalar> cluster_matrix;  // T x T relaxed C
    CmtlParams params;
    std::vector<int> assignments;
    std::uint64_t kmeans_seed = 0;
    std::vector<std::string> feature_names;
    std::vector<std::string> task_labels;
    std::optional<BasicScalingParams<Scalar>> scaling;
    SolveTrace trace;
};

using ClusteredModel = BasicClusteredModel<double>;

template <typename Scalar>
struct CmtlOptions {
    std::uint64_t kmeans_seed = 0;
    int kmeans_restarts = 50;
    /// Called with every projected C produced during the fit.
    std::function<void(const Mat<Scalar>&)> on_projection;
};

/// FISTA problem over the stacked variable [W | C] (T x (J + T)). A single
/// step size serves both blocks; the prox is the identity on W and the
/// spectral projection on C. The smooth part is +inf where eta I + C is not
/// positive definite, which only extrapolated search points can reach.
template <typename Scalar>
ProximalProblem<Scalar> make_cmtl_problem(const BasicMultiTaskDataset<Scalar>& ds,
                                          const CmtlParams& params,
                                          std::function<void(const Mat<Scalar>&)> on_projection = {}) {
    const auto J = ds.num_features();
    const auto T = ds.num_tasks();
    const Scalar eta = Scalar(params.eta());
    const Scalar weight = Scalar(params.weight());
    const int k = params.k;

    ProximalProblem<Scalar> p;
    p.smooth_value = [&ds, J, T, eta, weight](const Mat<Scalar>& Z) {
        const Mat<Scalar> W = Z.leftCols(J);
        const auto inv = detail::shifted_inverse<Scalar>(Z.rightCols(T), eta);
        if (!inv) return std::numeric_limits<Scalar>::infinity();
        return cmtl_loss(W, ds) + weight * (W.transpose() * *inv * W).trace();
    };
    p.smooth_grad = [&ds, J, T, eta, weight](const Mat<Scalar>& Z) {
        const Mat<Scalar> W = Z.leftCols(J);
        const Mat<Scalar> inv = detail::require_shifted_inverse<Scalar>(Z.rightCols(T), eta, "cmtl gradient");
        Mat<Scalar> G(T, J + T);
        G.leftCols(J) = grad_cmtl_loss(W, ds) + Scalar(2) * weight * inv * W;
        G.rightCols(T) = -weight * cluster_curvature(W, inv);
        return G;
    };
    p.prox = [T, k, on_projection](const Mat<Scalar>& H, Scalar) {
        Mat<Scalar> out = H;
        out.rightCols(T) = project_spectral(H.rightCols(T), k);
        if (on_projection) on_projection(out.rightCols(T));
        return out;
    };
    p.full_objective = p.smooth_value;
    return p;
}

/// Starts from W = 0, C = (k/T) I.
template <typename Scalar>
BasicClusteredModel<Scalar> fit_cmtl(const BasicMultiTaskDataset<Scalar>& ds,
                                     const CmtlParams& params, const SolverConfig& cfg,
                                     const CmtlOptions<Scalar>& opts = {}) {
    validate(ds);
    const auto J = ds.num_features();
    const auto T = ds.num_tasks();
    params.validate(T);

    Mat<Scalar> start = Mat<Scalar>::Zero(T, J + T);
    start.rightCols(T) = Mat<Scalar>::Identity(T, T) * (Scalar(params.k) / Scalar(T));

    auto result = solve(make_cmtl_problem(ds, params, opts.on_projection), start, cfg);

    BasicClusteredModel<Scalar> model;
    model.weights = result.solution.leftCols(J);
    model.intercept = Vec<Scalar>::Zero(T);
    model.cluster_matrix = result.solution.rightCols(T);
    model.params = params;
    model.kmeans_seed = opts.kmeans_seed;
    model.assignments =
        extract_clusters<Scalar>(model.cluster_matrix, params.k, opts.kmeans_seed, opts.kmeans_restarts);
    model.feature_names = ds.feature_names;
    model.task_labels = ds.task_labels();
    model.trace = std::move(result.trace);
    return model;
}

}  // namespace mdmtl
