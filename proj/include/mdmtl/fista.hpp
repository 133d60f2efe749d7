#pragma once

#include <mdmtl/core.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace mdmtl {

/// Composite problem  min_W  smooth(W) + g(W).
///
/// `prox(H, step)` must return argmin_W 0.5*||W - H||^2 + step * g(W); with
/// step == 0 it returns H. `full_objective` evaluates smooth + g.
template <typename Scalar>
struct ProximalProblem {
    std::function<Scalar(const Mat<Scalar>&)> smooth_value;
    std::function<Mat<Scalar>(const Mat<Scalar>&)> smooth_grad;
    std::function<Mat<Scalar>(const Mat<Scalar>&, Scalar)> prox;
    std::function<Scalar(const Mat<Scalar>&)> full_objective;
};

/// Which momentum coefficient the search point uses at iteration l.
enum class MomentumIndexing {
    /// alpha_l = (d_{l-2} - 1) / d_{l-1}, d_{-1} = 0, d_0 = 1.
    Lagged,
    /// alpha_l = (d_{l-1} - 1) / d_l, momentum kicks in one step earlier.
    Shifted,
};

struct SolverConfig {
    int max_iters = 1000;
    double rel_tol = 1e-6;
    double gamma0 = 1.0;
    double backtrack_factor = 2.0;
    int max_backtracks = 100;
    /// false gives plain ISTA (alpha forced to 0).
    bool accelerate = true;
    MomentumIndexing momentum = MomentumIndexing::Lagged;
    /// Resets the momentum sequence whenever the objective goes up.
    bool restart = false;
    /// Relative slack on the sufficient-decrease test so that a Lipschitz-exact
    /// gamma is not rejected by rounding.
    double descent_slack = 1e-12;

    void validate() const {
        detail::require(max_iters >= 1, "SolverConfig: max_iters must be >= 1");
        detail::require(rel_tol >= 0.0, "SolverConfig: rel_tol must be >= 0");
        detail::require(gamma0 > 0.0, "SolverConfig: gamma0 must be > 0");
        detail::require(backtrack_factor > 1.0, "SolverConfig: backtrack_factor must be > 1");
        detail::require(max_backtracks >= 0, "SolverConfig: max_backtracks must be >= 0");
    }
};

/// Per-iteration diagnostics. All vectors have `iterations` entries; entry l
/// describes the step that produced iterate l+1.
struct SolveTrace {
    std::vector<double> objective_per_iter;
    std::vector<double> gamma_per_iter;
    std::vector<double> smooth_per_iter;     // smooth part at the accepted point
    std::vector<double> surrogate_per_iter;  // Q_gamma(S, accepted point)
    std::vector<double> alpha_per_iter;
    std::vector<double> momentum_per_iter;   // d_l after the step
    std::vector<int> backtracks_per_iter;
    double initial_objective = 0.0;
    int iterations = 0;
    bool converged = false;
    int best_iteration = 0;  // 0 means the starting point was best
    double best_objective = 0.0;
};

/// Optimizer failure. `trace` holds the iterations completed before it.
struct SolverFailure : Error {
    using Error::Error;
    SolveTrace trace;
};

// Backtracking exhausted its step-size budget.
struct LineSearchError : SolverFailure {
    using SolverFailure::SolverFailure;
};

// Non-finite objective during optimization.
struct DivergenceError : SolverFailure {
    using SolverFailure::SolverFailure;
};

/// Quadratic upper model of the smooth part around S, evaluated at W:
/// L(S) + gamma/2 ||W - S||^2 + <W - S, L'(S)>.
template <typename Scalar>
Scalar surrogate_q(Scalar smooth_at_s, const Mat<Scalar>& grad_at_s, const Mat<Scalar>& S,
                   const Mat<Scalar>& W, Scalar gamma) {
    detail::require_same_shape(S, W, "surrogate_q");
    detail::require_same_shape(S, grad_at_s, "surrogate_q");
    detail::require(gamma > Scalar(0), "surrogate_q: gamma must be > 0");
    const Mat<Scalar> diff = W - S;
    return smooth_at_s + gamma / Scalar(2) * diff.squaredNorm() + diff.cwiseProduct(grad_at_s).sum();
}

template <typename Scalar>
Scalar surrogate_q(const ProximalProblem<Scalar>& problem, const std::type_identity_t<Mat<Scalar>>& S,
                   const std::type_identity_t<Mat<Scalar>>& W, std::type_identity_t<Scalar> gamma) {
    return surrogate_q(problem.smooth_value(S), problem.smooth_grad(S), S, W, gamma);
}

template <typename Scalar>
struct BacktrackResult {
    Mat<Scalar> next;
    Scalar gamma;
    Scalar smooth_next;
    Scalar surrogate;
    int backtracks;
};

/// Smallest gamma = factor^j * gamma_prev (j = 0, 1, ...) whose proximal step
/// from S satisfies L(next) <= Q_gamma(S, next).
template <typename Scalar>
BacktrackResult<Scalar> backtracking_step(const ProximalProblem<Scalar>& problem,
                                          const Mat<Scalar>& S, Scalar smooth_at_s,
                                          const Mat<Scalar>& grad_at_s, Scalar gamma_prev,
                                          const SolverConfig& cfg) {
    detail::require(gamma_prev > Scalar(0), "backtracking_step: gamma_prev must be > 0");
    Scalar gamma = gamma_prev;
    for (int j = 0; j <= cfg.max_backtracks; ++j) {
        Mat<Scalar> next = problem.prox(S - grad_at_s / gamma, Scalar(1) / gamma);
        detail::require_same_shape(next, S, "backtracking_step: prox result");
        const Scalar f_next = problem.smooth_value(next);
        const Scalar q = surrogate_q(smooth_at_s, grad_at_s, S, next, gamma);
        const Scalar slack = Scalar(cfg.descent_slack) * (std::abs(q) + Scalar(1));
        if (std::isfinite(static_cast<double>(f_next)) && f_next <= q + slack) {
            return {std::move(next), gamma, f_next, q, j};
        }
        gamma *= Scalar(cfg.backtrack_factor);
    }
    throw LineSearchError("backtracking exceeded " + std::to_string(cfg.max_backtracks) +
                          " step-size increases (gamma reached " +
                          std::to_string(static_cast<double>(gamma)) +
                          "); the gradient is likely not Lipschitz or is wrong");
}

template <typename Scalar>
BacktrackResult<Scalar> backtracking_step(const ProximalProblem<Scalar>& problem,
                                          const std::type_identity_t<Mat<Scalar>>& S,
                                          std::type_identity_t<Scalar> gamma_prev,
                                          const SolverConfig& cfg) {
    return backtracking_step(problem, S, problem.smooth_value(S), problem.smooth_grad(S),
                             gamma_prev, cfg);
}

template <typename Scalar>
struct SolveResult {
    Mat<Scalar> solution;  // best-objective iterate
    Mat<Scalar> last;      // final iterate
    SolveTrace trace;
};

/// Accelerated proximal gradient (FISTA) with backtracking.
///
/// Iteration l forms the search point S = W_l + alpha_l (W_l - W_{l-1}),
/// takes a backtracked proximal step from S, and updates the momentum scalar
/// d_l = (1 + sqrt(1 + 4 d_{l-1}^2)) / 2. gamma is warm-started from the
/// previous iteration and never decreases. Stops when
/// |F_l - F_{l-1}| / max(1, |F_{l-1}|) < rel_tol. The best iterate seen is
/// returned because the objective sequence is not monotone.
///
/// If the smooth part is not finite at the extrapolated search point (it
/// left the smooth part's domain), that iteration falls back to S = W_l.
template <typename Scalar>
SolveResult<Scalar> solve(const ProximalProblem<Scalar>& problem, const std::type_identity_t<Mat<Scalar>>& start,
                          const SolverConfig& cfg) {
    cfg.validate();
    SolveResult<Scalar> out;
    auto& trace = out.trace;

    Mat<Scalar> current = start;
    Mat<Scalar> previous = start;
    double d_lag2 = 0.0, d_lag1 = 1.0;  // d_{l-2}, d_{l-1}
    Scalar gamma = Scalar(cfg.gamma0);

    Scalar f_prev = problem.full_objective(current);
    if (!std::isfinite(static_cast<double>(f_prev))) {
        throw DivergenceError("solve: objective is not finite at the starting point");
    }
    trace.initial_objective = static_cast<double>(f_prev);
    trace.best_objective = trace.initial_objective;
    out.solution = current;

    auto fail = [&trace](auto&& error) {
        error.trace = trace;
        throw error;
    };
    for (int l = 1; l <= cfg.max_iters; ++l) {
        double alpha = 0.0;
        double d_new = (1.0 + std::sqrt(1.0 + 4.0 * d_lag1 * d_lag1)) / 2.0;
        if (cfg.accelerate) {
            alpha = cfg.momentum == MomentumIndexing::Lagged ? (d_lag2 - 1.0) / d_lag1
                                                             : (d_lag1 - 1.0) / d_new;
            // Only l = 1 gives a negative value, where W_l - W_{l-1} = 0 anyway.
            alpha = std::max(alpha, 0.0);
        }
        Mat<Scalar> search = current + Scalar(alpha) * (current - previous);
        Scalar smooth_s = problem.smooth_value(search);
        if (!std::isfinite(static_cast<double>(smooth_s)) && alpha != 0.0) {
            alpha = 0.0;
            search = current;
            smooth_s = problem.smooth_value(search);
        }
        if (!std::isfinite(static_cast<double>(smooth_s))) {
            fail(DivergenceError("solve: smooth objective is not finite at iteration " +
                                 std::to_string(l)));
        }
        const Mat<Scalar> grad_s = problem.smooth_grad(search);
        std::optional<BacktrackResult<Scalar>> accepted;
        try {
            accepted = backtracking_step(problem, search, smooth_s, grad_s, gamma, cfg);
        } catch (LineSearchError& e) {
            fail(std::move(e));
        }
        auto& step = *accepted;
        gamma = step.gamma;

        previous = std::move(current);
        current = std::move(step.next);
        const Scalar f = problem.full_objective(current);
        if (!std::isfinite(static_cast<double>(f))) {
            fail(DivergenceError("solve: objective became non-finite at iteration " +
                                 std::to_string(l)));
        }

        d_lag2 = d_lag1;
        d_lag1 = d_new;
        if (cfg.restart && f > f_prev) {
            d_lag2 = 0.0;
            d_lag1 = 1.0;
        }

        trace.objective_per_iter.push_back(static_cast<double>(f));
        trace.gamma_per_iter.push_back(static_cast<double>(gamma));
        trace.smooth_per_iter.push_back(static_cast<double>(step.smooth_next));
        trace.surrogate_per_iter.push_back(static_cast<double>(step.surrogate));
        trace.alpha_per_iter.push_back(alpha);
        trace.momentum_per_iter.push_back(d_new);
        trace.backtracks_per_iter.push_back(step.backtracks);
        trace.iterations = l;

        if (static_cast<double>(f) < trace.best_objective) {
            trace.best_objective = static_cast<double>(f);
            trace.best_iteration = l;
            out.solution = current;
        }

        const double change = std::abs(static_cast<double>(f - f_prev)) /
                              std::max(1.0, std::abs(static_cast<double>(f_prev)));
        f_prev = f;
        if (change < cfg.rel_tol) {
            trace.converged = true;
            break;
        }
    }
    out.last = std::move(current);
    return out;
}

}  // namespace mdmtl
