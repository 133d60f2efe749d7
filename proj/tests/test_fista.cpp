#include <mdmtl/fista.hpp>
#include <mdmtl/l21.hpp>

#include <doctest.h>

#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mdmtl;

namespace {

/// 0.5 (w - c)^T diag(b) (w - c) with identity prox.
ProximalProblem<double> quadratic(const VectorXd& b, const VectorXd& c) {
    ProximalProblem<double> p;
    p.smooth_value = [b, c](const MatrixXd& W) {
        const VectorXd d = W.row(0).transpose() - c;
        return 0.5 * d.dot(b.cwiseProduct(d));
    };
    p.smooth_grad = [b, c](const MatrixXd& W) -> MatrixXd {
        return (b.cwiseProduct(W.row(0).transpose() - c)).transpose();
    };
    p.prox = [](const MatrixXd& H, double) { return H; };
    p.full_objective = p.smooth_value;
    return p;
}

ProximalProblem<double> zero_problem() {
    ProximalProblem<double> p;
    p.smooth_value = [](const MatrixXd&) { return 0.0; };
    p.smooth_grad = [](const MatrixXd& W) -> MatrixXd { return MatrixXd::Zero(W.rows(), W.cols()); };
    p.prox = [](const MatrixXd& H, double) { return H; };
    p.full_objective = p.smooth_value;
    return p;
}

}  // namespace

TEST_CASE("surrogate_q hand values") {
    const auto p = zero_problem();
    const MatrixXd S = MatrixXd::Zero(2, 2);
    MatrixXd W(2, 2);
    W << 1, 1, 1, 1;  // ||W||^2 = 4
    CHECK(surrogate_q(p, S, S, 2.0) == 0.0);
    CHECK(surrogate_q(p, S, W, 2.0) == doctest::Approx(4.0));
    CHECK(surrogate_q(p, S, W, 4.0) - surrogate_q(p, S, W, 2.0) == doctest::Approx(4.0));
    CHECK_THROWS_AS(surrogate_q(p, S, MatrixXd::Zero(1, 2), 1.0), DimensionError);
    CHECK_THROWS_AS(surrogate_q(p, S, W, 0.0), InvalidArgument);
}

TEST_CASE("surrogate_q at W = S equals the smooth value") {
    const auto p = quadratic(VectorXd::Constant(3, 2.0), VectorXd::Ones(3));
    const MatrixXd S = MatrixXd::Constant(1, 3, 0.3);
    CHECK(surrogate_q(p, S, S, 5.0) == doctest::Approx(p.smooth_value(S)));
}

TEST_CASE("backtracking_step accepts immediately when gamma bounds the curvature") {
    const auto p = quadratic(VectorXd::Constant(2, 3.0), VectorXd::Zero(2));
    SolverConfig cfg;
    const MatrixXd S = MatrixXd::Constant(1, 2, 1.0);
    const auto r = backtracking_step(p, S, 3.0, cfg);
    CHECK(r.backtracks == 0);
    CHECK(r.gamma == 3.0);
    const auto r2 = backtracking_step(p, S, 0.25, cfg);
    CHECK(r2.gamma >= 3.0 * 0.5);
    CHECK(r2.gamma == 0.25 * std::pow(2.0, r2.backtracks));
    CHECK(r2.smooth_next <= r2.surrogate + 1e-12);
}

TEST_CASE("backtracking_step on a zero smooth part returns the prox of S") {
    auto p = zero_problem();
    p.prox = [](const MatrixXd& H, double step) { return prox_l21(H, step); };
    MatrixXd S(2, 1);
    S << 3, 4;
    const auto r = backtracking_step(p, S, 0.5, SolverConfig{});
    CHECK(r.backtracks == 0);
    CHECK(r.next(0, 0) == doctest::Approx(3 * (1 - 2.0 / 5)));
}

TEST_CASE("backtracking_step on 1-D least squares lands on the minimizer") {
    const auto p = quadratic(VectorXd::Ones(1), VectorXd::Zero(1));
    const auto r = backtracking_step(p, MatrixXd::Ones(1, 1), 1.0, SolverConfig{});
    CHECK(r.next(0, 0) == 0.0);
    CHECK(r.gamma == 1.0);
}

TEST_CASE("backtracking_step reports a broken gradient") {
    auto p = quadratic(VectorXd::Ones(1), VectorXd::Zero(1));
    p.smooth_grad = [](const MatrixXd& W) -> MatrixXd { return -W; };  // wrong sign
    SolverConfig cfg;
    cfg.max_backtracks = 20;
    CHECK_THROWS_AS(backtracking_step(p, MatrixXd::Ones(1, 1), 1.0, cfg), LineSearchError);
}

TEST_CASE("solve with zero gradient and identity prox stops after one step") {
    const MatrixXd start = MatrixXd::Constant(2, 3, 1.5);
    const auto r = solve(zero_problem(), start, SolverConfig{});
    CHECK(r.trace.iterations == 1);
    CHECK(r.trace.converged);
    CHECK(r.solution == start);
}

TEST_CASE("solve matches the normal equations on a 5x3 least-squares system") {
    std::mt19937_64 rng(21);
    MatrixXd X = synth::gaussian(rng, 5, 3);
    const VectorXd y = synth::gaussian(rng, 5, 1).col(0);
    MultiTaskDataset ds;
    ds.feature_names = synth::feature_names(3);
    ds.tasks.push_back({"t", X, y});
    SolverConfig cfg;
    cfg.rel_tol = 0;
    cfg.max_iters = 5000;
    const auto r = solve(make_l21_problem(ds, 0.0, 3), MatrixXd::Zero(1, 3), cfg);
    const VectorXd ols = oracle::normal_equations(X, y);
    CHECK((r.solution.row(0).transpose() - ols).norm() <= 1e-6);

    cfg.accelerate = false;
    cfg.max_iters = 20000;
    const auto ista = solve(make_l21_problem(ds, 0.0, 3), MatrixXd::Zero(1, 3), cfg);
    CHECK(std::abs(ista.trace.best_objective - r.trace.best_objective) <= 1e-8);
}

TEST_CASE("trace invariants on random group-lasso problems") {
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 10; ++rep) {
        const auto ds = synth::random_tasks(rng, 3, 6, 10);
        const double lam = 0.3 * lambda_max(ds);
        for (auto momentum : {MomentumIndexing::Lagged, MomentumIndexing::Shifted}) {
            SolverConfig cfg;
            cfg.momentum = momentum;
            const auto r = solve(make_l21_problem(ds, lam, 6), MatrixXd::Zero(3, 6), cfg);
            const auto& t = r.trace;
            REQUIRE(t.objective_per_iter.size() == static_cast<std::size_t>(t.iterations));
            REQUIRE(t.gamma_per_iter.size() == static_cast<std::size_t>(t.iterations));
            CHECK(t.alpha_per_iter[0] == 0.0);
            double best = t.initial_objective;
            for (int l = 0; l < t.iterations; ++l) {
                const auto i = static_cast<std::size_t>(l);
                CHECK(t.gamma_per_iter[i] > 0);
                if (l > 0) {
                    CHECK(t.gamma_per_iter[i] >= t.gamma_per_iter[i - 1]);
                    CHECK(t.momentum_per_iter[i] > t.momentum_per_iter[i - 1]);
                }
                CHECK(t.momentum_per_iter[i] >= 1.0);
                CHECK(t.smooth_per_iter[i] <= t.surrogate_per_iter[i] + 1e-10 * (1 + std::abs(t.surrogate_per_iter[i])));
                best = std::min(best, t.objective_per_iter[i]);
            }
            CHECK(t.best_objective == best);
            CHECK(objective(r.solution, ds, lam) == doctest::Approx(best).epsilon(1e-12));
        }
    }
}

TEST_CASE("lagged momentum trails the shifted variant by one step") {
    std::mt19937_64 rng(23);
    const auto ds = synth::random_tasks(rng, 2, 4, 8);
    SolverConfig cfg;
    cfg.rel_tol = 0;
    cfg.max_iters = 6;
    const auto lag = solve(make_l21_problem(ds, 0.1, 4), MatrixXd::Zero(2, 4), cfg).trace;
    cfg.momentum = MomentumIndexing::Shifted;
    const auto sh = solve(make_l21_problem(ds, 0.1, 4), MatrixXd::Zero(2, 4), cfg).trace;
    CHECK(lag.alpha_per_iter[1] == 0.0);
    CHECK(sh.alpha_per_iter[1] > 0.0);
    // d_{l-2}, d_{l-1} vs d_{l-1}, d_l
    const double d1 = lag.momentum_per_iter[0], d2 = lag.momentum_per_iter[1];
    CHECK(lag.alpha_per_iter[2] == doctest::Approx((d1 - 1) / d2));
    CHECK(sh.alpha_per_iter[1] == doctest::Approx((d1 - 1) / d2));
}

TEST_CASE("ISTA has zero momentum and a monotone objective") {
    std::mt19937_64 rng(24);
    const auto ds = synth::random_tasks(rng, 3, 5, 9);
    SolverConfig cfg;
    cfg.accelerate = false;
    const auto t = solve(make_l21_problem(ds, 0.5, 5), MatrixXd::Zero(3, 5), cfg).trace;
    double prev = t.initial_objective;
    for (std::size_t i = 0; i < t.objective_per_iter.size(); ++i) {
        CHECK(t.alpha_per_iter[i] == 0.0);
        CHECK(t.objective_per_iter[i] <= prev + 1e-12);
        prev = t.objective_per_iter[i];
    }
}

TEST_CASE("restart option resets momentum after an increase") {
    std::mt19937_64 rng(25);
    const auto ds = synth::random_tasks(rng, 3, 8, 6);
    SolverConfig cfg;
    cfg.restart = true;
    cfg.rel_tol = 1e-12;
    const auto r = solve(make_l21_problem(ds, 0.01, 8), MatrixXd::Zero(3, 8), cfg);
    const auto& t = r.trace;
    for (int l = 1; l < t.iterations; ++l) {
        const auto i = static_cast<std::size_t>(l);
        if (t.objective_per_iter[i - 1] > (l > 1 ? t.objective_per_iter[i - 2] : t.initial_objective)) {
            CHECK(t.alpha_per_iter[i] == 0.0);
        }
    }
}

TEST_CASE("solve reports divergence and carries the trace") {
    auto p = quadratic(VectorXd::Ones(1), VectorXd::Zero(1));
    int calls = 0;
    p.full_objective = [&calls](const MatrixXd& W) {
        return ++calls > 3 ? std::numeric_limits<double>::quiet_NaN() : W.squaredNorm();
    };
    SolverConfig cfg;
    cfg.rel_tol = 0;
    try {
        solve(p, MatrixXd::Constant(1, 1, 5.0), cfg);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.trace.iterations == 2);
    }
}

TEST_CASE("SolverConfig validation") {
    SolverConfig cfg;
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.rel_tol = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.backtrack_factor = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
