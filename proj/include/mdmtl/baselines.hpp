#pragma once

// Single-task baselines (linear, ridge, lasso) in global and individual
// settings, and mean-absolute-error evaluation for any linear task model.

#include <mdmtl/dataset.hpp>
#include <mdmtl/fista.hpp>
#include <mdmtl/l21.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdmtl {

enum class StlSetting { Global, Individual };
enum class StlPenalty { None, Ridge, Lasso };

/// Ridge penalizes (lambda / 2) ||w||^2, lasso lambda ||w||_1; both on top of
/// 0.5 ||X w - y||^2.
struct StlSpec {
    StlSetting setting = StlSetting::Individual;
    StlPenalty penalty = StlPenalty::None;
    double lambda = 0.0;
    bool fit_intercept = false;

    void validate() const {
        detail::require(lambda >= 0.0, "StlSpec: lambda must be >= 0");
        detail::require(penalty != StlPenalty::None || lambda == 0.0,
                        "StlSpec: lambda must be 0 when penalty is none");
    }
};

template <typename Scalar>
struct BasicStlModel {
    Mat<Scalar> weights;    // T x J; identical rows in the global setting
    Vec<Scalar> intercept;  // T
    StlSpec spec;
    std::vector<std::string> feature_names;
    std::vector<std::string> task_labels;
    std::optional<BasicScalingParams<Scalar>> scaling;
    std::vector<SolveTrace> traces;  // one per fitted vector
};

using StlModel = BasicStlModel<double>;

namespace detail {

template <typename Scalar>
Vec<Scalar> soft_threshold(const Vec<Scalar>& v, Scalar t) {
    return v.unaryExpr([t](Scalar x) {
        return x > t ? x - t : (x < -t ? x + t : Scalar(0));
    });
}

/// One regularized least-squares fit as a 1 x p FISTA problem. Entries at
/// index >= `penalized` are unpenalized.
template <typename Scalar>
SolveResult<Scalar> fit_single(const Mat<Scalar>& X, const Vec<Scalar>& y, StlPenalty penalty,
                               Scalar lambda, Eigen::Index penalized, const SolverConfig& cfg) {
    ProximalProblem<Scalar> p;
    auto value = [&X, &y](const Mat<Scalar>& w) {
        return (X * w.transpose() - y).squaredNorm() / Scalar(2);
    };
    auto pen = [penalty, lambda, penalized](const Mat<Scalar>& w) {
        const auto head = w.leftCols(penalized);
        switch (penalty) {
            case StlPenalty::Ridge: return lambda * head.squaredNorm() / Scalar(2);
            case StlPenalty::Lasso: return lambda * head.cwiseAbs().sum();
            default: return Scalar(0);
        }
    };
    p.smooth_value = value;
    p.smooth_grad = [&X, &y](const Mat<Scalar>& w) -> Mat<Scalar> {
        return (X.transpose() * (X * w.transpose() - y)).transpose();
    };
    p.prox = [penalty, lambda, penalized](const Mat<Scalar>& H, Scalar step) -> Mat<Scalar> {
        Mat<Scalar> out = H;
        auto head = out.leftCols(penalized);
        switch (penalty) {
            case StlPenalty::Ridge: head /= Scalar(1) + step * lambda; break;
            case StlPenalty::Lasso:
                head = soft_threshold<Scalar>(H.leftCols(penalized).transpose(), step * lambda).transpose();
                break;
            default: break;
        }
        return out;
    };
    p.full_objective = [value, pen](const Mat<Scalar>& w) { return value(w) + pen(w); };
    return solve(p, Mat<Scalar>::Zero(1, X.cols()), cfg);
}

}  // namespace detail

/// Global: one vector fitted on all tasks pooled, copied to every row.
/// Individual: each task fitted on its own rows.
template <typename Scalar>
BasicStlModel<Scalar> fit_stl(const BasicMultiTaskDataset<Scalar>& ds, const StlSpec& spec,
                              const SolverConfig& cfg) {
    validate(ds);
    spec.validate();
    const auto T = ds.num_tasks();
    const auto J = ds.num_features();
    const Scalar lambda = Scalar(spec.lambda);

    BasicStlModel<Scalar> model;
    model.spec = spec;
    model.feature_names = ds.feature_names;
    model.task_labels = ds.task_labels();
    model.weights.resize(T, J);
    model.intercept = Vec<Scalar>::Zero(T);

    auto fit_rows = [&](const Mat<Scalar>& X, const Vec<Scalar>& y) {
        if (!spec.fit_intercept) {
            auto res = detail::fit_single(X, y, spec.penalty, lambda, J, cfg);
            model.traces.push_back(std::move(res.trace));
            return std::make_pair(Vec<Scalar>(res.solution.row(0).transpose()), Scalar(0));
        }
        Mat<Scalar> Xa(X.rows(), J + 1);
        Xa << X, Vec<Scalar>::Ones(X.rows());
        auto res = detail::fit_single(Xa, y, spec.penalty, lambda, J, cfg);
        model.traces.push_back(std::move(res.trace));
        return std::make_pair(Vec<Scalar>(res.solution.row(0).head(J).transpose()), res.solution(0, J));
    };

    if (spec.setting == StlSetting::Global) {
        const auto [X, y] = pool_tasks(ds);
        const auto [w, b] = fit_rows(X, y);
        model.weights.rowwise() = w.transpose();
        model.intercept.setConstant(b);
    } else {
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto& task = ds.tasks[static_cast<std::size_t>(t)];
            const auto [w, b] = fit_rows(task.X, task.Y);
            model.weights.row(t) = w.transpose();
            model.intercept(t) = b;
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Evaluation

/// Mean absolute error.
template <typename A, typename B>
double mae(const Eigen::MatrixBase<A>& pred, const Eigen::MatrixBase<B>& actual) {
    if (pred.size() != actual.size()) {
        throw DimensionError("mae: prediction length " + std::to_string(pred.size()) +
                             " differs from actual length " + std::to_string(actual.size()));
    }
    detail::require(pred.size() >= 1, "mae: empty input");
    return static_cast<double>((pred - actual).cwiseAbs().sum()) / static_cast<double>(pred.size());
}

enum class TotalMode {
    /// MAE over every test row pooled across tasks.
    Pooled,
    /// Unweighted mean of the per-task MAEs.
    MeanOfTasks,
};

struct TaskMae {
    std::string label;
    Eigen::Index n = 0;
    double mae = 0.0;
    std::optional<double> sd;  // across repeated runs, when summarized
};

struct MaeReport {
    std::vector<TaskMae> per_task;
    double total = 0.0;
    std::optional<double> total_sd;
    Eigen::Index total_n = 0;
};

/// Scores `model` on raw (unscaled) test data. The model's stored scaling, if
/// any, is applied to the features and inverted on the predictions. Test tasks
/// are matched to model rows by label.
template <typename Model>
MaeReport evaluate(const Model& model, const MultiTaskDataset& test,
                   TotalMode mode = TotalMode::Pooled) {
    validate(test);
    if (test.num_features() != model.weights.cols()) {
        throw DimensionError("evaluate: test data has " + std::to_string(test.num_features()) +
                             " features, model has " + std::to_string(model.weights.cols()));
    }
    const MultiTaskDataset scaled = model.scaling ? apply_scale(test, *model.scaling) : test;
    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t t = 0; t < model.task_labels.size(); ++t) {
        row_of.emplace(model.task_labels[t], static_cast<Eigen::Index>(t));
    }
    MaeReport report;
    double abs_sum = 0.0;
    double task_mean_sum = 0.0;
    for (std::size_t i = 0; i < test.tasks.size(); ++i) {
        const auto& raw = test.tasks[i];
        const auto it = row_of.find(raw.label);
        if (it == row_of.end()) throw InvalidArgument("evaluate: no model for task '" + raw.label + "'");
        VectorXd pred = predict(model, scaled.tasks[i].X, it->second);
        if (model.scaling) pred = invert_outcome(pred, *model.scaling);
        const double task_abs = (pred - raw.Y).cwiseAbs().sum();
        TaskMae row;
        row.label = raw.label;
        row.n = raw.rows();
        row.mae = task_abs / static_cast<double>(raw.rows());
        report.per_task.push_back(row);
        abs_sum += task_abs;
        task_mean_sum += row.mae;
        report.total_n += raw.rows();
    }
    report.total = mode == TotalMode::Pooled
                       ? abs_sum / static_cast<double>(report.total_n)
                       : task_mean_sum / static_cast<double>(report.per_task.size());
    return report;
}

/// Mean and sample SD per task and for the total, across repeated runs with
/// identical task lists.
inline MaeReport summarize_reports(const std::vector<MaeReport>& runs) {
    detail::require(!runs.empty(), "summarize_reports: no runs");
    const auto m = runs.size();
    auto stats = [m](auto&& get) {
        double mean = 0.0;
        for (const auto& r : get) mean += r;
        mean /= static_cast<double>(m);
        double ss = 0.0;
        for (const auto& r : get) ss += (r - mean) * (r - mean);
        const double sd = m > 1 ? std::sqrt(ss / static_cast<double>(m - 1)) : 0.0;
        return std::make_pair(mean, sd);
    };
    MaeReport out = runs.front();
    for (std::size_t t = 0; t < out.per_task.size(); ++t) {
        std::vector<double> vals;
        for (const auto& r : runs) {
            detail::require_dims(r.per_task.size() == out.per_task.size() &&
                                     r.per_task[t].label == out.per_task[t].label,
                                 "summarize_reports: runs cover different tasks");
            vals.push_back(r.per_task[t].mae);
        }
        const auto [mean, sd] = stats(vals);
        out.per_task[t].mae = mean;
        out.per_task[t].sd = sd;
    }
    std::vector<double> totals;
    for (const auto& r : runs) totals.push_back(r.total);
    const auto [mean, sd] = stats(totals);
    out.total = mean;
    out.total_sd = sd;
    return out;
}

// ---------------------------------------------------------------------------
// Tuning

/// Per-task k-fold partition: each task's rows are shuffled with the split
/// generator and dealt round-robin into `folds` folds.
inline std::vector<std::pair<MultiTaskDataset, MultiTaskDataset>> task_folds(
    const MultiTaskDataset& ds, int folds, std::uint64_t seed) {
    validate(ds);
    detail::require(folds >= 2, "task_folds: need at least 2 folds");
    for (const auto& t : ds.tasks) {
        if (t.rows() < folds) {
            throw DegenerateTaskError("task_folds: task '" + t.label + "' has fewer rows than folds");
        }
    }
    std::vector<std::vector<Eigen::Index>> order;
    for (std::size_t t = 0; t < ds.tasks.size(); ++t) {
        order.push_back(detail::shuffled_indices(ds.tasks[t].rows(), seed, t));
    }
    std::vector<std::pair<MultiTaskDataset, MultiTaskDataset>> out;
    for (int f = 0; f < folds; ++f) {
        MultiTaskDataset train, held;
        train.feature_names = held.feature_names = ds.feature_names;
        for (std::size_t t = 0; t < ds.tasks.size(); ++t) {
            std::vector<Eigen::Index> tr, te;
            for (std::size_t i = 0; i < order[t].size(); ++i) {
                (static_cast<int>(i % static_cast<std::size_t>(folds)) == f ? te : tr).push_back(order[t][i]);
            }
            train.tasks.push_back(detail::take_rows(ds.tasks[t], tr));
            held.tasks.push_back(detail::take_rows(ds.tasks[t], te));
        }
        out.emplace_back(std::move(train), std::move(held));
    }
    return out;
}

struct GridSearchResult {
    double best_value = 0.0;
    std::vector<double> mean_mae;  // per grid point
};

/// k-fold grid search over one hyperparameter; `fit(train, value)` returns
/// any model accepted by evaluate(). Picks the lowest mean held-out pooled
/// MAE; ties go to the earlier grid point.
template <typename Fit>
GridSearchResult grid_search(const MultiTaskDataset& ds, const std::vector<double>& grid,
                             int folds, std::uint64_t seed, Fit&& fit) {
    detail::require(!grid.empty(), "grid_search: empty grid");
    const auto parts = task_folds(ds, folds, seed);
    GridSearchResult res;
    double best = std::numeric_limits<double>::infinity();
    for (double value : grid) {
        double sum = 0.0;
        for (const auto& [train, held] : parts) sum += evaluate(fit(train, value), held).total;
        const double mean = sum / static_cast<double>(parts.size());
        res.mean_mae.push_back(mean);
        if (mean < best) {
            best = mean;
            res.best_value = value;
        }
    }
    return res;
}

}  // namespace mdmtl
