#include "cli.hpp"

#include <mdmtl/mdmtl.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace mdmtl::cli {

namespace {

struct DataArgs {
    std::string data;
    std::string task_col;
    std::string outcome_col;
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
    cmd->add_option("--data", a.data, "Input CSV")->required();
    cmd->add_option("--task-col", a.task_col, "Column holding the task label")->required();
    cmd->add_option("--outcome-col", a.outcome_col, "Column holding the outcome")->required();
}

struct SolverArgs {
    int max_iters = 1000;
    double tol = 1e-6;
};

void add_solver_options(CLI::App* cmd, SolverArgs& a) {
    cmd->add_option("--max-iters", a.max_iters, "FISTA iteration cap")->capture_default_str();
    cmd->add_option("--tol", a.tol, "Relative objective-change tolerance")->capture_default_str();
}

SolverConfig solver_config(const SolverArgs& a) {
    SolverConfig cfg;
    cfg.max_iters = a.max_iters;
    cfg.rel_tol = a.tol;
    return cfg;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    return out;
}

void write_text(const std::string& path, const std::string& text) {
    auto out = open_out(path);
    out << text;
    if (!out) throw Error("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------

struct SplitArgs {
    DataArgs data;
    double train_fraction = 0.6;
    std::uint64_t seed = 0;
    std::string train_out;
    std::string test_out;
    std::string manifest;
};

void cmd_split(const SplitArgs& a, std::ostream& out) {
    LoadReport rep;
    const auto ds = load_csv(std::filesystem::path(a.data.data), a.data.task_col, a.data.outcome_col, &rep);
    const auto [train, test] = stratified_split(ds, a.train_fraction, a.seed);
    write_csv(std::filesystem::path(a.train_out), train, a.data.task_col, a.data.outcome_col);
    write_csv(std::filesystem::path(a.test_out), test, a.data.task_col, a.data.outcome_col);
    if (!a.manifest.empty()) {
        Json m;
        m["seed"] = a.seed;
        m["train_fraction"] = a.train_fraction;
        m["rows_read"] = rep.rows_read;
        m["dropped_missing_outcome"] = rep.dropped_missing_outcome;
        Json tasks = Json::array();
        for (std::size_t t = 0; t < ds.tasks.size(); ++t) {
            tasks.push_back({{"task", ds.tasks[t].label},
                             {"n", ds.tasks[t].rows()},
                             {"train", train.tasks[t].rows()},
                             {"test", test.tasks[t].rows()}});
        }
        m["tasks"] = std::move(tasks);
        write_text(a.manifest, m.dump(2) + "\n");
    }
    out << "split " << ds.total_rows() << " rows in " << ds.num_tasks() << " tasks: "
        << train.total_rows() << " train, " << test.total_rows() << " test";
    if (rep.dropped_missing_outcome) out << " (" << rep.dropped_missing_outcome << " rows dropped: missing outcome)";
    out << '\n';
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    DataArgs data;
    SolverArgs solver;
    std::string model = "mtl";
    std::optional<double> lambda;
    double rho1 = 1.0;
    double rho2 = 1.0;
    std::optional<int> k;
    std::string setting = "individual";
    std::string penalty = "none";
    bool intercept = false;
    bool scale_outcome = false;
    std::string scale_data;
    std::uint64_t seed = 0;
    std::string out;
    std::string trace;
};

void print_trace_tail(std::ostream& err, const SolveTrace& t) {
    if (t.iterations == 0) return;
    err << "last iterations (iteration, objective, gamma):\n";
    const int from = std::max(0, t.iterations - 5);
    for (int l = from; l < t.iterations; ++l) {
        const auto i = static_cast<std::size_t>(l);
        err << "  " << l + 1 << ", " << format_number(t.objective_per_iter[i]) << ", "
            << format_number(t.gamma_per_iter[i]) << '\n';
    }
}

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    const auto raw = load_csv(std::filesystem::path(a.data.data), a.data.task_col, a.data.outcome_col);
    ScalingParams scaling;
    if (a.scale_data.empty()) {
        scaling = fit_scaling(raw, a.scale_outcome);
    } else {
        const auto full = load_csv(std::filesystem::path(a.scale_data), a.data.task_col, a.data.outcome_col);
        scaling = fit_scaling(align_features(full, raw.feature_names), a.scale_outcome);
    }
    const auto ds = apply_scale(raw, scaling);
    const auto cfg = solver_config(a.solver);

    AnyModel model;
    const SolveTrace* trace = nullptr;
    try {
        if (a.model == "mtl") {
            if (!a.lambda) throw InvalidArgument("--model mtl needs --lambda");
            MtlOptions opts;
            opts.fit_intercept = a.intercept;
            auto m = fit_mtl(ds, *a.lambda, cfg, opts);
            m.scaling = scaling;
            model = std::move(m);
            trace = &std::get<MtlModel>(model).trace;
        } else if (a.model == "cmtl") {
            if (!a.k) throw InvalidArgument("--model cmtl needs --k");
            if (a.intercept) throw InvalidArgument("--intercept is not supported for cmtl");
            CmtlParams params{a.rho1, a.rho2, *a.k};
            CmtlOptions<double> opts;
            opts.kmeans_seed = a.seed;
            auto m = fit_cmtl(ds, params, cfg, opts);
            m.scaling = scaling;
            model = std::move(m);
            trace = &std::get<ClusteredModel>(model).trace;
        } else if (a.model == "stl") {
            StlSpec spec;
            spec.setting = parse_stl_setting(a.setting);
            spec.penalty = parse_stl_penalty(a.penalty);
            if (spec.penalty != StlPenalty::None && !a.lambda) {
                throw InvalidArgument("--penalty " + a.penalty + " needs --lambda");
            }
            spec.lambda = spec.penalty == StlPenalty::None ? 0.0 : *a.lambda;
            spec.fit_intercept = a.intercept;
            auto m = fit_stl(ds, spec, cfg);
            m.scaling = scaling;
            model = std::move(m);
            const auto& traces = std::get<StlModel>(model).traces;
            if (traces.size() == 1) trace = &traces.front();
        } else {
            throw InvalidArgument("unknown --model '" + a.model + "' (expected mtl|cmtl|stl)");
        }
    } catch (const SolverFailure& e) {
        err << "solver failed: " << e.what() << '\n';
        print_trace_tail(err, e.trace);
        throw;
    }
    save_model(a.out, model);
    if (!a.trace.empty()) {
        auto f = open_out(a.trace);
        if (trace) {
            write_trace_csv(f, *trace);
        } else {
            // Individual STL: one block per task.
            const auto& m = std::get<StlModel>(model);
            f << "task,";
            for (std::size_t t = 0; t < m.traces.size(); ++t) {
                std::ostringstream one;
                write_trace_csv(one, m.traces[t]);
                std::istringstream lines(one.str());
                std::string line;
                std::getline(lines, line);
                if (t == 0) f << line << '\n';
                while (std::getline(lines, line)) f << csv_escape(m.task_labels[t]) << ',' << line << '\n';
            }
        }
    }
    out << "trained " << model_kind(model) << " model on " << ds.num_tasks() << " tasks x "
        << ds.num_features() << " features -> " << a.out << '\n';
    if (const auto* c = std::get_if<ClusteredModel>(&model)) {
        out << "cluster assignments:";
        for (std::size_t t = 0; t < c->assignments.size(); ++t) {
            out << ' ' << c->task_labels[t] << '=' << c->assignments[t];
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    DataArgs data;
    std::vector<std::string> models;
    std::vector<std::string> names;
    std::string total = "pooled";
    std::string out;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    if (!a.names.empty() && a.names.size() != a.models.size()) {
        throw InvalidArgument("--name must be given once per --model");
    }
    TotalMode mode;
    if (a.total == "pooled") mode = TotalMode::Pooled;
    else if (a.total == "mean") mode = TotalMode::MeanOfTasks;
    else throw InvalidArgument("unknown --total '" + a.total + "' (expected pooled|mean)");

    const auto raw = load_csv(std::filesystem::path(a.data.data), a.data.task_col, a.data.outcome_col);
    std::vector<std::pair<std::string, MaeReport>> methods;
    std::optional<MultiTaskDataset> reference;
    for (std::size_t i = 0; i < a.models.size(); ++i) {
        const auto model = load_model(a.models[i]);
        MultiTaskDataset test;
        try {
            test = align_features(raw, feature_names(model));
        } catch (const SchemaError& e) {
            throw SchemaError(a.data.data + " vs model " + a.models[i] + ": " + e.what());
        }
        if (!reference) reference = test;
        const auto name = a.names.empty() ? std::filesystem::path(a.models[i]).stem().string() : a.names[i];
        methods.emplace_back(name, evaluate(model, test, mode));
    }
    std::ostringstream table;
    write_mae_table(table, *reference, methods);
    if (a.out.empty()) {
        out << table.str();
    } else {
        write_text(a.out, table.str());
        out << "wrote MAE report for " << methods.size() << " model(s) -> " << a.out << '\n';
    }
}

// ---------------------------------------------------------------------------

struct RiskArgs {
    std::string model;
    int top = 10;
    std::string levels;
    std::string categories;
    std::string out_json;
    std::string out_csv;
};

RiskLevels parse_levels(const std::string& text) {
    RiskLevels lv{false, false, false};
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "task") lv.task = true;
        else if (item == "cluster") lv.cluster = true;
        else if (item == "population") lv.population = true;
        else if (!item.empty()) throw InvalidArgument("unknown level '" + item + "' (expected task|cluster|population)");
    }
    if (!lv.task && !lv.cluster && !lv.population) throw InvalidArgument("--levels selects nothing");
    return lv;
}

void cmd_riskfactors(const RiskArgs& a, std::ostream& out) {
    const auto model = load_model(a.model);
    const auto* clustered = std::get_if<ClusteredModel>(&model);
    const auto levels = parse_levels(!a.levels.empty() ? a.levels
                                     : clustered       ? "task,cluster,population"
                                                       : "task,population");
    if (levels.cluster && !clustered) {
        throw InvalidArgument("the cluster level needs a cmtl model; '" + a.model + "' is " +
                              model_kind(model));
    }
    std::optional<std::vector<int>> assignments;
    if (clustered) assignments = clustered->assignments;
    // --top larger than the feature count lists every feature.
    const int top = std::min(a.top, static_cast<int>(feature_names(model).size()));
    auto report = build_risk_report(weights(model), feature_names(model), task_labels(model),
                                    top, levels, assignments);
    if (!a.categories.empty()) report.categories = load_categories(a.categories);
    if (!a.out_json.empty()) write_text(a.out_json, to_json(report).dump(2) + "\n");
    std::ostringstream csv;
    write_risk_csv(csv, report);
    if (!a.out_csv.empty()) write_text(a.out_csv, csv.str());
    if (a.out_json.empty() && a.out_csv.empty()) out << csv.str();
    else out << "wrote risk-factor report (top " << top << ")\n";
}

// ---------------------------------------------------------------------------

struct ClustersArgs {
    std::string model;
    std::string out;
};

void cmd_clusters(const ClustersArgs& a, std::ostream& out) {
    const auto model = load_model(a.model);
    const auto* c = std::get_if<ClusteredModel>(&model);
    if (!c) throw InvalidArgument("'" + a.model + "' is a " + model_kind(model) + " model, not cmtl");
    std::ostringstream csv;
    write_clusters_csv(csv, *c);
    if (a.out.empty()) out << csv.str();
    else write_text(a.out, csv.str());
}

// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Expands `--config FILE` into explicit arguments placed before the user's
/// own, so flags given on the command line win (options take the last value).
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
    std::vector<std::string> out{args.front()};
    std::vector<std::string> rest;
    std::string config;
    CLI::App* sub = nullptr;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (!sub && args[i].rfind("-", 0) != 0) {
            sub = app.get_subcommand_no_throw(args[i]);
            out.push_back(args[i]);
            continue;
        }
        if (args[i] == "--config" && i + 1 < args.size()) {
            config = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (!config.empty()) {
        if (!sub) throw InvalidArgument("--config must follow a command");
        std::ifstream in(config);
        if (!in) throw Error("cannot open config file '" + config + "'");
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            line = trim(line);
            if (line.empty() || line[0] == '#' || line[0] == ';') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw ParseError(config + ":" + std::to_string(line_no) + ": expected key=value");
            }
            auto key = trim(line.substr(0, eq));
            const auto value = trim(line.substr(eq + 1));
            if (key.rfind("--", 0) == 0) key.erase(0, 2);
            const auto* opt = sub->get_option_no_throw("--" + key);
            if (!opt) throw InvalidArgument(config + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
            if (opt->get_expected_min() == 0) {
                if (value == "true" || value == "1" || value.empty()) out.push_back("--" + key);
                else if (value != "false" && value != "0") {
                    throw InvalidArgument(config + ":" + std::to_string(line_no) + ": '" + key + "' is a flag (true|false)");
                }
            } else {
                out.push_back("--" + key);
                out.push_back(value);
            }
        }
    }
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-task regression with joint feature selection and task clustering", "mdmtl"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    std::string config_path;  // consumed by expand_config; declared for --help

    SplitArgs split;
    auto* s = app.add_subcommand("split", "Stratified per-task train/test split");
    add_data_options(s, split.data);
    s->add_option("--train-fraction", split.train_fraction, "Share of each task used for training")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    s->add_option("--seed", split.seed, "Shuffle seed")->capture_default_str();
    s->add_option("--train-out", split.train_out, "Train CSV to write")->required();
    s->add_option("--test-out", split.test_out, "Test CSV to write")->required();
    s->add_option("--manifest", split.manifest, "JSON manifest with seed and per-task counts");
    s->add_option("--config", config_path, "key=value file of defaults for this command (explicit flags win)");

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Fit a model on (MinMax-scaled) training data");
    add_data_options(t, train.data);
    add_solver_options(t, train.solver);
    t->add_option("--model", train.model, "mtl | cmtl | stl")->capture_default_str();
    t->add_option("--lambda", train.lambda, "Penalty weight (mtl, stl ridge/lasso)");
    t->add_option("--rho1", train.rho1, "Cluster-structure weight (cmtl)")->capture_default_str();
    t->add_option("--rho2", train.rho2, "Shrinkage weight (cmtl)")->capture_default_str();
    t->add_option("--k", train.k, "Number of task clusters (cmtl)");
    t->add_option("--setting", train.setting, "global | individual (stl)")->capture_default_str();
    t->add_option("--penalty", train.penalty, "none | ridge | lasso (stl)")->capture_default_str();
    t->add_flag("--intercept", train.intercept, "Fit an unpenalized per-task intercept (mtl, stl)");
    t->add_flag("--scale-outcome", train.scale_outcome, "MinMax-scale the outcome as well");
    t->add_option("--scale-data", train.scale_data,
                  "Fit the scaling on this CSV (e.g. the full data) instead of the training file");
    t->add_option("--seed", train.seed, "k-means seed for cluster extraction (cmtl)")->capture_default_str();
    t->add_option("--out", train.out, "Model JSON to write")->required();
    t->add_option("--trace", train.trace, "Per-iteration solver trace CSV");
    t->add_option("--config", config_path, "key=value file of defaults for this command (explicit flags win)");

    EvaluateArgs eval;
    auto* e = app.add_subcommand("evaluate", "Per-task and total MAE of one or more models");
    add_data_options(e, eval.data);
    e->add_option("--model", eval.models, "Model JSON (repeatable)")
        ->required()
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    e->add_option("--name", eval.names, "Column name per model (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    e->add_option("--total", eval.total, "pooled | mean")->capture_default_str();
    e->add_option("--out", eval.out, "Report CSV (stdout when omitted)");
    e->add_option("--config", config_path, "key=value file of defaults for this command (explicit flags win)");

    RiskArgs risk;
    auto* r = app.add_subcommand("riskfactors", "Rank risk factors at task, cluster and population level");
    r->add_option("--model", risk.model, "Model JSON")->required();
    r->add_option("--top", risk.top, "Factors per task")->capture_default_str()->check(CLI::PositiveNumber);
    r->add_option("--levels", risk.levels,
                  "Comma list of task, cluster, population (default: all the model supports)");
    r->add_option("--categories", risk.categories, "CSV mapping feature -> category");
    r->add_option("--out-json", risk.out_json, "Report JSON");
    r->add_option("--out-csv", risk.out_csv, "Report CSV (stdout when no output is given)");
    r->add_option("--config", config_path, "key=value file of defaults for this command (explicit flags win)");

    ClustersArgs clusters;
    auto* c = app.add_subcommand("clusters", "Dump cluster assignments and the relaxed cluster matrix");
    c->add_option("--model", clusters.model, "cmtl model JSON")->required();
    c->add_option("--out", clusters.out, "CSV (stdout when omitted)");
    c->add_option("--config", config_path, "key=value file of defaults for this command (explicit flags win)");

    try {
        if (const char* threads = std::getenv("MDMTL_THREADS")) {
            Eigen::setNbThreads(std::max(1, std::atoi(threads)));
        }
        auto expanded = expand_config(args, app);
        std::vector<std::string> reversed(expanded.rbegin(), expanded.rend() - 1);
        try {
            app.parse(reversed);
        } catch (const CLI::ParseError& pe) {
            return app.exit(pe, out, err);
        }
        if (s->parsed()) cmd_split(split, out);
        else if (t->parsed()) cmd_train(train, out, err);
        else if (e->parsed()) cmd_evaluate(eval, out);
        else if (r->parsed()) cmd_riskfactors(risk, out);
        else if (c->parsed()) cmd_clusters(clusters, out);
        return 0;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
}

}  // namespace mdmtl::cli
