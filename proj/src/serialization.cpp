#include <mdmtl/csv.hpp>
#include <mdmtl/serialization.hpp>

#include <fstream>
#include <ostream>

namespace mdmtl {

namespace {

Json matrix_row_major(const MatrixXd& M) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        for (Eigen::Index j = 0; j < M.cols(); ++j) arr.push_back(M(i, j));
    }
    return arr;
}

Json vector_json(const VectorXd& v) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

MatrixXd matrix_from(const Json& arr, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols) {
        throw SchemaError(std::string("model: '") + what + "' must hold " +
                          std::to_string(rows * cols) + " numbers");
    }
    MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = arr.at(static_cast<std::size_t>(i * cols + j)).get<double>();
    }
    return M;
}

VectorXd vector_from(const Json& arr, Eigen::Index n, const char* what) {
    return matrix_from(arr, n, 1, what).col(0);
}

Json scaling_json(const std::optional<ScalingParams>& s) {
    if (!s) return nullptr;
    Json j;
    j["feature_min"] = vector_json(s->feature_min);
    j["feature_max"] = vector_json(s->feature_max);
    if (s->outcome) j["outcome"] = Json::array({s->outcome->first, s->outcome->second});
    else j["outcome"] = nullptr;
    return j;
}

std::optional<ScalingParams> scaling_from(const Json& j, Eigen::Index J) {
    if (j.is_null()) return std::nullopt;
    ScalingParams s;
    s.feature_min = vector_from(j.at("feature_min"), J, "scaling.feature_min");
    s.feature_max = vector_from(j.at("feature_max"), J, "scaling.feature_max");
    const auto& o = j.at("outcome");
    if (!o.is_null()) s.outcome = std::make_pair(o.at(0).get<double>(), o.at(1).get<double>());
    return s;
}

Json trace_summary(const SolveTrace& t) {
    Json j;
    j["iterations"] = t.iterations;
    j["converged"] = t.converged;
    j["initial_objective"] = t.initial_objective;
    j["best_objective"] = t.best_objective;
    j["best_iteration"] = t.best_iteration;
    return j;
}

SolveTrace trace_from(const Json& j) {
    SolveTrace t;
    t.iterations = j.at("iterations").get<int>();
    t.converged = j.at("converged").get<bool>();
    t.initial_objective = j.at("initial_objective").get<double>();
    t.best_objective = j.at("best_objective").get<double>();
    t.best_iteration = j.at("best_iteration").get<int>();
    return t;
}

Json header(const char* kind, const MatrixXd& W, const std::vector<std::string>& features,
            const std::vector<std::string>& tasks) {
    Json j;
    j["format_version"] = kModelFormatVersion;
    j["model"] = kind;
    j["n_tasks"] = W.rows();
    j["n_features"] = W.cols();
    j["feature_names"] = features;
    j["task_labels"] = tasks;
    return j;
}

template <typename Model>
void read_common(const Json& doc, Model& m) {
    const auto T = doc.at("n_tasks").get<Eigen::Index>();
    const auto J = doc.at("n_features").get<Eigen::Index>();
    m.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    m.task_labels = doc.at("task_labels").get<std::vector<std::string>>();
    if (static_cast<Eigen::Index>(m.feature_names.size()) != J ||
        static_cast<Eigen::Index>(m.task_labels.size()) != T) {
        throw SchemaError("model: name lists do not match n_tasks/n_features");
    }
    m.weights = matrix_from(doc.at("weights"), T, J, "weights");
    m.intercept = doc.contains("intercept") ? vector_from(doc.at("intercept"), T, "intercept")
                                            : VectorXd::Zero(T);
    m.scaling = scaling_from(doc.at("scaling"), J);
}

}  // namespace

const char* to_string(StlSetting s) { return s == StlSetting::Global ? "global" : "individual"; }

const char* to_string(StlPenalty p) {
    switch (p) {
        case StlPenalty::Ridge: return "ridge";
        case StlPenalty::Lasso: return "lasso";
        default: return "none";
    }
}

StlSetting parse_stl_setting(const std::string& s) {
    if (s == "global") return StlSetting::Global;
    if (s == "individual") return StlSetting::Individual;
    throw InvalidArgument("unknown STL setting '" + s + "' (expected global|individual)");
}

StlPenalty parse_stl_penalty(const std::string& s) {
    if (s == "none") return StlPenalty::None;
    if (s == "ridge") return StlPenalty::Ridge;
    if (s == "lasso") return StlPenalty::Lasso;
    throw InvalidArgument("unknown STL penalty '" + s + "' (expected none|ridge|lasso)");
}

Json to_json(const MtlModel& m) {
    Json j = header("mtl", m.weights, m.feature_names, m.task_labels);
    j["lambda"] = m.lambda;
    j["fit_intercept"] = m.fit_intercept;
    j["weights"] = matrix_row_major(m.weights);
    j["intercept"] = vector_json(m.intercept);
    j["scaling"] = scaling_json(m.scaling);
    j["trace"] = trace_summary(m.trace);
    return j;
}

Json to_json(const ClusteredModel& m) {
    Json j = header("cmtl", m.weights, m.feature_names, m.task_labels);
    j["rho1"] = m.params.rho1;
    j["rho2"] = m.params.rho2;
    j["k"] = m.params.k;
    j["kmeans_seed"] = m.kmeans_seed;
    j["weights"] = matrix_row_major(m.weights);
    j["cluster_matrix"] = matrix_row_major(m.cluster_matrix);
    j["assignments"] = m.assignments;
    j["scaling"] = scaling_json(m.scaling);
    j["trace"] = trace_summary(m.trace);
    return j;
}

Json to_json(const StlModel& m) {
    Json j = header("stl", m.weights, m.feature_names, m.task_labels);
    j["setting"] = to_string(m.spec.setting);
    j["penalty"] = to_string(m.spec.penalty);
    j["lambda"] = m.spec.lambda;
    j["fit_intercept"] = m.spec.fit_intercept;
    j["weights"] = matrix_row_major(m.weights);
    j["intercept"] = vector_json(m.intercept);
    j["scaling"] = scaling_json(m.scaling);
    Json traces = Json::array();
    for (const auto& t : m.traces) traces.push_back(trace_summary(t));
    j["traces"] = std::move(traces);
    return j;
}

Json to_json(const AnyModel& model) {
    return std::visit([](const auto& m) { return to_json(m); }, model);
}

AnyModel model_from_json(const Json& doc) {
    try {
        const auto version = doc.at("format_version").get<int>();
        if (version != kModelFormatVersion) {
            throw SchemaError("model: unsupported format_version " + std::to_string(version));
        }
        const auto kind = doc.at("model").get<std::string>();
        if (kind == "mtl") {
            MtlModel m;
            read_common(doc, m);
            m.lambda = doc.at("lambda").get<double>();
            m.fit_intercept = doc.at("fit_intercept").get<bool>();
            m.trace = trace_from(doc.at("trace"));
            return m;
        }
        if (kind == "cmtl") {
            ClusteredModel m;
            read_common(doc, m);
            const auto T = m.weights.rows();
            m.params.rho1 = doc.at("rho1").get<double>();
            m.params.rho2 = doc.at("rho2").get<double>();
            m.params.k = doc.at("k").get<int>();
            m.kmeans_seed = doc.at("kmeans_seed").get<std::uint64_t>();
            m.cluster_matrix = matrix_from(doc.at("cluster_matrix"), T, T, "cluster_matrix");
            m.assignments = doc.at("assignments").get<std::vector<int>>();
            if (static_cast<Eigen::Index>(m.assignments.size()) != T) {
                throw SchemaError("model: assignments must have one entry per task");
            }
            m.trace = trace_from(doc.at("trace"));
            return m;
        }
        if (kind == "stl") {
            StlModel m;
            read_common(doc, m);
            m.spec.setting = parse_stl_setting(doc.at("setting").get<std::string>());
            m.spec.penalty = parse_stl_penalty(doc.at("penalty").get<std::string>());
            m.spec.lambda = doc.at("lambda").get<double>();
            m.spec.fit_intercept = doc.at("fit_intercept").get<bool>();
            for (const auto& t : doc.at("traces")) m.traces.push_back(trace_from(t));
            return m;
        }
        throw SchemaError("model: unknown model kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("model: malformed document: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw SchemaError(std::string("model: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const AnyModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << to_json(model).dump(2) << '\n';
    if (!out) throw Error("write to '" + path.string() + "' failed");
}

AnyModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path.string() + ": not valid JSON: " + e.what());
    }
    return model_from_json(doc);
}

const char* model_kind(const AnyModel& model) {
    switch (model.index()) {
        case 0: return "mtl";
        case 1: return "cmtl";
        default: return "stl";
    }
}

const std::vector<std::string>& feature_names(const AnyModel& model) {
    return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.feature_names; }, model);
}

const std::vector<std::string>& task_labels(const AnyModel& model) {
    return std::visit([](const auto& m) -> const std::vector<std::string>& { return m.task_labels; }, model);
}

const MatrixXd& weights(const AnyModel& model) {
    return std::visit([](const auto& m) -> const MatrixXd& { return m.weights; }, model);
}

MaeReport evaluate(const AnyModel& model, const MultiTaskDataset& test, TotalMode mode) {
    return std::visit([&](const auto& m) { return mdmtl::evaluate(m, test, mode); }, model);
}

void write_trace_csv(std::ostream& out, const SolveTrace& t) {
    out << "iteration,objective,smooth,surrogate,gamma,alpha,momentum,backtracks\n";
    for (int l = 0; l < t.iterations; ++l) {
        const auto i = static_cast<std::size_t>(l);
        out << l + 1 << ',' << format_number(t.objective_per_iter[i]) << ','
            << format_number(t.smooth_per_iter[i]) << ',' << format_number(t.surrogate_per_iter[i])
            << ',' << format_number(t.gamma_per_iter[i]) << ',' << format_number(t.alpha_per_iter[i])
            << ',' << format_number(t.momentum_per_iter[i]) << ',' << t.backtracks_per_iter[i] << '\n';
    }
}

void write_mae_table(std::ostream& out, const MultiTaskDataset& test,
                     const std::vector<std::pair<std::string, MaeReport>>& methods) {
    auto mean_sd = [](const VectorXd& y) {
        const double mean = y.mean();
        const double sd = y.size() > 1
                              ? std::sqrt((y.array() - mean).square().sum() / static_cast<double>(y.size() - 1))
                              : 0.0;
        return std::make_pair(mean, sd);
    };
    out << "task,n,outcome_mean,outcome_sd";
    for (const auto& [name, rep] : methods) {
        out << ',' << csv_escape(name);
        bool has_sd = rep.total_sd.has_value();
        if (has_sd) out << ',' << csv_escape(name + "_sd");
    }
    out << '\n';
    auto emit_methods = [&](std::size_t t) {
        for (const auto& [name, rep] : methods) {
            const bool total = t == rep.per_task.size();
            out << ',' << format_number(total ? rep.total : rep.per_task[t].mae);
            if (rep.total_sd) {
                const auto sd = total ? rep.total_sd : rep.per_task[t].sd;
                out << ',' << format_number(sd.value_or(0.0));
            }
        }
        out << '\n';
    };
    for (std::size_t t = 0; t < test.tasks.size(); ++t) {
        const auto& task = test.tasks[t];
        for (const auto& [name, rep] : methods) {
            if (rep.per_task.size() != test.tasks.size() || rep.per_task[t].label != task.label) {
                throw InvalidArgument("write_mae_table: report for '" + name +
                                      "' does not match the test tasks");
            }
        }
        const auto [mean, sd] = mean_sd(task.Y);
        out << csv_escape(task.label) << ',' << task.rows() << ',' << format_number(mean) << ','
            << format_number(sd);
        emit_methods(t);
    }
    const auto [Xall, yall] = pool_tasks(test);
    const auto [mean, sd] = mean_sd(yall);
    out << "TOTAL," << test.total_rows() << ',' << format_number(mean) << ',' << format_number(sd);
    emit_methods(test.tasks.size());
}

Json to_json(const RiskReport& r) {
    auto category = [&](const std::string& f) -> Json {
        const auto it = r.categories.find(f);
        return it == r.categories.end() ? Json(nullptr) : Json(it->second);
    };
    Json j;
    j["top_k"] = r.top_k;
    j["task_labels"] = r.task_labels;
    if (!r.per_task.empty()) {
        Json tasks = Json::array();
        for (std::size_t t = 0; t < r.per_task.size(); ++t) {
            Json factors = Json::array();
            for (const auto& f : r.per_task[t]) {
                factors.push_back({{"rank", f.rank}, {"feature", f.feature_name},
                                   {"feature_index", f.feature_index}, {"score", f.score},
                                   {"category", category(f.feature_name)}});
            }
            tasks.push_back({{"task", r.task_labels[t]}, {"factors", std::move(factors)}});
        }
        j["per_task"] = std::move(tasks);
    }
    if (!r.population.empty()) {
        Json pop = Json::array();
        for (const auto& s : r.population) {
            pop.push_back({{"feature", s.feature_name}, {"feature_index", s.feature_index},
                           {"share_count", s.share_count}, {"category", category(s.feature_name)}});
        }
        j["population"] = std::move(pop);
    }
    if (r.per_cluster) {
        Json groups = Json::array();
        for (const auto& g : *r.per_cluster) {
            groups.push_back({{"clusters", g.clusters}, {"features", g.features}});
        }
        j["assignments"] = r.assignments;
        j["per_cluster"] = std::move(groups);
    }
    return j;
}

void write_risk_csv(std::ostream& out, const RiskReport& r) {
    auto category = [&](const std::string& f) {
        const auto it = r.categories.find(f);
        return it == r.categories.end() ? std::string() : csv_escape(it->second);
    };
    out << "level,group,rank,feature,category,value\n";
    for (std::size_t t = 0; t < r.per_task.size(); ++t) {
        for (const auto& f : r.per_task[t]) {
            out << "task," << csv_escape(r.task_labels[t]) << ',' << f.rank << ','
                << csv_escape(f.feature_name) << ',' << category(f.feature_name) << ','
                << format_number(f.score) << '\n';
        }
    }
    if (r.per_cluster) {
        for (const auto& g : *r.per_cluster) {
            std::string key;
            for (std::size_t i = 0; i < g.clusters.size(); ++i) {
                key += (i ? "|" : "") + std::to_string(g.clusters[i]);
            }
            for (std::size_t i = 0; i < g.features.size(); ++i) {
                out << "cluster," << key << ',' << i + 1 << ',' << csv_escape(g.features[i]) << ','
                    << category(g.features[i]) << ',' << g.clusters.size() << '\n';
            }
        }
    }
    for (std::size_t i = 0; i < r.population.size(); ++i) {
        const auto& s = r.population[i];
        out << "population,all," << i + 1 << ',' << csv_escape(s.feature_name) << ','
            << category(s.feature_name) << ',' << s.share_count << '\n';
    }
}

void write_clusters_csv(std::ostream& out, const ClusteredModel& m) {
    out << "task,cluster";
    for (const auto& label : m.task_labels) out << ",C_" << csv_escape(label);
    out << '\n';
    for (std::size_t t = 0; t < m.task_labels.size(); ++t) {
        out << csv_escape(m.task_labels[t]) << ',' << m.assignments[t];
        for (Eigen::Index j = 0; j < m.cluster_matrix.cols(); ++j) {
            out << ',' << format_number(m.cluster_matrix(static_cast<Eigen::Index>(t), j));
        }
        out << '\n';
    }
}

std::map<std::string, std::string> load_categories(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "' for reading");
    const auto records = read_csv_records(in);
    std::map<std::string, std::string> out;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != 2) {
            throw ParseError(path.string() + ": row " + std::to_string(i + 1) +
                             " must have exactly 2 fields (feature, category)");
        }
        out[records[i][0]] = records[i][1];
    }
    return out;
}

}  // namespace mdmtl
