#pragma once

// JSON model files and CSV report writers.
//
// Model documents carry `format_version`, a `model` discriminator
// ("mtl" | "cmtl" | "stl"), dimensions, names, row-major weights, the scaling
// parameters fitted on the training data and a solver trace summary.

#include <mdmtl/baselines.hpp>
#include <mdmtl/cmtl.hpp>
#include <mdmtl/l21.hpp>
#include <mdmtl/riskfactors.hpp>

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <variant>

namespace mdmtl {

using Json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;

using AnyModel = std::variant<MtlModel, ClusteredModel, StlModel>;

Json to_json(const MtlModel& model);
Json to_json(const ClusteredModel& model);
Json to_json(const StlModel& model);
Json to_json(const AnyModel& model);

/// Throws SchemaError on a malformed or unsupported document.
AnyModel model_from_json(const Json& doc);

void save_model(const std::filesystem::path& path, const AnyModel& model);
AnyModel load_model(const std::filesystem::path& path);

const char* model_kind(const AnyModel& model);
const std::vector<std::string>& feature_names(const AnyModel& model);
const std::vector<std::string>& task_labels(const AnyModel& model);
const MatrixXd& weights(const AnyModel& model);
MaeReport evaluate(const AnyModel& model, const MultiTaskDataset& test,
                   TotalMode mode = TotalMode::Pooled);

const char* to_string(StlSetting s);
const char* to_string(StlPenalty p);
StlSetting parse_stl_setting(const std::string& s);
StlPenalty parse_stl_penalty(const std::string& s);

/// iteration, objective, smooth, surrogate, gamma, alpha, momentum, backtracks
void write_trace_csv(std::ostream& out, const SolveTrace& trace);

/// One row per task plus TOTAL: task, n, outcome mean, outcome sd, then an
/// MAE column (and an SD column when present) per method.
void write_mae_table(std::ostream& out, const MultiTaskDataset& test,
                     const std::vector<std::pair<std::string, MaeReport>>& methods);

Json to_json(const RiskReport& report);
/// Flat rows: level, group, rank, feature, category, value.
void write_risk_csv(std::ostream& out, const RiskReport& report);

/// task, cluster, then the row of C.
void write_clusters_csv(std::ostream& out, const ClusteredModel& model);

/// Two-column CSV (feature, category) with a header row.
std::map<std::string, std::string> load_categories(const std::filesystem::path& path);

}  // namespace mdmtl
