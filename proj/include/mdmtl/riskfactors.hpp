#pragma once

// Risk-factor ranking: per-task top-k features by absolute weight, and their
// aggregation to population and cluster levels. All ties resolve to the lower
// feature index so reports are reproducible.

#include <mdmtl/core.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace mdmtl {

struct RankedFactor {
    std::size_t feature_index = 0;
    std::string feature_name;
    double score = 0.0;  // |weight|
    int rank = 0;        // 1-based
};

struct SharedFactor {
    std::size_t feature_index = 0;
    std::string feature_name;
    int share_count = 0;  // number of tasks listing the feature
};

/// Features listed by tasks from exactly the clusters in `clusters`.
struct ClusterGroup {
    std::vector<int> clusters;  // ascending cluster ids
    std::vector<std::string> features;
};

/// Top-k features of one task's weight row by |w|, ties by feature index.
template <typename Derived>
std::vector<RankedFactor> rank_task_rfs(const Eigen::MatrixBase<Derived>& W, Eigen::Index task_index,
                                        int top_k, const std::vector<std::string>& feature_names) {
    const auto J = W.cols();
    if (task_index < 0 || task_index >= W.rows()) {
        throw InvalidArgument("rank_task_rfs: task index " + std::to_string(task_index) +
                              " out of range");
    }
    if (top_k < 1 || top_k > J) {
        throw InvalidArgument("rank_task_rfs: top_k must lie in [1, " + std::to_string(J) + "]");
    }
    detail::require_dims(static_cast<Eigen::Index>(feature_names.size()) == J,
                         "rank_task_rfs: feature name count does not match weights");
    std::vector<std::size_t> order(static_cast<std::size_t>(J));
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto score = [&](std::size_t j) {
        return static_cast<double>(std::abs(W(task_index, static_cast<Eigen::Index>(j))));
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
    std::vector<RankedFactor> out;
    for (int r = 0; r < top_k; ++r) {
        const auto j = order[static_cast<std::size_t>(r)];
        out.push_back({j, feature_names[j], score(j), r + 1});
    }
    return out;
}

/// Counts, for each feature, the tasks whose list contains it. Sorted by count
/// descending, then feature index.
std::vector<SharedFactor> aggregate_population(
    const std::vector<std::vector<std::string>>& per_task_top,
    const std::vector<std::string>& feature_names);

/// Groups features by the set of clusters whose member tasks list them.
/// Larger cluster sets come first; equal sizes order by the cluster ids.
std::vector<ClusterGroup> aggregate_cluster_level(
    const std::vector<std::vector<std::string>>& per_task_top, const std::vector<int>& assignments,
    const std::vector<std::string>& feature_names);

/// Plurality vote across rankings, one pick per rank position. At position r
/// each ranking votes for its entry at r unless already picked; if none of
/// those survive, each ranking votes for its next unpicked entry after r.
/// Ties go to the lower feature index. Stops early if the rankings run out.
std::vector<std::string> vote_merge_stl(const std::vector<std::vector<std::string>>& rankings,
                                        int top_k, const std::vector<std::string>& feature_names);

struct RiskLevels {
    bool task = true;
    bool cluster = false;
    bool population = true;
};

struct RiskReport {
    int top_k = 10;
    std::vector<std::string> task_labels;
    std::vector<std::vector<RankedFactor>> per_task;  // empty when the level is off
    std::vector<SharedFactor> population;
    std::optional<std::vector<ClusterGroup>> per_cluster;
    std::vector<int> assignments;                  // set with per_cluster
    std::map<std::string, std::string> categories; // optional feature -> category
};

/// Full report for a T x J weight matrix. `assignments` is required when the
/// cluster level is requested.
RiskReport build_risk_report(const MatrixXd& W, const std::vector<std::string>& feature_names,
                             const std::vector<std::string>& task_labels, int top_k,
                             const RiskLevels& levels,
                             const std::optional<std::vector<int>>& assignments = std::nullopt);

}  // namespace mdmtl
