#include <mdmtl/riskfactors.hpp>

#include <set>
#include <unordered_map>

namespace mdmtl {

namespace {

std::unordered_map<std::string, std::size_t> index_of(const std::vector<std::string>& names) {
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t j = 0; j < names.size(); ++j) idx.emplace(names[j], j);
    return idx;
}

std::size_t lookup(const std::unordered_map<std::string, std::size_t>& idx, const std::string& name,
                   const char* where) {
    const auto it = idx.find(name);
    if (it == idx.end()) throw InvalidArgument(std::string(where) + ": unknown feature '" + name + "'");
    return it->second;
}

}  // namespace

std::vector<SharedFactor> aggregate_population(
    const std::vector<std::vector<std::string>>& per_task_top,
    const std::vector<std::string>& feature_names) {
    const auto idx = index_of(feature_names);
    std::vector<int> counts(feature_names.size(), 0);
    for (const auto& list : per_task_top) {
        std::set<std::size_t> listed;
        for (const auto& name : list) listed.insert(lookup(idx, name, "aggregate_population"));
        for (auto j : listed) ++counts[j];
    }
    std::vector<SharedFactor> out;
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        if (counts[j] > 0) out.push_back({j, feature_names[j], counts[j]});
    }
    std::stable_sort(out.begin(), out.end(), [](const SharedFactor& a, const SharedFactor& b) {
        return a.share_count > b.share_count;
    });
    return out;
}

std::vector<ClusterGroup> aggregate_cluster_level(
    const std::vector<std::vector<std::string>>& per_task_top, const std::vector<int>& assignments,
    const std::vector<std::string>& feature_names) {
    if (assignments.size() != per_task_top.size()) {
        throw DimensionError("aggregate_cluster_level: " + std::to_string(assignments.size()) +
                             " assignments for " + std::to_string(per_task_top.size()) + " tasks");
    }
    const auto idx = index_of(feature_names);
    std::vector<std::set<int>> clusters_of(feature_names.size());
    for (std::size_t t = 0; t < per_task_top.size(); ++t) {
        for (const auto& name : per_task_top[t]) {
            clusters_of[lookup(idx, name, "aggregate_cluster_level")].insert(assignments[t]);
        }
    }
    std::map<std::vector<int>, std::vector<std::string>> groups;
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        if (clusters_of[j].empty()) continue;
        groups[{clusters_of[j].begin(), clusters_of[j].end()}].push_back(feature_names[j]);
    }
    std::vector<ClusterGroup> out;
    for (auto& [key, features] : groups) out.push_back({key, std::move(features)});
    // map order is lexicographic on the ids; stable sort keeps it within a size.
    std::stable_sort(out.begin(), out.end(), [](const ClusterGroup& a, const ClusterGroup& b) {
        return a.clusters.size() > b.clusters.size();
    });
    return out;
}

std::vector<std::string> vote_merge_stl(const std::vector<std::vector<std::string>>& rankings,
                                        int top_k, const std::vector<std::string>& feature_names) {
    detail::require(!rankings.empty(), "vote_merge_stl: no rankings");
    detail::require(top_k >= 1, "vote_merge_stl: top_k must be >= 1");
    const auto idx = index_of(feature_names);
    std::vector<std::vector<std::size_t>> ranked;
    for (const auto& r : rankings) {
        std::vector<std::size_t> ids;
        for (const auto& name : r) ids.push_back(lookup(idx, name, "vote_merge_stl"));
        ranked.push_back(std::move(ids));
    }
    std::vector<bool> picked(feature_names.size(), false);
    std::vector<std::string> out;
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(top_k), feature_names.size());
    for (std::size_t r = 0; out.size() < want; ++r) {
        std::map<std::size_t, int> votes;
        for (const auto& ids : ranked) {
            if (r < ids.size() && !picked[ids[r]]) ++votes[ids[r]];
        }
        if (votes.empty()) {
            for (const auto& ids : ranked) {
                for (std::size_t p = r + 1; p < ids.size(); ++p) {
                    if (!picked[ids[p]]) {
                        ++votes[ids[p]];
                        break;
                    }
                }
            }
        }
        if (votes.empty()) {
            for (const auto& ids : ranked) {
                for (auto id : ids) {
                    if (!picked[id]) {
                        ++votes[id];
                        break;
                    }
                }
            }
        }
        if (votes.empty()) break;
        // std::map iterates in index order, so the first maximum wins ties.
        auto best = votes.begin();
        for (auto it = votes.begin(); it != votes.end(); ++it) {
            if (it->second > best->second) best = it;
        }
        picked[best->first] = true;
        out.push_back(feature_names[best->first]);
    }
    return out;
}

RiskReport build_risk_report(const MatrixXd& W, const std::vector<std::string>& feature_names,
                             const std::vector<std::string>& task_labels, int top_k,
                             const RiskLevels& levels,
                             const std::optional<std::vector<int>>& assignments) {
    detail::require_dims(static_cast<Eigen::Index>(task_labels.size()) == W.rows(),
                         "build_risk_report: task label count does not match weights");
    RiskReport report;
    report.top_k = top_k;
    report.task_labels = task_labels;
    std::vector<std::vector<RankedFactor>> ranked;
    std::vector<std::vector<std::string>> names;
    for (Eigen::Index t = 0; t < W.rows(); ++t) {
        ranked.push_back(rank_task_rfs(W, t, top_k, feature_names));
        std::vector<std::string> list;
        for (const auto& f : ranked.back()) list.push_back(f.feature_name);
        names.push_back(std::move(list));
    }
    if (levels.population) report.population = aggregate_population(names, feature_names);
    if (levels.cluster) {
        if (!assignments) {
            throw InvalidArgument("build_risk_report: the cluster level needs cluster assignments");
        }
        report.per_cluster = aggregate_cluster_level(names, *assignments, feature_names);
        report.assignments = *assignments;
    }
    if (levels.task) report.per_task = std::move(ranked);
    return report;
}

}  // namespace mdmtl
