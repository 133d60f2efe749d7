#include <mdmtl/riskfactors.hpp>

#include <doctest.h>

#include "synthetic.hpp"

#include <algorithm>
#include <set>

using namespace mdmtl;

namespace {

const std::vector<std::string> kNames{"f0", "f1", "f2", "f3", "f4"};

std::vector<std::string> names_of(const std::vector<RankedFactor>& r) {
    std::vector<std::string> out;
    for (const auto& f : r) out.push_back(f.feature_name);
    return out;
}

}  // namespace

TEST_CASE("rank_task_rfs orders by absolute weight") {
    MatrixXd W(1, 3);
    W << 0, -5, 2;
    const auto r = rank_task_rfs(W, 0, 2, {"a", "b", "c"});
    REQUIRE(r.size() == 2);
    CHECK(r[0].feature_name == "b");
    CHECK(r[0].score == 5.0);
    CHECK(r[0].rank == 1);
    CHECK(r[1].feature_name == "c");
    CHECK(r[1].rank == 2);
}

TEST_CASE("rank_task_rfs ties and completeness") {
    const MatrixXd Z = MatrixXd::Zero(2, 5);
    CHECK(names_of(rank_task_rfs(Z, 1, 3, kNames)) == std::vector<std::string>{"f0", "f1", "f2"});
    std::mt19937_64 rng(1);
    const MatrixXd W = synth::gaussian(rng, 2, 5);
    auto all = names_of(rank_task_rfs(W, 0, 5, kNames));
    std::sort(all.begin(), all.end());
    CHECK(all == kNames);
    CHECK_THROWS_AS(rank_task_rfs(W, 2, 1, kNames), InvalidArgument);
    CHECK_THROWS_AS(rank_task_rfs(W, 0, 6, kNames), InvalidArgument);
    CHECK_THROWS_AS(rank_task_rfs(W, 0, 0, kNames), InvalidArgument);
}

TEST_CASE("rank_task_rfs is invariant under positive scaling") {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 50; ++rep) {
        const MatrixXd W = synth::gaussian(rng, 3, 5);
        const double c = synth::uniform_real(rng, 0.01, 100);
        for (int t = 0; t < 3; ++t) {
            const auto a = rank_task_rfs(W, t, 4, kNames);
            const auto b = rank_task_rfs(MatrixXd(c * W), t, 4, kNames);
            CHECK(names_of(a) == names_of(b));
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(b[i].score == doctest::Approx(c * a[i].score));
                if (i) CHECK(a[i].score <= a[i - 1].score);
            }
        }
    }
}

TEST_CASE("aggregate_population counts shares") {
    const std::vector<std::vector<std::string>> lists{{"f2", "f0"}, {"f2", "f1"}, {"f2", "f4"}, {"f3", "f0"}};
    const auto pop = aggregate_population(lists, kNames);
    REQUIRE(pop.size() == 5);
    CHECK(pop[0].feature_name == "f2");
    CHECK(pop[0].share_count == 3);
    CHECK(pop[1].feature_name == "f0");
    CHECK(pop[1].share_count == 2);
    CHECK(pop[2].feature_name == "f1");
    CHECK(pop[3].feature_name == "f3");
    CHECK(pop[4].feature_name == "f4");

    const auto disjoint = aggregate_population({{"f3"}, {"f1"}, {"f0"}}, kNames);
    REQUIRE(disjoint.size() == 3);
    CHECK(disjoint[0].feature_name == "f0");
    CHECK(disjoint[2].feature_name == "f3");
    for (const auto& s : disjoint) CHECK(s.share_count == 1);

    const auto full = aggregate_population({{"f1"}, {"f1"}}, kNames);
    CHECK(full[0].share_count == 2);
    CHECK_THROWS_AS(aggregate_population({{"nope"}}, kNames), InvalidArgument);
}

TEST_CASE("aggregate_population is invariant to task order") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const MatrixXd W = synth::gaussian(rng, 6, 5);
        std::vector<std::vector<std::string>> lists;
        for (int t = 0; t < 6; ++t) lists.push_back(names_of(rank_task_rfs(W, t, 2, kNames)));
        auto shuffled = lists;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto a = aggregate_population(lists, kNames), b = aggregate_population(shuffled, kNames);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].feature_name == b[i].feature_name);
            CHECK(a[i].share_count == b[i].share_count);
        }
    }
}

TEST_CASE("aggregate_cluster_level groups features by cluster set") {
    // Tasks 0,1 in cluster 0; task 2 in cluster 1; task 3 in cluster 2.
    const std::vector<std::vector<std::string>> lists{{"f0", "f1"}, {"f0", "f2"}, {"f0", "f3"}, {"f0", "f1"}};
    const auto groups = aggregate_cluster_level(lists, {0, 0, 1, 2}, kNames);
    REQUIRE(groups.size() == 4);
    CHECK(groups[0].clusters == std::vector<int>{0, 1, 2});
    CHECK(groups[0].features == std::vector<std::string>{"f0"});
    CHECK(groups[1].clusters == std::vector<int>{0, 2});
    CHECK(groups[1].features == std::vector<std::string>{"f1"});
    CHECK(groups[2].clusters == std::vector<int>{0});
    CHECK(groups[2].features == std::vector<std::string>{"f2"});
    CHECK(groups[3].clusters == std::vector<int>{1});
    CHECK_THROWS_AS(aggregate_cluster_level(lists, {0, 1}, kNames), DimensionError);
}

TEST_CASE("aggregate_cluster_level with one task per cluster reduces to task lists") {
    const std::vector<std::vector<std::string>> lists{{"f0"}, {"f1"}, {"f2"}};
    const auto groups = aggregate_cluster_level(lists, {0, 1, 2}, kNames);
    REQUIRE(groups.size() == 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(groups[static_cast<std::size_t>(c)].clusters == std::vector<int>{c});
        CHECK(groups[static_cast<std::size_t>(c)].features == lists[static_cast<std::size_t>(c)]);
    }
}

TEST_CASE("every clustered feature is listed by a member task") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        const MatrixXd W = synth::gaussian(rng, 6, 5);
        std::vector<std::vector<std::string>> lists;
        std::vector<int> assign;
        for (int t = 0; t < 6; ++t) {
            lists.push_back(names_of(rank_task_rfs(W, t, 2, kNames)));
            assign.push_back(synth::uniform_int(rng, 0, 2));
        }
        for (const auto& g : aggregate_cluster_level(lists, assign, kNames)) {
            for (const auto& f : g.features) {
                for (int c : g.clusters) {
                    bool found = false;
                    for (int t = 0; t < 6; ++t) {
                        const auto& l = lists[static_cast<std::size_t>(t)];
                        found = found || (assign[static_cast<std::size_t>(t)] == c && std::find(l.begin(), l.end(), f) != l.end());
                    }
                    CHECK(found);
                }
            }
        }
    }
}

TEST_CASE("vote_merge_stl") {
    const std::vector<std::string> a{"f2", "f0", "f1"}, b{"f2", "f1", "f0"}, c{"f2", "f3", "f4"},
        d{"f4", "f3", "f2"}, e{"f0", "f1", "f2"}, f{"f1", "f0", "f3"};
    const auto merged = vote_merge_stl({a, b, c, d, e, f}, 3, kNames);
    CHECK(merged.front() == "f2");

    const std::vector<std::string> same{"f3", "f1", "f4", "f0"};
    CHECK(vote_merge_stl({same, same, same}, 3, kNames) == std::vector<std::string>{"f3", "f1", "f4"});

    // Reversed pair: rank 1 ties f0/f4 -> f0; rank 2 ties f1/f3 -> f1.
    const std::vector<std::string> fwd{"f0", "f1", "f2", "f3", "f4"}, rev{"f4", "f3", "f2", "f1", "f0"};
    CHECK(vote_merge_stl({fwd, rev}, 2, kNames) == std::vector<std::string>{"f0", "f1"});

    CHECK_THROWS_AS(vote_merge_stl({}, 2, kNames), InvalidArgument);
}

TEST_CASE("vote_merge_stl advances past already-picked candidates") {
    // Position 3 only offers f2 and f0, both taken, so each ranking votes for
    // its next unpicked entry (f3, f4); the tie goes to f3.
    const std::vector<std::string> r1{"f0", "f4", "f2", "f3"}, r2{"f1", "f2", "f0", "f4"};
    const auto m = vote_merge_stl({r1, r2}, 3, kNames);
    CHECK(m == std::vector<std::string>{"f0", "f2", "f3"});
}

TEST_CASE("vote_merge_stl output has no duplicates and length min(top_k, J)") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<std::vector<std::string>> rankings;
        const int m = synth::uniform_int(rng, 1, 6);
        for (int i = 0; i < m; ++i) {
            auto r = kNames;
            std::shuffle(r.begin(), r.end(), rng);
            rankings.push_back(r);
        }
        const int k = synth::uniform_int(rng, 1, 8);
        const auto out = vote_merge_stl(rankings, k, kNames);
        CHECK(out.size() == static_cast<std::size_t>(std::min(k, 5)));
        CHECK(std::set<std::string>(out.begin(), out.end()).size() == out.size());
    }
}

TEST_CASE("build_risk_report levels") {
    std::mt19937_64 rng(6);
    const MatrixXd W = synth::gaussian(rng, 4, 5);
    const std::vector<std::string> labels{"a", "b", "c", "d"};
    const auto pop_only = build_risk_report(W, kNames, labels, 2, RiskLevels{false, false, true});
    CHECK(pop_only.per_task.empty());
    CHECK(!pop_only.per_cluster);
    CHECK(!pop_only.population.empty());
    const auto all = build_risk_report(W, kNames, labels, 2, RiskLevels{true, true, true}, std::vector<int>{0, 1, 0, 1});
    CHECK(all.per_task.size() == 4);
    CHECK(all.per_cluster.has_value());
    for (const auto& s : all.population) {
        CHECK(s.share_count >= 1);
        CHECK(s.share_count <= 4);
    }
    CHECK_THROWS_AS(build_risk_report(W, kNames, labels, 2, RiskLevels{true, true, true}), InvalidArgument);
}
