#include <mdmtl/csv.hpp>
#include <mdmtl/dataset.hpp>

#include <doctest.h>

#include "synthetic.hpp"

#include <algorithm>
#include <sstream>

using namespace mdmtl;

namespace {

MultiTaskDataset one_task(const MatrixXd& X, const VectorXd& Y) {
    MultiTaskDataset ds;
    ds.feature_names = synth::feature_names(X.cols());
    ds.tasks.push_back({"a", X, Y});
    return ds;
}

MultiTaskDataset load(const std::string& text, LoadReport* rep = nullptr) {
    std::istringstream in(text);
    return load_csv(in, "task", "y", rep);
}

}  // namespace

TEST_CASE("load_csv groups rows by task in order of first appearance") {
    LoadReport rep;
    const auto ds = load("task,y,a,b\nB,1,1,2\nA,2,3,4\nB,3,5,6\nA,,7,8\n", &rep);
    REQUIRE(ds.num_tasks() == 2);
    CHECK(ds.task_labels() == std::vector<std::string>{"B", "A"});
    CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(ds.tasks[0].rows() == 2);
    CHECK(ds.tasks[0].X(1, 0) == 5);
    CHECK(ds.tasks[1].rows() == 1);
    CHECK(ds.tasks[1].Y(0) == 2);
    CHECK(rep.rows_read == 4);
    CHECK(rep.dropped_missing_outcome == 1);
}

TEST_CASE("load_csv minimal input") {
    const auto ds = load("task,y,x\nonly,1.5,2\n");
    CHECK(ds.num_tasks() == 1);
    CHECK(ds.num_features() == 1);
    CHECK(ds.tasks[0].rows() == 1);
}

TEST_CASE("load_csv handles quoting and CRLF") {
    const auto ds = load("task,y,\"x,1\"\r\n\"a \"\"q\"\"\",1,2\r\n");
    CHECK(ds.feature_names[0] == "x,1");
    CHECK(ds.tasks[0].label == "a \"q\"");
}

TEST_CASE("load_csv errors") {
    CHECK_THROWS_WITH_AS(load("t,y,x\na,1,2\n"), doctest::Contains("'task'"), SchemaError);
    CHECK_THROWS_WITH_AS(load("task,out,x\na,1,2\n"), doctest::Contains("'y'"), SchemaError);
    CHECK_THROWS_AS(load("task,y,x,x\na,1,2,3\n"), SchemaError);
    CHECK_THROWS_WITH_AS(load("task,y,x\na,1,abc\n"), doctest::Contains("column 'x'"), ParseError);
    CHECK_THROWS_AS(load("task,y,x\na,1,\n"), ParseError);
    CHECK_THROWS_AS(load("task,y,x\na,1\n"), ParseError);
    CHECK_THROWS_AS(load("task,y,x\na,,1\nb,2,3\n"), DegenerateTaskError);
}

TEST_CASE("write_csv output reloads identically") {
    std::mt19937_64 rng(3);
    auto ds = synth::random_tasks(rng, 3, 4, 5);
    ds.tasks[1].label = "with,comma";
    std::ostringstream out;
    write_csv(out, ds, "task", "y");
    const auto back = load(out.str());
    REQUIRE(back.num_tasks() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(back.tasks[t].label == ds.tasks[t].label);
        CHECK(back.tasks[t].X == ds.tasks[t].X);
        CHECK(back.tasks[t].Y == ds.tasks[t].Y);
    }
}

TEST_CASE("format_number round-trips") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = synth::gaussian(rng, 1, 1, 1e3)(0, 0);
        CHECK(std::stod(format_number(x)) == x);
    }
    CHECK(format_number(0.5) == "0.5");
}

TEST_CASE("minmax_scale maps endpoints and handles constant columns") {
    MatrixXd X(3, 3);
    X << 2, 7, 0.0, 4, 7, 0.5, 6, 7, 1.0;
    const auto [scaled, params] = minmax_scale(one_task(X, VectorXd::Zero(3)));
    const MatrixXd& S = scaled.tasks[0].X;
    CHECK(S(0, 0) == 0.0);
    CHECK(S(1, 0) == 0.5);
    CHECK(S(2, 0) == 1.0);
    CHECK(S.col(1).isZero(0));
    CHECK((S.col(2) - X.col(2)).cwiseAbs().maxCoeff() <= 1e-15);

    // Re-applying stored params to fresh values of a constant column gives 0.
    MatrixXd Z(1, 3);
    Z << 5, 123, 0.25;
    const auto again = apply_scale(one_task(Z, VectorXd::Zero(1)), params);
    CHECK(again.tasks[0].X(0, 1) == 0.0);
}

TEST_CASE("apply_scale extrapolates and checks dimensions") {
    ScalingParams p;
    p.feature_min = VectorXd::Constant(1, 0.0);
    p.feature_max = VectorXd::Constant(1, 10.0);
    MatrixXd X(2, 1);
    X << 5, 12;
    const auto s = apply_scale(one_task(X, VectorXd::Zero(2)), p);
    CHECK(s.tasks[0].X(0, 0) == doctest::Approx(0.5));
    CHECK(s.tasks[0].X(1, 0) == doctest::Approx(1.2));
    CHECK_THROWS_AS(apply_scale(one_task(MatrixXd::Zero(1, 2), VectorXd::Zero(1)), p), DimensionError);
}

TEST_CASE("scaling pools every task and round-trips") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        auto ds = synth::random_tasks(rng, 3, 5, 7);
        for (auto& t : ds.tasks) t.X = t.X * 100.0 + MatrixXd::Constant(t.X.rows(), t.X.cols(), 40.0);
        const auto [scaled, params] = minmax_scale(ds, true);
        double lo = 1e300, hi = -1e300;
        for (const auto& t : scaled.tasks) {
            lo = std::min(lo, t.X.minCoeff());
            hi = std::max(hi, t.X.maxCoeff());
        }
        CHECK(lo == 0.0);
        CHECK(hi == doctest::Approx(1.0).epsilon(1e-15));
        const auto back = invert_scale(scaled, params);
        for (std::size_t t = 0; t < ds.tasks.size(); ++t) {
            CHECK((back.tasks[t].X - ds.tasks[t].X).cwiseAbs().maxCoeff() <= 1e-12 * 200);
            CHECK((back.tasks[t].Y - ds.tasks[t].Y).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("stratified_split sizes") {
    std::mt19937_64 rng(5);
    const auto ds = synth::random_tasks(rng, 3, 2, 10);
    const auto [train, test] = stratified_split(ds, 0.6, 42);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(train.tasks[t].rows() == 6);
        CHECK(test.tasks[t].rows() == 4);
    }
    const auto two = synth::random_tasks(rng, 2, 2, 2);
    const auto [a, b] = stratified_split(two, 0.5, 0);
    CHECK(a.tasks[0].rows() == 1);
    CHECK(b.tasks[1].rows() == 1);
}

TEST_CASE("stratified_split partitions each task and is deterministic") {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        const auto T = synth::uniform_int(rng, 1, 5);
        std::vector<Eigen::Index> rows;
        for (int t = 0; t < T; ++t) rows.push_back(synth::uniform_int(rng, 2, 30));
        const auto ds = synth::linear_tasks(rng, synth::gaussian(rng, T, 3), rows, 1.0);
        const double frac = synth::uniform_real(rng, 0.05, 0.95);
        const auto seed = static_cast<std::uint64_t>(rng());
        const auto s1 = split_indices(ds, frac, seed);
        const auto s2 = split_indices(ds, frac, seed);
        CHECK(s1.train == s2.train);
        CHECK(s1.test == s2.test);
        for (int t = 0; t < T; ++t) {
            auto all = s1.train[static_cast<std::size_t>(t)];
            all.insert(all.end(), s1.test[static_cast<std::size_t>(t)].begin(), s1.test[static_cast<std::size_t>(t)].end());
            std::sort(all.begin(), all.end());
            std::vector<Eigen::Index> expect(static_cast<std::size_t>(rows[static_cast<std::size_t>(t)]));
            for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = static_cast<Eigen::Index>(i);
            CHECK(all == expect);
            CHECK(!s1.train[static_cast<std::size_t>(t)].empty());
            CHECK(!s1.test[static_cast<std::size_t>(t)].empty());
        }
    }
}

TEST_CASE("stratified_split rejects single-row tasks and bad fractions") {
    std::mt19937_64 rng(7);
    const auto ds = synth::linear_tasks(rng, synth::gaussian(rng, 2, 2), {3, 1}, 1.0);
    CHECK_THROWS_AS(stratified_split(ds, 0.6, 0), DegenerateTaskError);
    const auto ok = synth::random_tasks(rng, 1, 2, 4);
    CHECK_THROWS_AS(stratified_split(ok, 1.0, 0), InvalidArgument);
}

TEST_CASE("split differs across seeds") {
    std::mt19937_64 rng(8);
    const auto ds = synth::random_tasks(rng, 1, 2, 40);
    CHECK(split_indices(ds, 0.6, 1).train != split_indices(ds, 0.6, 2).train);
}

TEST_CASE("align_features reorders by name and names mismatches") {
    MatrixXd X(1, 3);
    X << 1, 2, 3;
    auto ds = one_task(X, VectorXd::Zero(1));
    const auto r = align_features(ds, {"x2", "x0", "x1"});
    CHECK(r.tasks[0].X(0, 0) == 3);
    CHECK(r.tasks[0].X(0, 1) == 1);
    CHECK_THROWS_WITH_AS(align_features(ds, {"x0", "x1", "zz"}), doctest::Contains("'zz'"), SchemaError);
    CHECK_THROWS_WITH_AS(align_features(ds, {"x0", "x1"}), doctest::Contains("'x2'"), SchemaError);
}

TEST_CASE("validate rejects malformed datasets") {
    MultiTaskDataset empty;
    CHECK_THROWS_AS(validate(empty), DegenerateTaskError);
    auto bad = one_task(MatrixXd::Zero(2, 2), VectorXd::Zero(3));
    CHECK_THROWS_AS(validate(bad), DimensionError);
    auto dup = one_task(MatrixXd::Zero(1, 2), VectorXd::Zero(1));
    dup.feature_names = {"a", "a"};
    CHECK_THROWS_AS(validate(dup), SchemaError);
}
