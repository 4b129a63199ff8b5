#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace rtest;

namespace {

std::shared_ptr<Simulator> hundred(std::size_t k) {
    Schema s = numeric_schema(1, 100);
    std::vector<Tuple> data;
    for (int i = 1; i <= 100; ++i) data.push_back({id_of(i), {double(i), std::string(i % 2 ? "p" : "q")}});
    return simulator(s, data, k, SystemRanking::lexicographic({{"x0", true}}));
}

std::vector<Tuple> brute(const Simulator& sim, const SearchQuery& q) {
    std::vector<Tuple> out;
    for (const auto& t : sim.system_ranked())
        if (matches(sim.describe().schema, q, t)) out.push_back(t);
    return out;
}

} // namespace

TEST(Simulator, UnrestrictedQueryOverflows) {
    auto sim = hundred(10);
    auto r = sim->search({});
    EXPECT_EQ(r.tuples.size(), 10u);
    EXPECT_TRUE(r.overflow());
    EXPECT_EQ(r.tuples.front().number(0), 100.0);
}

TEST(Simulator, NoMatchesIsCompleteAndEmpty) {
    auto r = hundred(10)->search({{Predicate::range("x0", 200, 300)}});
    EXPECT_TRUE(r.tuples.empty());
    EXPECT_TRUE(r.complete());
}

TEST(Simulator, ExactlyKMatchesIsComplete) {
    auto r = hundred(10)->search({{Predicate::range("x0", 1, 10)}});
    EXPECT_EQ(r.tuples.size(), 10u);
    EXPECT_TRUE(r.complete());
}

TEST(Simulator, UnknownAttributeIsSchemaError) {
    try {
        hundred(10)->search({{Predicate::range("nope", 1, 10)}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::schema);
    }
}

TEST(Simulator, DescriptorsOfDemoSources) {
    std::set<std::string> names;
    Schema diamonds = diamonds_schema(), homes = homes_schema();
    for (const auto& a : diamonds.attributes()) names.insert(a.name);
    EXPECT_EQ(names, (std::set<std::string>{"price", "carat", "depth", "table", "cut", "color", "clarity", "shape"}));
    names.clear();
    for (const auto& a : homes.attributes()) names.insert(a.name);
    for (const char* n : {"price", "squarefeet", "bedrooms", "zip"}) EXPECT_TRUE(names.contains(n));
    auto empty = simulator(numeric_schema(1), {}, 7, SystemRanking::linear({{"x0", 1}}));
    EXPECT_EQ(empty->describe().k, 7u);
    EXPECT_TRUE(empty->search({}).complete());
}

TEST(Simulator, RejectsDuplicateIdsAndBadTuples) {
    Schema s = numeric_schema(1);
    EXPECT_THROW(simulator(s, {{"a", {1.0, std::string("p")}}, {"a", {2.0, std::string("p")}}}, 5, {}), Error);
    EXPECT_THROW(simulator(s, {{"a", {500.0, std::string("p")}}}, 5, {}), Error);
    EXPECT_THROW(simulator(s, {}, 0, {}), Error);
}

TEST(Simulator, SnapshotVersion) {
    auto sim = hundred(10);
    auto v1 = sim->snapshot_version();
    EXPECT_EQ(v1, sim->snapshot_version());
    sim->insert({"new", {50.5, std::string("p")}});
    EXPECT_NE(v1, sim->snapshot_version());
    sim->erase("new");
    EXPECT_EQ(v1, sim->snapshot_version());
}

TEST(Simulator, VersionOfRestoredDatasetMatches) {
    auto w = generate_workload({300, 2, 10, Correlation::independent, 0.1, 3});
    auto dir = std::filesystem::temp_directory_path() / "rerank_restore_test";
    std::filesystem::remove_all(dir);
    write_workload(w, dir);
    auto loaded = load_simulator(parse_json(read_file((dir / "source.json").string()), "source"), dir, "synthetic", "x");
    EXPECT_EQ(loaded->snapshot_version(), make_simulator(w)->snapshot_version());
    // Row order in the file does not matter.
    auto shuffled = w.dataset;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(1));
    SimulatorConfig cfg;
    cfg.dataset = shuffled;
    cfg.system_ranking = w.system_ranking;
    EXPECT_EQ(Simulator("s", "s", w.schema, cfg).snapshot_version(), loaded->snapshot_version());
    std::filesystem::remove_all(dir);
}

TEST(SimulatorProperty, PrefixStatusContainmentDeterminism) {
    Schema s = numeric_schema(2, 10);
    auto data = grid_tuples(s, 400, 11, 21);
    auto sim = simulator(s, data, 7, SystemRanking::linear({{"x0", 0.3}, {"x1", -0.8}}));
    std::mt19937_64 rng(22);
    for (int i = 0; i < 300; ++i) {
        double lo = std::uniform_int_distribution<int>(0, 10)(rng);
        double hi = std::uniform_int_distribution<int>(static_cast<int>(lo), 10)(rng);
        SearchQuery q{{Predicate::range(rng() % 2 ? "x0" : "x1", lo, hi, rng() % 2, rng() % 2)}};
        if (rng() % 3 == 0) q.predicates.push_back(Predicate::equals("tag", std::string("q")));
        q = canonicalize(s, q);
        auto r = sim->search(q);
        auto all = brute(*sim, q);
        std::size_t expect = std::min<std::size_t>(7, all.size());
        ASSERT_EQ(r.tuples.size(), expect);
        for (std::size_t j = 0; j < expect; ++j) EXPECT_EQ(r.tuples[j].id, all[j].id);
        EXPECT_EQ(r.overflow(), all.size() > 7);
        for (const auto& t : r.tuples) EXPECT_TRUE(matches(s, q, t));
        EXPECT_EQ(ids(sim->search(q).tuples), ids(r.tuples));
    }
}

// Executor

TEST(Executor, SingleSubmitIsSequential) {
    Rig rig(hundred(10));
    rig.exec.submit("sim", {}, rig.meter);
    auto m = rig.meter.snapshot();
    EXPECT_EQ(m.total, 1u);
    EXPECT_EQ(m.sequential, 1u);
    EXPECT_EQ(m.parallel_batch, 0u);
}

TEST(Executor, RetriedQueryCountsOnce) {
    auto flaky = std::make_shared<FlakySource>(hundred(10), 2);
    Rig rig(flaky);
    EXPECT_NO_THROW(rig.exec.submit("sim", {}, rig.meter));
    EXPECT_EQ(flaky->attempts(), 3);
    EXPECT_EQ(rig.meter.snapshot().total, 1u);
}

TEST(Executor, TransientErrorSurfacesAfterBoundedRetries) {
    auto flaky = std::make_shared<FlakySource>(hundred(10), 100);
    Rig rig(flaky);
    try {
        rig.exec.submit("sim", {}, rig.meter);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::transient_source);
    }
    EXPECT_EQ(flaky->attempts(), 4);
    EXPECT_EQ(rig.meter.snapshot().total, 1u);
}

TEST(Executor, UnregisteredSourceIsConfigError) {
    Executor exec;
    QueryMeter m;
    try {
        exec.submit("ghost", {}, m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::config);
    }
}

TEST(Executor, BatchOfOneCountsAsParallel) {
    Rig rig(hundred(10));
    rig.exec.submit_batch({{SearchQuery{}}, "sim", 1}, rig.meter);
    auto m = rig.meter.snapshot();
    EXPECT_EQ(m.parallel_batch, 1u);
    EXPECT_EQ(m.sequential, 0u);
    EXPECT_EQ(m.parallel_fraction(), 1.0);
}

TEST(Executor, BatchHonoursMaxInFlightAndKeepsOrder) {
    Schema s = numeric_schema(1, 100);
    std::vector<Tuple> data;
    for (int i = 1; i <= 100; ++i) data.push_back({id_of(i), {double(i), std::string("p")}});
    SimulatorConfig cfg;
    cfg.dataset = data;
    cfg.system_ranking = SystemRanking::linear({{"x0", 1}});
    cfg.per_query_delay = std::chrono::milliseconds(5);
    auto sim = std::make_shared<Simulator>("sim", "slow", s, cfg);
    Executor exec(Executor::Options{8, 3, std::chrono::milliseconds(1)});
    exec.register_source(sim, RateLimit{4, {}});
    QueryMeter meter;
    Batch b{{}, "sim", 1};
    for (int i = 0; i < 10; ++i) b.queries.push_back({{Predicate::range("x0", 10.0 * i + 1, 10.0 * i + 10)}});
    auto out = exec.submit_batch(b, meter);
    ASSERT_EQ(out.size(), 10u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(out[i].tuples.front().number(0), 10.0 * i + 1);
    EXPECT_LE(sim->max_in_flight_observed(), 4);
    EXPECT_GE(sim->max_in_flight_observed(), 2);
    EXPECT_EQ(meter.snapshot().parallel_batch, 10u);
}

TEST(Executor, BatchFailsAtomically) {
    auto bad = std::make_shared<FlakySource>(hundred(10), 0, true);
    Rig rig(bad);
    Batch b{{SearchQuery{}, SearchQuery{}, SearchQuery{}}, "sim", 1};
    try {
        rig.exec.submit_batch(b, rig.meter);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::source);
    }
}

TEST(Executor, MinGapSpacesDispatches) {
    auto sim = hundred(10);
    Executor exec(Executor::Options{4, 3, std::chrono::milliseconds(1)});
    exec.register_source(sim, RateLimit{4, std::chrono::milliseconds(10)});
    QueryMeter meter;
    auto start = std::chrono::steady_clock::now();
    exec.submit_batch({{SearchQuery{}, SearchQuery{}, SearchQuery{}, SearchQuery{}}, "sim", 1}, meter);
    EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(30));
}

TEST(ExecutorProperty, ConservationUnderMixedLoad) {
    Rig rig(hundred(10));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        if (rng() % 2) rig.exec.submit("sim", {}, rig.meter);
        else {
            Batch b{{}, "sim", 1};
            b.queries.resize(1 + rng() % 6);
            rig.exec.submit_batch(b, rig.meter);
        }
        auto m = rig.meter.snapshot();
        ASSERT_EQ(m.total, m.sequential + m.parallel_batch);
    }
}
