#include "support.hpp"

#include <gtest/gtest.h>

using namespace rtest;

namespace {

constexpr AlgorithmMD kAll[] = {AlgorithmMD::baseline, AlgorithmMD::binary, AlgorithmMD::rerank, AlgorithmMD::ta};

Schema unit_schema(std::size_t m) { return numeric_schema(m, 1.0); }

double area(const std::vector<Box>& boxes) {
    double a = 0;
    for (const auto& b : boxes) {
        double v = 1;
        for (const auto& iv : b.axes) v *= iv.width();
        a += v;
    }
    return a;
}

std::vector<std::string> md_oracle(const Simulator& sim, const SearchQuery& base, const RankingSpec& spec,
                                   std::size_t depth) {
    return ids(oracle_order(sim.describe().schema, sim.dataset(), base, RankingMD{spec}), depth);
}

} // namespace

TEST(CoverContour, OneAxisIsOneBox) {
    Schema s = unit_schema(1);
    Scorer sc(s, RankingSpec{{{"x0", 1}}});
    Box full{{Interval::closed(0, 1)}};
    auto cover = cover_contour({&sc, 0.6}, full, 4);
    ASSERT_EQ(cover.size(), 1u);
    EXPECT_EQ(cover[0].axes[0].lo, 0.0);
    EXPECT_GE(cover[0].axes[0].hi, 0.6);
}

TEST(CoverContour, TwoAxesGranularityTwo) {
    Schema s = unit_schema(2);
    Scorer sc(s, RankingSpec{{{"x0", 1}, {"x1", 1}}});
    Box full{{Interval::closed(0, 1), Interval::closed(0, 1)}};
    auto cells = cover_cells({&sc, 1.0}, full, 2);
    EXPECT_EQ(cells.size(), 3u);
    for (const auto& c : cells) EXPECT_FALSE(c.axes[0].lo == 0.5 && c.axes[1].lo == 0.5);
    auto merged = cover_contour({&sc, 1.0}, full, 2);
    EXPECT_EQ(merged.size(), 2u);
    EXPECT_DOUBLE_EQ(area(merged), 0.75);
}

TEST(CoverContour, BoundAtOrBelowMinimumIsEmpty) {
    Schema s = unit_schema(3);
    Scorer sc(s, RankingSpec{{{"x0", 1}, {"x1", -0.5}, {"x2", 0.25}}});
    Box full{{Interval::closed(0, 1), Interval::closed(0, 1), Interval::closed(0, 1)}};
    EXPECT_TRUE(cover_contour({&sc, min_corner_score(sc, full.axes)}, full, 4).empty());
    EXPECT_EQ(area(cover_contour({&sc, max_corner_score(sc, full.axes) + 1}, full, 4)), 1.0);
}

TEST(CoverContour, NegativeWeightUsesUpperCorner) {
    Schema s = unit_schema(2);
    Scorer sc(s, RankingSpec{{{"x0", -1}, {"x1", -1}}});
    Box full{{Interval::closed(0, 1), Interval::closed(0, 1)}};
    auto cells = cover_cells({&sc, -1.0}, full, 2);
    ASSERT_EQ(cells.size(), 3u);
    for (const auto& c : cells) EXPECT_FALSE(c.axes[0].hi == 0.5 && c.axes[1].hi == 0.5);
}

TEST(CoverProperty, CompletenessAndPruningSoundness) {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t m : {2u, 3u}) {
        Schema s = unit_schema(m);
        for (int trial = 0; trial < 200; ++trial) {
            RankingSpec spec;
            for (std::size_t j = 0; j < m; ++j) {
                int w = static_cast<int>(rng() % 21) - 10;
                spec.terms.push_back({"x" + std::to_string(j), w / 10.0});
            }
            if (std::all_of(spec.terms.begin(), spec.terms.end(), [](const auto& t) { return t.weight == 0; }))
                spec.terms[0].weight = 1;
            Scorer sc(s, spec);
            Box full;
            for (std::size_t j = 0; j < m; ++j) full.axes.push_back(Interval::closed(0, 1));
            std::size_t g = 1 + rng() % 6;
            Contour c{&sc, min_corner_score(sc, full.axes) +
                               u(rng) * (max_corner_score(sc, full.axes) - min_corner_score(sc, full.axes))};
            auto cover = cover_contour(c, full, g);
            auto kept = cover_cells(c, full, g);
            auto all = cover_cells({&sc, std::numeric_limits<double>::infinity()}, full, g);
            std::vector<Box> discarded;
            for (const auto& b : all)
                if (std::find(kept.begin(), kept.end(), b) == kept.end()) discarded.push_back(b);
            for (int p = 0; p < 50; ++p) {
                std::vector<double> pt(m);
                for (auto& x : pt) x = (rng() % 9) / 8.0;
                if (sc.at(pt) >= c.bound) continue;
                ASSERT_TRUE(std::any_of(cover.begin(), cover.end(), [&](const Box& b) { return b.contains(pt); }));
                ASSERT_TRUE(std::none_of(discarded.begin(), discarded.end(), [&](const Box& b) { return b.contains(pt); }));
            }
        }
    }
}

TEST(PartitionSubspaces, ThreeWaySplitIsExact) {
    Schema s = numeric_schema(2, 10);
    Region space = Region::full(s);
    Tuple found{"f", {4.0, 6.0, std::string("p")}};
    auto p = partition_subspaces(space, found, 0);
    for (double x = 0; x <= 10; x += 0.5) {
        Tuple t{"t", {x, 1.0, std::string("p")}};
        int hits = p.lower.matches(t) + p.upper.matches(t) + p.slice.matches(t);
        EXPECT_EQ(hits, 1) << x;
        EXPECT_EQ(p.slice.matches(t), x == 4.0);
        EXPECT_EQ(p.lower.matches(t), x < 4.0);
    }
    Scorer sc(s, RankingSpec{{{"x0", 0.2}, {"x1", -0.9}}});
    EXPECT_EQ(pivot_attribute(sc), 1u);
}

TEST(GetNextMD, SinglePageIsOneQuery) {
    Schema s = numeric_schema(2, 100);
    auto sim = simulator(s, grid_tuples(s, 8, 101, 3), 10, {});
    RankingSpec spec{{{"x0", 0.5}, {"x1", -0.5}}};
    for (auto algo : {AlgorithmMD::baseline, AlgorithmMD::binary, AlgorithmMD::rerank}) {
        Rig rig(sim);
        GetNextMD g(*rig.channel, {}, spec, algo);
        auto t = g.next();
        ASSERT_TRUE(t);
        EXPECT_EQ(t->tuple.id, md_oracle(*sim, {}, spec, 1)[0]);
        EXPECT_EQ(rig.meter.snapshot().total, 1u) << to_string(algo);
    }
}

TEST(GetNextMD, AntiCorrelatedTwoAttributes) {
    auto w = generate_workload({2000, 2, 10, Correlation::negative, 0.0, 8});
    auto sim = make_simulator(w);
    auto expect = md_oracle(*sim, {}, w.user, 10);
    for (auto algo : kAll) {
        Rig rig(sim);
        EXPECT_EQ(ids(drain(*make_cursor(*rig.channel, {}, RankingMD{w.user, algo}), 10)), expect) << to_string(algo);
        EXPECT_GT(rig.meter.snapshot().total, 1u);
    }
}

TEST(GetNextMD, DiamondsFunction) {
    Schema s = diamonds_schema();
    auto sim = simulator(s, generate_diamonds(3000, 5), 20, SystemRanking::linear({{"price", -1}}));
    RankingSpec spec{{{"price", 1}, {"carat", -0.1}, {"depth", -0.5}}};
    SearchQuery base{{Predicate::equals("shape", std::string("round"))}};
    auto expect = md_oracle(*sim, base, spec, 5);
    ASSERT_FALSE(expect.empty());
    for (auto algo : kAll) {
        Rig rig(sim);
        EXPECT_EQ(ids(drain(*make_cursor(*rig.channel, base, RankingMD{spec, algo}), 5)), expect) << to_string(algo);
    }
}

TEST(GetNextMD, RejectsCategoricalAndOutOfRangeWeights) {
    Rig rig(simulator(numeric_schema(2), {}, 5, {}));
    EXPECT_THROW(GetNextMD(*rig.channel, {}, RankingSpec{{{"tag", 1}}}, AlgorithmMD::binary), Error);
    EXPECT_THROW(GetNextMD(*rig.channel, {}, RankingSpec{{{"x0", 1.5}}}, AlgorithmMD::binary), Error);
    EXPECT_FALSE(GetNextMD(*rig.channel, {}, RankingSpec{{{"x0", 1}}}, AlgorithmMD::binary).next());
}

TEST(GetNextMD, RerankWarmSessionIsCheaper) {
    auto w = generate_workload({2000, 2, 10, Correlation::negative, 0.2, 6});
    auto sim = make_simulator(w);
    DenseStore store;
    std::uint64_t cost[2];
    for (int pass = 0; pass < 2; ++pass) {
        Rig rig(sim, &store);
        EXPECT_EQ(ids(drain(*make_cursor(*rig.channel, {}, RankingMD{w.user, AlgorithmMD::rerank}), 20)),
                  md_oracle(*sim, {}, w.user, 20));
        cost[pass] = rig.meter.snapshot().total;
    }
    EXPECT_LT(cost[1], cost[0]);
}

TEST(GetNextMD, VersionChangeBehavesAsColdCache) {
    auto w = generate_workload({1000, 2, 5, Correlation::positive, 0.2, 2});
    auto sim = make_simulator(w);
    DenseStore store;
    {
        Rig rig(sim, &store);
        drain(*make_cursor(*rig.channel, {}, RankingMD{w.user, AlgorithmMD::rerank}), 10);
    }
    sim->insert({"zz-extra", {0.0, 1.0, 2.0, 3.0, std::string("red")}});
    Rig rig(sim, &store);
    EXPECT_EQ(ids(drain(*make_cursor(*rig.channel, {}, RankingMD{w.user, AlgorithmMD::rerank}), 10)),
              md_oracle(*sim, {}, w.user, 10));
}

TEST(GetNextTA, SingleAttributeMatchesOneDimensionalRerank) {
    auto w = generate_workload({800, 1, 5, Correlation::negative, 0.2, 3});
    auto sim = make_simulator(w);
    Rig a(sim), b(sim);
    auto ta = drain(*make_cursor(*a.channel, {}, RankingMD{RankingSpec{{{"a0", 1}}}, AlgorithmMD::ta}), 30);
    auto one = drain(*make_cursor(*b.channel, {}, Ranking1D{"a0", Direction::ascending, Algorithm1D::rerank}), 30);
    EXPECT_EQ(ids(ta), ids(one));
}

TEST(GetNextTA, ProbeThresholdsAreMonotoneAndReturnsSound) {
    auto w = generate_workload({1000, 3, 10, Correlation::independent, 0.2, 9});
    auto sim = make_simulator(w);
    Rig rig(sim);
    GetNextTA ta(*rig.channel, {}, w.user);
    std::vector<std::string> got;
    for (int i = 0; i < 15; ++i) got.push_back(ta.next()->tuple.id);
    EXPECT_EQ(got, md_oracle(*sim, {}, w.user, 15));
    const auto& p = ta.probe();
    EXPECT_TRUE(std::is_sorted(p.thresholds.begin(), p.thresholds.end()));
    ASSERT_EQ(p.returns.size(), 15u);
    for (auto [best, tau] : p.returns) EXPECT_LE(best, tau);
}

TEST(GetNextMDProperty, AllVariantsEqualTheOracle) {
    std::mt19937_64 rng(404);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t m = 2 + trial % 2;
        Schema s = numeric_schema(m, 32);
        int levels = trial % 4 == 0 ? 4 : 33;
        std::size_t k = std::vector<std::size_t>{3, 5, 10}[rng() % 3];
        auto data = cap_duplicates(grid_tuples(s, 60 + rng() % 300, levels, rng()), k);
        RankingSpec sys;
        for (std::size_t j = 0; j < m; ++j) sys.terms.push_back({"x" + std::to_string(j), (int(rng() % 21) - 10) / 10.0});
        auto sim = simulator(s, data, k, SystemRanking::linear(sys.terms));
        RankingSpec spec;
        for (std::size_t j = 0; j < m; ++j) spec.terms.push_back({"x" + std::to_string(j), (int(rng() % 21) - 10) / 10.0});
        spec.terms[rng() % m].weight = rng() % 2 ? 1.0 : -1.0;
        SearchQuery base;
        if (rng() % 2) base.predicates.push_back(Predicate::equals("tag", std::string("q")));
        if (rng() % 2) base.predicates.push_back(Predicate::range("x0", 4, 28, rng() % 2, rng() % 2));
        auto expect = md_oracle(*sim, base, spec, 20);
        DenseStore store;
        for (auto algo : kAll) {
            Rig rig(sim, &store);
            ASSERT_EQ(ids(drain(*make_cursor(*rig.channel, base, RankingMD{spec, algo}), 20)), expect)
                << "trial " << trial << " " << to_string(algo);
            auto mt = rig.meter.snapshot();
            ASSERT_EQ(mt.total, mt.sequential + mt.parallel_batch);
        }
    }
}
