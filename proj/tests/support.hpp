#pragma once

#include "rerank/engine.hpp"
#include "rerank/workload.hpp"

#include <atomic>
#include <map>
#include <random>

namespace rtest {

using namespace rerank;

/// Schema with numeric attributes x0..x(m-1) on [0, span] plus a categorical
/// "tag" with labels {p, q}.
inline Schema numeric_schema(std::size_t m, double span = 100.0) {
    std::vector<AttributeSchema> attrs;
    for (std::size_t i = 0; i < m; ++i)
        attrs.push_back({"x" + std::to_string(i), AttributeKind::numeric_continuous, 0.0, span, {}, 0.0});
    attrs.push_back({"tag", AttributeKind::categorical, 0, 0, {"p", "q"}, 0.0});
    return Schema(std::move(attrs));
}

inline std::string id_of(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "r%04zu", i);
    return buf;
}

/// Random tuples on an integer grid of `levels` values per attribute, so
/// ties are frequent.
inline std::vector<Tuple> grid_tuples(const Schema& s, std::size_t n, int levels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tuple> out;
    for (std::size_t i = 0; i < n; ++i) {
        Tuple t{id_of(i), {}};
        for (std::size_t a = 0; a < s.size(); ++a) {
            if (s[a].numeric()) {
                int step = std::uniform_int_distribution<int>(0, levels - 1)(rng);
                double span = s[a].domain_max - s[a].domain_min;
                t.values.push_back(s[a].domain_min + span * step / std::max(1, levels - 1));
            } else {
                t.values.push_back(s[a].categories[std::uniform_int_distribution<std::size_t>(0, s[a].categories.size() - 1)(rng)]);
            }
        }
        out.push_back(std::move(t));
    }
    return out;
}

/// Drops rows whose values already occur `k` times, so every value
/// combination stays reachable through a k-limited interface.
inline std::vector<Tuple> cap_duplicates(std::vector<Tuple> data, std::size_t k) {
    std::map<std::vector<Value>, std::size_t> seen;
    std::erase_if(data, [&](const Tuple& t) { return ++seen[t.values] > k; });
    return data;
}

inline std::shared_ptr<Simulator> simulator(const Schema& s, std::vector<Tuple> data, std::size_t k,
                                            SystemRanking ranking, std::string id = "sim") {
    SimulatorConfig cfg;
    cfg.dataset = std::move(data);
    cfg.k = k;
    cfg.system_ranking = std::move(ranking);
    return std::make_shared<Simulator>(std::move(id), "test source", s, std::move(cfg));
}

/// Wraps a source and counts every search() that reaches it.
class CountingSource final : public TopKSource {
public:
    explicit CountingSource(std::shared_ptr<TopKSource> inner) : inner_(std::move(inner)) {}
    TopKResponse search(const SearchQuery& q) override {
        calls_.fetch_add(1);
        return inner_->search(q);
    }
    const SourceDescriptor& describe() const override { return inner_->describe(); }
    std::string snapshot_version() override { return inner_->snapshot_version(); }
    std::uint64_t calls() const { return calls_.load(); }

private:
    std::shared_ptr<TopKSource> inner_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Fails the first `failures` searches with a transient error, or every
/// search with a hard error when `hard` is set.
class FlakySource final : public TopKSource {
public:
    FlakySource(std::shared_ptr<TopKSource> inner, int failures, bool hard = false)
        : inner_(std::move(inner)), failures_(failures), hard_(hard) {}
    TopKResponse search(const SearchQuery& q) override {
        attempts_.fetch_add(1);
        if (hard_) throw Error(ErrorCode::source, "backend rejected the query");
        if (failures_.fetch_sub(1) > 0) throw Error(ErrorCode::transient_source, "try again");
        return inner_->search(q);
    }
    const SourceDescriptor& describe() const override { return inner_->describe(); }
    std::string snapshot_version() override {
        if (unreachable) throw Error(ErrorCode::transient_source, "unreachable");
        return inner_->snapshot_version();
    }
    int attempts() const { return attempts_.load(); }
    bool unreachable = false;

private:
    std::shared_ptr<TopKSource> inner_;
    std::atomic<int> failures_;
    bool hard_;
    std::atomic<int> attempts_{0};
};

/// One executor + meter + channel over a source.
struct Rig {
    explicit Rig(std::shared_ptr<TopKSource> src, DenseStore* store = nullptr, EngineOptions opt = {},
                 RateLimit limit = {8, {}})
        : source(std::move(src)), exec(Executor::Options{4, 3, std::chrono::milliseconds(1)}) {
        exec.register_source(source, limit);
        channel = std::make_unique<QueryChannel>(exec, source->describe().source_id, meter, &session, store, opt);
    }
    std::shared_ptr<TopKSource> source;
    Executor exec;
    QueryMeter meter;
    SessionCache session{"s"};
    std::unique_ptr<QueryChannel> channel;
};

inline std::vector<std::string> ids(const std::vector<ScoredTuple>& v, std::size_t limit = SIZE_MAX) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size() && i < limit; ++i) out.push_back(v[i].tuple.id);
    return out;
}

inline std::vector<std::string> ids(const std::vector<Tuple>& v) {
    std::vector<std::string> out;
    for (const auto& t : v) out.push_back(t.id);
    return out;
}

inline std::vector<ScoredTuple> drain(RankedCursor& c, std::size_t depth) {
    std::vector<ScoredTuple> out;
    while (out.size() < depth) {
        auto t = c.next();
        if (!t) break;
        out.push_back(std::move(*t));
    }
    return out;
}

} // namespace rtest
