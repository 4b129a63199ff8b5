#pragma once

// Benchmark harness: every algorithm over every workload, each get-next
// sequence checked against a brute-force sort of the dataset.

#include "rerank/engine.hpp"
#include "rerank/workload.hpp"

#include <chrono>
#include <sstream>

namespace rerank {

inline const std::vector<std::string>& all_algorithms() {
    static const std::vector<std::string> names{"1d-baseline", "1d-binary", "1d-rerank", "md-baseline",
                                                "md-binary",   "md-rerank", "md-ta"};
    return names;
}

inline RankingRequest request_for(const Workload& w, const std::string& algorithm) {
    auto dash = algorithm.find('-');
    if (dash == std::string::npos) throw Error(ErrorCode::config, "unknown algorithm '" + algorithm + "'", "algorithms");
    std::string family = algorithm.substr(0, dash), name = algorithm.substr(dash + 1);
    try {
        if (family == "1d") return Ranking1D{w.designated, Direction::ascending, parse_algorithm_1d(name)};
        if (family == "md") return RankingMD{w.user, parse_algorithm_md(name)};
    } catch (const Error&) {
    }
    throw Error(ErrorCode::config, "unknown algorithm '" + algorithm + "'", "algorithms");
}

struct RunResult {
    std::vector<ScoredTuple> sequence;
    bool exhausted = false;
    QueryMeter::Snapshot cost;
    double wall_ms = 0.0;
};

/// Pulls up to `depth` tuples from a fresh cursor.
inline RunResult run_cursor(QueryChannel& ch, const SearchQuery& base, const RankingRequest& r, std::size_t depth) {
    RunResult out;
    auto before = ch.meter().snapshot();
    auto start = std::chrono::steady_clock::now();
    auto cursor = make_cursor(ch, base, r);
    while (out.sequence.size() < depth) {
        auto t = cursor->next();
        if (!t) {
            out.exhausted = true;
            break;
        }
        out.sequence.push_back(std::move(*t));
    }
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.cost = ch.meter().snapshot() - before;
    return out;
}

/// Exact match of ids against the oracle prefix; a short run must coincide
/// with the end of the match set.
inline bool matches_oracle(const RunResult& r, const std::vector<ScoredTuple>& oracle, std::size_t depth) {
    std::size_t expect = std::min(depth, oracle.size());
    if (r.sequence.size() != expect) return false;
    for (std::size_t i = 0; i < expect; ++i)
        if (r.sequence[i].tuple.id != oracle[i].tuple.id || !(r.sequence[i].score == oracle[i].score)) return false;
    return true;
}

struct BenchRow {
    std::string workload;
    std::string algorithm;
    std::uint64_t queries = 0;
    double parallel_fraction = 0.0;
    double wall_ms = 0.0;
    bool oracle_match = false;
};

struct BenchOptions {
    std::vector<std::string> algorithms = all_algorithms();
    std::size_t depth = 20;
    EngineOptions engine;
    Executor::Options executor{};
    /// Adds a "<algo>-warm" row for every rerank algorithm: the same query
    /// repeated in a fresh session against the dense store of the first run.
    bool warm_rows = true;
};

inline std::vector<BenchRow> bench_workload(const Workload& w, const BenchOptions& opt) {
    auto sim = make_simulator(w);
    Executor exec(opt.executor);
    exec.register_source(sim, RateLimit{8, {}});
    std::vector<BenchRow> rows;
    SearchQuery base;
    for (const auto& algo : opt.algorithms) {
        RankingRequest req = request_for(w, algo);
        auto oracle = oracle_order(w.schema, w.dataset, base, req);
        DenseStore store;
        bool rerank = algo.ends_with("rerank") || algo == "md-ta";
        int runs = rerank && opt.warm_rows ? 2 : 1;
        for (int run = 0; run < runs; ++run) {
            QueryMeter meter;
            QueryChannel ch(exec, sim->describe().source_id, meter, nullptr, rerank ? &store : nullptr, opt.engine);
            BenchRow row{w.spec.name(), run == 0 ? algo : algo + "-warm"};
            try {
                RunResult r = run_cursor(ch, base, req, opt.depth);
                row.queries = r.cost.total;
                row.parallel_fraction = r.cost.parallel_fraction();
                row.wall_ms = r.wall_ms;
                row.oracle_match = matches_oracle(r, oracle, opt.depth);
            } catch (const Error&) {
                row.oracle_match = false;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
    std::ostringstream out;
    out << "workload,algorithm,queries,parallel_fraction,wall_ms,oracle_match\n";
    for (const auto& r : rows) {
        out << r.workload << ',' << r.algorithm << ',' << r.queries << ',' << format_number(r.parallel_fraction) << ','
            << format_number(std::round(r.wall_ms * 1000) / 1000) << ',' << (r.oracle_match ? "true" : "false")
            << '\n';
    }
    return out.str();
}

/// The default suite: every combination of m, k, correlation and density at
/// n = 2000 (54 workloads).
inline std::vector<WorkloadSpec> default_suite(std::uint64_t seed) {
    std::vector<WorkloadSpec> out;
    std::uint64_t s = seed;
    for (std::size_t m : {1, 2, 3})
        for (std::size_t k : {5, 10, 50})
            for (Correlation c : {Correlation::positive, Correlation::negative, Correlation::independent})
                for (double d : {0.0, 0.2}) out.push_back({2000, m, k, c, d, s++});
    return out;
}

} // namespace rerank
