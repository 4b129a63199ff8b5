#pragma once

// Seeded synthetic workloads: a dataset, the simulator's system ranking, and
// the user ranking it is correlated with.

#include "rerank/simulator.hpp"

#include <cmath>
#include <random>
#include <set>

namespace rerank {

enum class Correlation { positive, negative, independent };

inline const char* to_string(Correlation c) {
    switch (c) {
    case Correlation::positive: return "positive";
    case Correlation::negative: return "negative";
    case Correlation::independent: return "independent";
    }
    return "?";
}

inline Correlation parse_correlation(const std::string& s) {
    if (s == "positive") return Correlation::positive;
    if (s == "negative") return Correlation::negative;
    if (s == "independent") return Correlation::independent;
    throw Error(ErrorCode::config, "unknown correlation '" + s + "'", "correlation");
}

struct WorkloadSpec {
    std::size_t n = 2000;
    std::size_t m = 2;
    std::size_t k = 10;
    Correlation correlation = Correlation::independent;
    double dense_fraction = 0.0;
    std::uint64_t seed = 1;

    void validate() const {
        if (m < 1 || m > 4) throw Error(ErrorCode::config, "m must be in 1..4", "m");
        if (k < 1) throw Error(ErrorCode::config, "k must be >= 1", "k");
        if (!(dense_fraction >= 0.0 && dense_fraction < 1.0))
            throw Error(ErrorCode::config, "dense_fraction must be in [0,1)", "dense_fraction");
    }

    std::string name() const {
        char buf[160];
        std::snprintf(buf, sizeof buf, "n%zu-m%zu-k%zu-%s-d%g-s%llu", n, m, k, to_string(correlation), dense_fraction,
                      static_cast<unsigned long long>(seed));
        return buf;
    }
};

inline json workload_to_json(const WorkloadSpec& w) {
    return {{"n", w.n},
            {"m", w.m},
            {"k", w.k},
            {"correlation", to_string(w.correlation)},
            {"dense_fraction", w.dense_fraction},
            {"seed", w.seed}};
}

inline WorkloadSpec workload_from_json(const json& j) {
    WorkloadSpec w;
    try {
        w.n = j.value("n", w.n);
        w.m = j.value("m", w.m);
        w.k = j.value("k", w.k);
        w.correlation = parse_correlation(j.value("correlation", std::string("independent")));
        w.dense_fraction = j.value("dense_fraction", w.dense_fraction);
        w.seed = j.value("seed", w.seed);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config, std::string("workload: ") + e.what(), "workload");
    }
    w.validate();
    return w;
}

struct Workload {
    WorkloadSpec spec;
    Schema schema;
    std::vector<Tuple> dataset;
    SystemRanking system_ranking;
    RankingSpec user;        // over a0..a(m-1), a0 weight +1
    std::string designated;  // attribute carrying the dense value
    double dense_value = 0.0;
};

inline constexpr double workload_domain_max = 1000.0;

inline Schema workload_schema() {
    std::vector<AttributeSchema> attrs;
    for (int i = 0; i < 4; ++i)
        attrs.push_back({"a" + std::to_string(i), AttributeKind::numeric_continuous, 0.0, workload_domain_max, {}, 0.0});
    attrs.push_back({"color", AttributeKind::categorical, 0, 0, {"blue", "green", "red"}, 0.0});
    return Schema(std::move(attrs));
}

/// Deterministic for a given WorkloadSpec. Values are multiples of 1/1024 so they survive
/// any text round trip; the designated attribute a0 has exactly
/// round(dense_fraction * n) tuples at its domain minimum and distinct values
/// elsewhere.
inline Workload generate_workload(const WorkloadSpec& spec) {
    spec.validate();
    Workload w;
    w.spec = spec;
    w.schema = workload_schema();
    w.designated = "a0";
    w.dense_value = 0.0;
    std::mt19937_64 rng(spec.seed);
    auto grid = [&](double lo, double hi) {
        std::uniform_int_distribution<long> d(static_cast<long>(lo * 1024), static_cast<long>(hi * 1024));
        return static_cast<double>(d(rng)) / 1024.0;
    };

    auto dense_count = static_cast<std::size_t>(std::llround(spec.dense_fraction * static_cast<double>(spec.n)));
    std::set<double> used_a0;
    const std::vector<std::string> colors{"blue", "green", "red"};
    for (std::size_t i = 0; i < spec.n; ++i) {
        Tuple t;
        char id[32];
        std::snprintf(id, sizeof id, "t%05zu", i);
        t.id = id;
        double a0;
        if (i < dense_count) {
            a0 = w.dense_value;
        } else {
            do a0 = grid(1.0 / 1024, workload_domain_max);
            while (!used_a0.insert(a0).second);
        }
        t.values.push_back(a0);
        for (int j = 1; j < 4; ++j) t.values.push_back(grid(0, workload_domain_max));
        t.values.push_back(colors[std::uniform_int_distribution<std::size_t>(0, 2)(rng)]);
        w.dataset.push_back(std::move(t));
    }
    std::shuffle(w.dataset.begin(), w.dataset.end(), rng);

    w.user.terms.push_back({"a0", 1.0});
    for (std::size_t j = 1; j < spec.m; ++j) {
        int tenths = std::uniform_int_distribution<int>(1, 10)(rng);
        double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
        w.user.terms.push_back({"a" + std::to_string(j), sign * tenths / 10.0});
    }

    std::vector<RankingTerm> sys;
    switch (spec.correlation) {
    case Correlation::positive: sys = w.user.terms; break;
    case Correlation::negative:
        for (const auto& t : w.user.terms) sys.push_back({t.attribute, -t.weight});
        break;
    case Correlation::independent: {
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> v(4);
        double norm = 0;
        for (auto& x : v) {
            x = g(rng);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        for (int j = 0; j < 4; ++j) sys.push_back({"a" + std::to_string(j), v[j] / norm});
        break;
    }
    }
    w.system_ranking = SystemRanking::linear(std::move(sys));
    return w;
}

inline std::shared_ptr<Simulator> make_simulator(const Workload& w, std::string source_id = "synthetic") {
    SimulatorConfig cfg;
    cfg.dataset = w.dataset;
    cfg.k = w.spec.k;
    cfg.system_ranking = w.system_ranking;
    return std::make_shared<Simulator>(std::move(source_id), w.spec.name(), w.schema, std::move(cfg));
}

/// Writes dataset.csv, schema.json, source.json (simulator document) and
/// workload.json (spec plus user ranking) into `dir`.
inline void write_workload(const Workload& w, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::storage, "cannot create '" + dir.string() + "'");
    write_file((dir / "dataset.csv").string(), tuples_to_csv(w.schema, w.dataset));
    write_file((dir / "schema.json").string(), schema_to_json(w.schema).dump(2) + "\n");
    json source = {{"k", w.spec.k},
                   {"system_ranking", system_ranking_to_json(w.system_ranking)},
                   {"delay_ms", 0},
                   {"dataset_path", "dataset.csv"},
                   {"schema_path", "schema.json"}};
    write_file((dir / "source.json").string(), source.dump(2) + "\n");
    json user = json::object();
    for (const auto& t : w.user.terms) user[t.attribute] = t.weight;
    json doc = workload_to_json(w.spec);
    doc["user_weights"] = user;
    doc["designated"] = w.designated;
    doc["dense_value"] = w.dense_value;
    write_file((dir / "workload.json").string(), doc.dump(2) + "\n");
}

/// Reads back a directory written by write_workload.
inline Workload read_workload(const std::filesystem::path& dir) {
    json doc = parse_json(read_file((dir / "workload.json").string()), (dir / "workload.json").string());
    json source = parse_json(read_file((dir / "source.json").string()), (dir / "source.json").string());
    Workload w;
    w.spec = workload_from_json(doc);
    w.schema = load_schema((dir / source.value("schema_path", "schema.json")).string());
    w.dataset = load_dataset(w.schema, (dir / source.value("dataset_path", "dataset.csv")).string());
    try {
        w.spec.k = source.at("k").get<std::size_t>();
        w.system_ranking = system_ranking_from_json(source.at("system_ranking"));
        for (const auto& [name, v] : doc.at("user_weights").items()) w.user.terms.push_back({name, v.get<double>()});
        w.designated = doc.value("designated", "a0");
        w.dense_value = doc.value("dense_value", 0.0);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config, std::string("workload directory: ") + e.what(), dir.string());
    }
    w.user.validate(w.schema);
    return w;
}

// ---------------------------------------------------------------------------
// Demo sources shaped like the two sites the gateway was built for.

inline Schema diamonds_schema() {
    using K = AttributeKind;
    return Schema({{"price", K::numeric_continuous, 200, 50000, {}, 0},
                   {"carat", K::numeric_continuous, 0.2, 5.0, {}, 0},
                   {"depth", K::numeric_continuous, 50, 75, {}, 0},
                   {"table", K::numeric_continuous, 50, 75, {}, 0},
                   {"cut", K::categorical, 0, 0, {"Astor", "Good", "Ideal", "Very Good"}, 0},
                   {"color", K::categorical, 0, 0, {"D", "E", "F", "G", "H", "I", "J"}, 0},
                   {"clarity", K::categorical, 0, 0, {"IF", "SI1", "SI2", "VS1", "VS2", "VVS1", "VVS2"}, 0},
                   {"shape", K::categorical, 0, 0, {"cushion", "emerald", "oval", "pear", "princess", "round"}, 0}});
}

inline std::vector<Tuple> generate_diamonds(std::size_t n, std::uint64_t seed) {
    Schema s = diamonds_schema();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    auto pick = [&](std::size_t i) {
        const auto& c = s[i].categories;
        return c[std::uniform_int_distribution<std::size_t>(0, c.size() - 1)(rng)];
    };
    std::vector<Tuple> out;
    for (std::size_t i = 0; i < n; ++i) {
        double carat = std::round((0.2 + 4.8 * std::pow(u(rng), 2.5)) * 100) / 100;
        double price = std::clamp(std::round(200 + carat * carat * 2000 * (0.6 + 0.8 * u(rng))), 200.0, 50000.0);
        double depth = std::round((55 + 15 * u(rng)) * 10) / 10;
        double table = std::round((52 + 18 * u(rng)) * 10) / 10;
        out.push_back({"d" + std::to_string(100000 + i),
                       {price, carat, depth, table, pick(4), pick(5), pick(6), pick(7)}});
    }
    return out;
}

inline Schema homes_schema() {
    using K = AttributeKind;
    return Schema({{"price", K::numeric_continuous, 50000, 5000000, {}, 0},
                   {"squarefeet", K::numeric_continuous, 300, 10000, {}, 0},
                   {"bedrooms", K::numeric_discrete, 0, 10, {}, 1},
                   {"zip", K::categorical, 0, 0, {"76010", "76011", "76012", "76013", "76019"}, 0}});
}

inline std::vector<Tuple> generate_homes(std::size_t n, std::uint64_t seed) {
    Schema s = homes_schema();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Tuple> out;
    for (std::size_t i = 0; i < n; ++i) {
        double beds = std::floor(1 + 5 * u(rng));
        double sqft = std::clamp(std::round(400 + beds * 500 * (0.6 + 0.8 * u(rng))), 300.0, 10000.0);
        double price = std::clamp(std::round((sqft * 150 * (0.5 + u(rng))) / 1000) * 1000, 50000.0, 5000000.0);
        const auto& zips = s[3].categories;
        out.push_back({"h" + std::to_string(100000 + i),
                       {price, sqft, beds, zips[std::uniform_int_distribution<std::size_t>(0, zips.size() - 1)(rng)]}});
    }
    return out;
}

} // namespace rerank
