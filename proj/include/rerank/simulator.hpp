#pragma once

// In-process hidden database: a dataset, a system ranking the callers cannot
// see, and a fixed page size k.

#include "rerank/digest.hpp"
#include "rerank/io.hpp"
#include "rerank/source.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <numeric>
#include <random>
#include <shared_mutex>
#include <thread>

namespace rerank {

struct SystemRanking {
    enum class Kind { linear, lexicographic };
    struct Key {
        std::string attribute;
        bool descending = false;
    };

    Kind kind = Kind::linear;
    std::vector<RankingTerm> weights; // linear: minimized sum over normalized values
    std::vector<Key> order;           // lexicographic

    static SystemRanking linear(std::vector<RankingTerm> w) { return {Kind::linear, std::move(w), {}}; }
    static SystemRanking lexicographic(std::vector<Key> keys) { return {Kind::lexicographic, {}, std::move(keys)}; }
};

struct SimulatorConfig {
    std::vector<Tuple> dataset;
    SystemRanking system_ranking;
    std::size_t k = 10;
    std::chrono::milliseconds per_query_delay{0};
    /// Test hook: adds a seeded random sleep in [0, max_jitter] per search so
    /// concurrent calls complete in shuffled order.
    std::optional<std::uint64_t> jitter_seed;
    std::chrono::microseconds max_jitter{0};
};

class Simulator final : public TopKSource {
public:
    Simulator(std::string source_id, std::string name, Schema schema, SimulatorConfig config)
        : config_(std::move(config)) {
        if (config_.k < 1) throw Error(ErrorCode::config, "k must be >= 1", "k");
        if (schema.empty()) throw Error(ErrorCode::config, "simulator needs a non-empty schema", "schema");
        descriptor_.source_id = std::move(source_id);
        descriptor_.name = std::move(name);
        descriptor_.schema = std::move(schema);
        descriptor_.k = config_.k;
        for (const auto& t : config_.dataset) validate_tuple(descriptor_.schema, t);
        check_ids_unique(config_.dataset);
        build_ranking();
        if (config_.jitter_seed) jitter_rng_.seed(*config_.jitter_seed);
    }

    TopKResponse search(const SearchQuery& q) override {
        Region region = to_region(descriptor_.schema, q);
        InFlight guard(*this);
        delay();
        TopKResponse resp;
        resp.issued_at = std::chrono::system_clock::now();
        {
            std::shared_lock lock(mutex_);
            if (!region.empty()) {
                for (std::size_t idx : ranked_) {
                    const Tuple& t = config_.dataset[idx];
                    if (!region.matches(t)) continue;
                    if (resp.tuples.size() == config_.k) {
                        resp.status = ResponseStatus::overflow;
                        break;
                    }
                    resp.tuples.push_back(t);
                }
            }
        }
        searches_.fetch_add(1);
        return resp;
    }

    const SourceDescriptor& describe() const override { return descriptor_; }

    void set_popular_functions(std::vector<PopularFunction> fns) { descriptor_.popular_functions = std::move(fns); }

    std::string snapshot_version() override {
        std::shared_lock lock(mutex_);
        return version_;
    }

    // Maintenance mode: mutations take the exclusive lock, so no search
    // observes a half-applied change.
    void insert(Tuple t) {
        validate_tuple(descriptor_.schema, t);
        std::unique_lock lock(mutex_);
        for (const auto& existing : config_.dataset)
            if (existing.id == t.id) throw Error(ErrorCode::validation, "duplicate tuple id '" + t.id + "'", "id");
        config_.dataset.push_back(std::move(t));
        build_ranking();
    }

    bool erase(const std::string& id) {
        std::unique_lock lock(mutex_);
        auto it = std::find_if(config_.dataset.begin(), config_.dataset.end(), [&](const Tuple& t) { return t.id == id; });
        if (it == config_.dataset.end()) return false;
        config_.dataset.erase(it);
        build_ranking();
        return true;
    }

    std::vector<Tuple> dataset() const {
        std::shared_lock lock(mutex_);
        return config_.dataset;
    }

    /// The dataset in system-ranked order (what an unrestricted query would
    /// page through).
    std::vector<Tuple> system_ranked() const {
        std::shared_lock lock(mutex_);
        std::vector<Tuple> out;
        for (std::size_t i : ranked_) out.push_back(config_.dataset[i]);
        return out;
    }

    std::uint64_t search_count() const { return searches_.load(); }
    int max_in_flight_observed() const { return max_in_flight_.load(); }
    void reset_probes() {
        searches_ = 0;
        max_in_flight_ = 0;
    }

private:
    struct InFlight {
        Simulator& s;
        explicit InFlight(Simulator& sim) : s(sim) {
            int now = s.in_flight_.fetch_add(1) + 1;
            int prev = s.max_in_flight_.load();
            while (now > prev && !s.max_in_flight_.compare_exchange_weak(prev, now)) {
            }
        }
        ~InFlight() { s.in_flight_.fetch_sub(1); }
    };

    static void check_ids_unique(const std::vector<Tuple>& data) {
        std::vector<const std::string*> ids;
        for (const auto& t : data) ids.push_back(&t.id);
        std::sort(ids.begin(), ids.end(), [](auto* a, auto* b) { return *a < *b; });
        for (std::size_t i = 1; i < ids.size(); ++i)
            if (*ids[i] == *ids[i - 1]) throw Error(ErrorCode::validation, "duplicate tuple id '" + *ids[i] + "'", "id");
    }

    void delay() {
        auto d = std::chrono::duration_cast<std::chrono::microseconds>(config_.per_query_delay);
        if (config_.jitter_seed && config_.max_jitter.count() > 0) {
            std::lock_guard lock(jitter_mutex_);
            d += std::chrono::microseconds(
                std::uniform_int_distribution<std::int64_t>(0, config_.max_jitter.count())(jitter_rng_));
        }
        if (d.count() > 0) std::this_thread::sleep_for(d);
    }

    // Caller holds the exclusive lock (or is the constructor).
    void build_ranking() {
        const Schema& schema = descriptor_.schema;
        const auto& data = config_.dataset;
        ranked_.resize(data.size());
        std::iota(ranked_.begin(), ranked_.end(), std::size_t{0});
        const SystemRanking& sr = config_.system_ranking;
        if (sr.kind == SystemRanking::Kind::linear) {
            Scorer scorer(schema, RankingSpec{sr.weights});
            std::vector<double> s(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) s[i] = scorer(data[i]);
            std::sort(ranked_.begin(), ranked_.end(),
                      [&](std::size_t a, std::size_t b) { return ranks_before(s[a], data[a].id, s[b], data[b].id); });
        } else {
            std::vector<std::pair<std::size_t, bool>> keys;
            for (const auto& k : sr.order) keys.emplace_back(schema.index_of(k.attribute), k.descending);
            std::sort(ranked_.begin(), ranked_.end(), [&](std::size_t a, std::size_t b) {
                for (auto [i, desc] : keys) {
                    const Value& va = data[a].values[i];
                    const Value& vb = data[b].values[i];
                    if (va == vb) continue;
                    return desc ? vb < va : va < vb;
                }
                return data[a].id < data[b].id;
            });
        }
        std::vector<Tuple> by_id = data;
        std::sort(by_id.begin(), by_id.end(), [](const Tuple& a, const Tuple& b) { return a.id < b.id; });
        version_ = sha256_hex(tuples_to_csv(schema, by_id)).substr(0, 32);
    }

    SourceDescriptor descriptor_;
    SimulatorConfig config_;
    std::vector<std::size_t> ranked_;
    std::string version_;
    mutable std::shared_mutex mutex_;
    std::mutex jitter_mutex_;
    std::mt19937_64 jitter_rng_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    std::atomic<std::uint64_t> searches_{0};
};

// ---------------------------------------------------------------------------
// Configuration document

inline SystemRanking system_ranking_from_json(const json& j) {
    std::string type = j.value("type", "linear");
    if (type == "linear") {
        std::vector<RankingTerm> w;
        for (const auto& [name, weight] : j.at("weights").items()) w.push_back({name, weight.get<double>()});
        return SystemRanking::linear(std::move(w));
    }
    if (type == "lexicographic") {
        std::vector<SystemRanking::Key> keys;
        for (const auto& k : j.at("order"))
            keys.push_back({k.at("attribute").get<std::string>(), k.value("direction", "asc") == "desc"});
        return SystemRanking::lexicographic(std::move(keys));
    }
    throw Error(ErrorCode::config, "unknown system_ranking type '" + type + "'", "system_ranking");
}

inline json system_ranking_to_json(const SystemRanking& sr) {
    if (sr.kind == SystemRanking::Kind::linear) {
        json w = json::object();
        for (const auto& t : sr.weights) w[t.attribute] = t.weight;
        return {{"type", "linear"}, {"weights", w}};
    }
    json order = json::array();
    for (const auto& k : sr.order) order.push_back({{"attribute", k.attribute}, {"direction", k.descending ? "desc" : "asc"}});
    return {{"type", "lexicographic"}, {"order", order}};
}

/// Builds a simulator from {"k", "system_ranking", "delay_ms", "dataset_path",
/// "schema_path"}; relative paths resolve against base_dir.
inline std::shared_ptr<Simulator> load_simulator(const json& doc, const std::filesystem::path& base_dir,
                                                 std::string source_id, std::string name,
                                                 std::optional<Schema> schema = std::nullopt) {
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return (path.is_absolute() ? path : base_dir / path).string();
    };
    try {
        if (!schema) {
            if (doc.contains("schema")) schema = schema_from_json(doc["schema"]);
            else schema = load_schema(resolve(doc.at("schema_path").get<std::string>()));
        }
        SimulatorConfig cfg;
        cfg.k = doc.at("k").get<std::size_t>();
        cfg.system_ranking = system_ranking_from_json(doc.at("system_ranking"));
        cfg.per_query_delay = std::chrono::milliseconds(doc.value("delay_ms", 0));
        if (doc.contains("dataset_path")) cfg.dataset = load_dataset(*schema, resolve(doc["dataset_path"].get<std::string>()));
        return std::make_shared<Simulator>(std::move(source_id), std::move(name), std::move(*schema), std::move(cfg));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config, std::string("simulator config: ") + e.what(), "simulator");
    }
}

} // namespace rerank
