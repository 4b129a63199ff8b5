#pragma once

// Transport-independent gateway: sources, sessions, paged get-next, stats and
// cache administration. The HTTP layer is a thin mapping onto this class.

#include "rerank/engine.hpp"
#include "rerank/workload.hpp"

#include <functional>
#include <mutex>
#include <random>
#include <unordered_map>
#include <unordered_set>

namespace rerank {

struct SourceConfig {
    std::shared_ptr<TopKSource> source;
    RateLimit rate_limit;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string admin_token;
    std::chrono::seconds session_expiry{1800};
    std::optional<std::filesystem::path> dense_store;
    EngineOptions engine;
    Executor::Options executor{};
    std::vector<SourceConfig> sources;
};

namespace detail {

template <class T>
T config_value(const json& j, const std::string& key, T fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::config, "wrong type for '" + path + key + "'", path + key);
    }
}

inline RankingSpec weights_from_json(const json& w, const std::string& field) {
    if (!w.is_object()) throw Error(ErrorCode::validation, "weights must be an object", field);
    RankingSpec spec;
    for (const auto& [name, v] : w.items()) {
        if (!v.is_number()) throw Error(ErrorCode::validation, "weight of '" + name + "' must be a number", name);
        spec.terms.push_back({name, v.get<double>()});
    }
    return spec;
}

inline std::shared_ptr<Simulator> generated_source(const json& g, const std::string& id, const std::string& name,
                                                   const std::string& path) {
    std::string kind = config_value<std::string>(g, "kind", "", path);
    auto n = config_value<std::size_t>(g, "n", 2000, path);
    auto seed = config_value<std::uint64_t>(g, "seed", 1, path);
    SimulatorConfig cfg;
    cfg.k = config_value<std::size_t>(g, "k", 10, path);
    cfg.per_query_delay = std::chrono::milliseconds(config_value<int>(g, "delay_ms", 0, path));
    Schema schema;
    if (kind == "diamonds") {
        schema = diamonds_schema();
        cfg.dataset = generate_diamonds(n, seed);
        cfg.system_ranking = SystemRanking::linear({{"carat", -1.0}, {"price", 0.2}});
    } else if (kind == "homes") {
        schema = homes_schema();
        cfg.dataset = generate_homes(n, seed);
        cfg.system_ranking = SystemRanking::linear({{"price", -1.0}, {"bedrooms", 0.5}});
    } else if (kind == "workload") {
        WorkloadSpec spec = workload_from_json(g);
        spec.n = n;
        spec.seed = seed;
        spec.k = cfg.k;
        Workload w = generate_workload(spec);
        schema = w.schema;
        cfg.dataset = w.dataset;
        cfg.system_ranking = w.system_ranking;
    } else {
        throw Error(ErrorCode::config, "unknown generator kind '" + kind + "'", path + "kind");
    }
    if (g.contains("system_ranking")) cfg.system_ranking = system_ranking_from_json(g["system_ranking"]);
    return std::make_shared<Simulator>(id, name, std::move(schema), std::move(cfg));
}

} // namespace detail

/// Parses the service document. Relative paths resolve against base_dir.
inline ServiceConfig service_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    using detail::config_value;
    if (!doc.is_object()) throw Error(ErrorCode::config, "service config must be a JSON object", "");
    ServiceConfig c;
    if (doc.contains("listen")) {
        const json& l = doc["listen"];
        c.host = config_value<std::string>(l, "host", c.host, "listen.");
        c.port = config_value<int>(l, "port", c.port, "listen.");
        if (c.port < 0 || c.port > 65535) throw Error(ErrorCode::config, "port out of range", "listen.port");
    }
    c.admin_token = config_value<std::string>(doc, "admin_token", "", "");
    if (c.admin_token.empty()) throw Error(ErrorCode::config, "admin_token is required", "admin_token");
    auto expiry = config_value<double>(doc, "session_expiry_s", 1800, "");
    if (!(expiry > 0)) throw Error(ErrorCode::config, "session_expiry_s must be positive", "session_expiry_s");
    c.session_expiry = std::chrono::seconds(static_cast<long long>(expiry));
    if (doc.contains("dense_store")) {
        std::filesystem::path p = config_value<std::string>(doc, "dense_store", "", "");
        c.dense_store = p.is_absolute() ? p : base_dir / p;
    }
    if (doc.contains("engine")) {
        const json& e = doc["engine"];
        c.engine.dense_threshold = config_value<double>(e, "dense_threshold", c.engine.dense_threshold, "engine.");
        c.engine.dense_threshold_md =
            config_value<double>(e, "dense_threshold_md", c.engine.dense_threshold_md, "engine.");
        c.engine.cover_granularity =
            config_value<std::size_t>(e, "cover_granularity", c.engine.cover_granularity, "engine.");
        if (!(c.engine.dense_threshold > 0 && c.engine.dense_threshold < 1))
            throw Error(ErrorCode::config, "dense_threshold must be in (0,1)", "engine.dense_threshold");
        if (!(c.engine.dense_threshold_md > 0 && c.engine.dense_threshold_md < 1))
            throw Error(ErrorCode::config, "dense_threshold_md must be in (0,1)", "engine.dense_threshold_md");
        if (c.engine.cover_granularity < 1)
            throw Error(ErrorCode::config, "cover_granularity must be >= 1", "engine.cover_granularity");
    }
    if (doc.contains("executor")) {
        const json& e = doc["executor"];
        c.executor.workers = config_value<std::size_t>(e, "workers", c.executor.workers, "executor.");
        c.executor.max_retries = config_value<int>(e, "max_retries", c.executor.max_retries, "executor.");
        if (c.executor.workers < 1) throw Error(ErrorCode::config, "workers must be >= 1", "executor.workers");
    }
    if (!doc.contains("sources") || !doc["sources"].is_array())
        throw Error(ErrorCode::config, "sources must be a list", "sources");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc["sources"].size(); ++i) {
        const json& s = doc["sources"][i];
        std::string path = "sources[" + std::to_string(i) + "].";
        std::string id = config_value<std::string>(s, "id", "", path);
        if (!valid_identifier(id)) throw Error(ErrorCode::config, "source id must match [A-Za-z0-9_]+", path + "id");
        if (!ids.insert(id).second) throw Error(ErrorCode::config, "duplicate source id '" + id + "'", path + "id");
        std::string name = config_value<std::string>(s, "name", id, path);
        SourceConfig sc;
        std::shared_ptr<Simulator> sim;
        try {
            if (s.contains("generator")) {
                sim = detail::generated_source(s["generator"], id, name, path + "generator.");
            } else if (s.contains("simulator")) {
                sim = load_simulator(s["simulator"], base_dir, id, name);
            } else if (s.contains("simulator_path")) {
                std::filesystem::path p = config_value<std::string>(s, "simulator_path", "", path);
                if (!p.is_absolute()) p = base_dir / p;
                sim = load_simulator(parse_json(read_file(p.string()), p.string()), p.parent_path(), id, name);
            } else {
                throw Error(ErrorCode::config, "source needs generator, simulator or simulator_path", path);
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::config && !e.field().empty() && e.field().starts_with(path)) throw;
            throw Error(ErrorCode::config, e.what(), path + (e.field().empty() ? "simulator" : e.field()));
        }
        if (s.contains("popular_functions")) {
            std::vector<PopularFunction> pf;
            for (const auto& f : s["popular_functions"]) {
                PopularFunction p{config_value<std::string>(f, "name", "", path + "popular_functions."), {}};
                try {
                    p.spec = detail::weights_from_json(f.at("weights"), "weights");
                    p.spec.validate(sim->describe().schema);
                } catch (const std::exception& e) {
                    throw Error(ErrorCode::config, e.what(), path + "popular_functions");
                }
                pf.push_back(std::move(p));
            }
            sim->set_popular_functions(std::move(pf));
        }
        if (s.contains("rate_limit")) {
            const json& r = s["rate_limit"];
            sc.rate_limit.max_in_flight = config_value<std::size_t>(r, "max_in_flight", 4, path + "rate_limit.");
            sc.rate_limit.min_gap = std::chrono::milliseconds(config_value<int>(r, "min_gap_ms", 0, path + "rate_limit."));
            if (sc.rate_limit.max_in_flight < 1)
                throw Error(ErrorCode::config, "max_in_flight must be >= 1", path + "rate_limit.max_in_flight");
        }
        sc.source = std::move(sim);
        c.sources.push_back(std::move(sc));
    }
    return c;
}

inline ServiceConfig load_service_config(const std::string& path) {
    json doc = parse_json(read_file(path), path);
    return service_config_from_json(doc, std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Requests

struct QueryRequest {
    SearchQuery query;
    RankingRequest ranking;
    std::size_t page_size = 10;
};

/// Validates a query body against a schema without touching the backend.
inline QueryRequest parse_query_request(const Schema& schema, const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::validation, "request body must be a JSON object", "");
    QueryRequest r;
    if (body.contains("predicates")) {
        if (!body["predicates"].is_array()) throw Error(ErrorCode::validation, "predicates must be a list", "predicates");
        for (const auto& p : body["predicates"]) r.query.predicates.push_back(predicate_from_json(p));
    }
    to_region(schema, r.query);
    r.query = canonicalize(schema, r.query);

    if (!body.contains("ranking") || !body["ranking"].is_object())
        throw Error(ErrorCode::validation, "ranking is required", "ranking");
    const json& rk = body["ranking"];
    std::string mode = rk.value("mode", "");
    std::string algorithm = rk.contains("algorithm") && rk["algorithm"].is_string() ? rk["algorithm"].get<std::string>()
                                                                                    : "rerank";
    if (mode == "1d") {
        if (!rk.contains("attribute") || !rk["attribute"].is_string())
            throw Error(ErrorCode::validation, "1d ranking needs an attribute", "attribute");
        Ranking1D one;
        one.attribute = rk["attribute"].get<std::string>();
        auto i = schema.find(one.attribute);
        if (!i) throw Error(ErrorCode::validation, "unknown attribute '" + one.attribute + "'", one.attribute);
        if (!schema[*i].numeric())
            throw Error(ErrorCode::validation, "cannot rank by categorical '" + one.attribute + "'", one.attribute);
        std::string dir = rk.value("direction", "asc");
        if (dir == "asc" || dir == "ascending") one.direction = Direction::ascending;
        else if (dir == "desc" || dir == "descending") one.direction = Direction::descending;
        else throw Error(ErrorCode::validation, "direction must be asc or desc", "direction");
        one.algorithm = parse_algorithm_1d(algorithm);
        r.ranking = one;
    } else if (mode == "md") {
        RankingMD md;
        md.spec = detail::weights_from_json(rk.contains("weights") ? rk["weights"] : json(), "weights");
        md.spec.validate(schema);
        md.algorithm = parse_algorithm_md(algorithm);
        r.ranking = md;
    } else {
        throw Error(ErrorCode::validation, "ranking.mode must be 1d or md", "mode");
    }

    if (body.contains("page_size")) {
        const json& ps = body["page_size"];
        if (!ps.is_number_integer() || ps.get<long long>() < 1 || ps.get<long long>() > 100)
            throw Error(ErrorCode::validation, "page_size must be an integer in 1..100", "page_size");
        r.page_size = ps.get<std::size_t>();
    }
    return r;
}

/// Canonical text of a validated request; equal keys mean identical requests.
inline std::string request_key(const Schema& schema, const QueryRequest& r) {
    json j = {{"query", query_to_json(canonicalize(schema, r.query))}, {"page_size", r.page_size}};
    if (const auto* one = std::get_if<Ranking1D>(&r.ranking)) {
        j["ranking"] = {{"mode", "1d"},
                        {"attribute", one->attribute},
                        {"direction", one->direction == Direction::ascending ? "asc" : "desc"},
                        {"algorithm", to_string(one->algorithm)}};
    } else {
        const auto& md = std::get<RankingMD>(r.ranking);
        json w = json::object();
        for (const auto& t : md.spec.terms) w[t.attribute] = t.weight;
        j["ranking"] = {{"mode", "md"}, {"weights", w}, {"algorithm", to_string(md.algorithm)}};
    }
    return j.dump();
}

inline json error_to_json(const Error& e) {
    json j = {{"code", to_string(e.code())}, {"message", e.what()}};
    if (!e.field().empty()) j["field"] = e.field();
    return j;
}

inline json descriptor_to_json(const SourceDescriptor& d) {
    json pf = json::array();
    for (const auto& f : d.popular_functions) {
        json w = json::object();
        for (const auto& t : f.spec.terms) w[t.attribute] = t.weight;
        pf.push_back({{"name", f.name}, {"weights", w}});
    }
    return {{"source_id", d.source_id},
            {"name", d.name},
            {"k", d.k},
            {"schema", schema_to_json(d.schema)},
            {"popular_functions", pf}};
}

inline json validation_report_to_json(const std::string& source_id, const ValidationReport& r) {
    return {{"source_id", source_id}, {"kept", r.kept}, {"evicted", r.evicted}, {"deferred", r.deferred}};
}

// ---------------------------------------------------------------------------
// Service

class Service {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    explicit Service(ServiceConfig config, Clock clock = [] { return std::chrono::steady_clock::now(); })
        : config_(std::move(config)), clock_(std::move(clock)), executor_(config_.executor) {
        for (auto& s : config_.sources) executor_.register_source(s.source, s.rate_limit);
        store_ = config_.dense_store ? std::make_unique<DenseStore>(*config_.dense_store) : std::make_unique<DenseStore>();
        for (const auto& id : executor_.source_ids()) boot_reports_.push_back(validate_source(id));
    }

    const ServiceConfig& config() const { return config_; }
    const std::vector<json>& boot_reports() const { return boot_reports_; }
    DenseStore& dense_store() { return *store_; }
    Executor& executor() { return executor_; }

    json sources() const {
        json out = json::array();
        for (const auto& s : config_.sources) out.push_back(descriptor_to_json(s.source->describe()));
        return out;
    }

    json create_session(const json& body) {
        if (!body.is_object() || !body.contains("source_id") || !body["source_id"].is_string())
            throw Error(ErrorCode::validation, "source_id is required", "source_id");
        std::string source_id = body["source_id"].get<std::string>();
        if (!executor_.has_source(source_id))
            throw Error(ErrorCode::not_found, "unknown source '" + source_id + "'", "source_id");
        auto s = std::make_shared<Session>(new_session_id(), source_id);
        s->last_used = clock_();
        std::lock_guard lock(mutex_);
        sweep_locked();
        sessions_[s->cache.session_id()] = s;
        return {{"session_id", s->cache.session_id()}, {"source_id", source_id}};
    }

    json query(const std::string& session_id, const json& body) {
        auto s = acquire(session_id);
        Busy busy(*s);
        const Schema& schema = executor_.source(s->source_id)->describe().schema;
        QueryRequest req = parse_query_request(schema, body);
        std::string key = request_key(schema, req);
        if (s->active && s->key == key && !s->cache.pages_served().empty()) {
            s->page_index = 0;
            return page_json(*s, s->cache.pages_served()[0], s->page_exhausted[0], QueryMeter::Snapshot{}, 0.0);
        }
        s->key = key;
        s->request = req;
        s->channel = std::make_unique<QueryChannel>(executor_, s->source_id, s->cache.meter(), &s->cache,
                                                    store_.get(), config_.engine);
        s->cursor.reset();
        s->cache.pages_served().clear();
        s->page_exhausted.clear();
        s->exhausted = false;
        s->active = true;
        s->page_index = 0;
        return compute_page(*s);
    }

    json next(const std::string& session_id) {
        auto s = acquire(session_id);
        Busy busy(*s);
        if (!s->active) throw Error(ErrorCode::validation, "no active query in this session", "query");
        std::size_t want = s->page_index + 1;
        if (want < s->cache.pages_served().size()) {
            s->page_index = want;
            return page_json(*s, s->cache.pages_served()[want], s->page_exhausted[want], QueryMeter::Snapshot{}, 0.0);
        }
        s->page_index = s->cache.pages_served().size();
        return compute_page(*s);
    }

    json stats(const std::string& session_id) {
        auto s = acquire(session_id);
        return cumulative_json(*s);
    }

    json admin_validate(const std::string& token, const json& body) {
        if (!token_ok(token)) throw Error(ErrorCode::auth, "invalid admin credential", "token");
        if (!body.is_object() || !body.contains("source_id") || !body["source_id"].is_string())
            throw Error(ErrorCode::validation, "source_id is required", "source_id");
        std::string id = body["source_id"].get<std::string>();
        if (!executor_.has_source(id)) throw Error(ErrorCode::not_found, "unknown source '" + id + "'", "source_id");
        return validate_source(id);
    }

    std::size_t session_count() const {
        std::lock_guard lock(mutex_);
        return sessions_.size();
    }

private:
    struct Session {
        Session(std::string id, std::string source) : cache(std::move(id)), source_id(std::move(source)) {}
        SessionCache cache;
        std::string source_id;
        std::chrono::steady_clock::time_point last_used;
        std::atomic<bool> busy{false};
        bool active = false;
        std::string key;
        QueryRequest request;
        std::unique_ptr<QueryChannel> channel;
        std::unique_ptr<RankedCursor> cursor;
        std::vector<bool> page_exhausted;
        std::size_t page_index = 0;
        bool exhausted = false;
        std::chrono::nanoseconds elapsed{0};
    };

    struct Busy {
        explicit Busy(Session& s) : session(s) {
            bool expected = false;
            if (!s.busy.compare_exchange_strong(expected, true))
                throw Error(ErrorCode::busy, "another request is running in this session", "session_id");
        }
        ~Busy() { session.busy = false; }
        Session& session;
    };

    std::shared_ptr<Session> acquire(const std::string& id) {
        std::lock_guard lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) {
            if (expired_.contains(id)) throw Error(ErrorCode::expired, "session expired", "session_id");
            throw Error(ErrorCode::not_found, "unknown session", "session_id");
        }
        auto now = clock_();
        if (now - it->second->last_used > config_.session_expiry && !it->second->busy) {
            expired_.insert(id);
            sessions_.erase(it);
            throw Error(ErrorCode::expired, "session expired", "session_id");
        }
        it->second->last_used = now;
        return it->second;
    }

    void sweep_locked() {
        auto now = clock_();
        for (auto it = sessions_.begin(); it != sessions_.end();) {
            if (now - it->second->last_used > config_.session_expiry && !it->second->busy) {
                expired_.insert(it->first);
                it = sessions_.erase(it);
            } else {
                ++it;
            }
        }
    }

    json compute_page(Session& s) {
        auto before = s.cache.meter().snapshot();
        auto start = std::chrono::steady_clock::now();
        std::vector<ScoredTuple> page;
        if (!s.exhausted) {
            if (!s.cursor) s.cursor = make_cursor(*s.channel, s.request.query, s.request.ranking);
            while (page.size() < s.request.page_size) {
                auto t = s.cursor->next();
                if (!t) {
                    s.exhausted = true;
                    break;
                }
                page.push_back(std::move(*t));
            }
        }
        auto took = std::chrono::steady_clock::now() - start;
        s.elapsed += took;
        s.cache.pages_served().push_back(page);
        s.page_exhausted.push_back(s.exhausted);
        s.page_index = s.cache.pages_served().size() - 1;
        return page_json(s, page, s.exhausted, s.cache.meter().snapshot() - before,
                         std::chrono::duration<double, std::milli>(took).count());
    }

    json page_json(const Session& s, const std::vector<ScoredTuple>& page, bool exhausted,
                   const QueryMeter::Snapshot& delta, double elapsed_ms) const {
        const Schema& schema = executor_.source(s.source_id)->describe().schema;
        json tuples = json::array();
        for (const auto& st : page) {
            json t = tuple_to_json(schema, st.tuple);
            t["score"] = st.score;
            tuples.push_back(std::move(t));
        }
        json d = {{"queries_issued", delta.total},
                  {"parallel", delta.parallel_batch},
                  {"sequential", delta.sequential},
                  {"parallel_fraction", delta.parallel_fraction()},
                  {"elapsed_ms", elapsed_ms}};
        return {{"tuples", tuples},
                {"page_index", s.page_index},
                {"exhausted", exhausted},
                {"stats", {{"page", d}, {"session", cumulative_json(s)}}}};
    }

    static json cumulative_json(const Session& s) {
        auto m = s.cache.meter().snapshot();
        return {{"queries_issued", m.total},
                {"parallel", m.parallel_batch},
                {"sequential", m.sequential},
                {"parallel_fraction", m.parallel_fraction()},
                {"elapsed_ms", std::chrono::duration<double, std::milli>(s.elapsed).count()}};
    }

    json validate_source(const std::string& id) {
        return validation_report_to_json(id, validate_dense_cache(*store_, *executor_.source(id)));
    }

    bool token_ok(const std::string& token) const {
        const std::string& want = config_.admin_token;
        unsigned diff = token.size() != want.size();
        for (std::size_t i = 0; i < token.size(); ++i)
            diff |= static_cast<unsigned char>(token[i]) ^ static_cast<unsigned char>(want[i % want.size()]);
        return diff == 0;
    }

    std::string new_session_id() {
        std::random_device rd;
        std::string id;
        static const char* hex = "0123456789abcdef";
        for (int i = 0; i < 32; ++i) id += hex[rd() & 15u];
        return id;
    }

    ServiceConfig config_;
    Clock clock_;
    Executor executor_;
    std::unique_ptr<DenseStore> store_;
    std::vector<json> boot_reports_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
    std::unordered_set<std::string> expired_;
};

} // namespace rerank
