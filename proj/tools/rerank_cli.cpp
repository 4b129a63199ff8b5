#include "rerank/bench.hpp"
#include "rerank/http_server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <iostream>

using namespace rerank;

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> algorithms;
    std::optional<std::size_t> depth;
    std::string source;
    std::string region;
    std::vector<std::string> attributes;
};

json load_doc(const std::string& path) { return parse_json(read_file(path), path); }

int fail(const Error& e) {
    std::cerr << error_to_json(e).dump() << "\n";
    return 2;
}

int gen_data(const Flags& f) {
    json doc = f.config.empty() ? json::object() : load_doc(f.config);
    if (f.out.empty()) throw Error(ErrorCode::config, "--out is required", "out");
    std::vector<WorkloadSpec> specs;
    if (doc.contains("suite")) {
        specs = default_suite(f.seed.value_or(doc.value("seed", std::uint64_t{1})));
    } else if (doc.contains("workloads")) {
        for (const auto& w : doc["workloads"]) specs.push_back(workload_from_json(w));
    } else {
        specs.push_back(workload_from_json(doc));
    }
    if (f.seed && !doc.contains("suite"))
        for (std::size_t i = 0; i < specs.size(); ++i) specs[i].seed = *f.seed + i;
    std::filesystem::path out(f.out);
    for (const auto& s : specs) {
        Workload w = generate_workload(s);
        auto dir = specs.size() == 1 ? out : out / s.name();
        write_workload(w, dir);
        std::cout << dir.string() << "\n";
    }
    return 0;
}

int bench(const Flags& f) {
    json doc = f.config.empty() ? json::object() : load_doc(f.config);
    BenchOptions opt;
    opt.depth = f.depth.value_or(doc.value("depth", std::size_t{20}));
    if (!f.algorithms.empty()) opt.algorithms = f.algorithms;
    else if (doc.contains("algorithms")) opt.algorithms = doc["algorithms"].get<std::vector<std::string>>();
    if (doc.contains("engine")) {
        const json& e = doc["engine"];
        opt.engine.dense_threshold = e.value("dense_threshold", opt.engine.dense_threshold);
        opt.engine.dense_threshold_md = e.value("dense_threshold_md", opt.engine.dense_threshold_md);
        opt.engine.cover_granularity = e.value("cover_granularity", opt.engine.cover_granularity);
    }
    opt.warm_rows = doc.value("warm_rows", true);
    for (const auto& a : opt.algorithms) request_for(generate_workload({50, 1, 5}), a);

    std::vector<Workload> workloads;
    std::uint64_t seed = f.seed.value_or(doc.value("seed", std::uint64_t{1}));
    if (doc.contains("paths")) {
        std::filesystem::path base = std::filesystem::path(f.config).parent_path();
        for (const auto& p : doc["paths"]) {
            std::filesystem::path dir = p.get<std::string>();
            workloads.push_back(read_workload(dir.is_absolute() ? dir : base / dir));
        }
    } else if (doc.contains("workloads")) {
        std::uint64_t i = 0;
        for (const auto& w : doc["workloads"]) {
            WorkloadSpec s = workload_from_json(w);
            if (f.seed) s.seed = seed + i++;
            workloads.push_back(generate_workload(s));
        }
    } else {
        for (const auto& s : default_suite(seed)) workloads.push_back(generate_workload(s));
    }

    std::vector<BenchRow> rows;
    std::size_t mismatches = 0;
    for (const auto& w : workloads) {
        for (auto& r : bench_workload(w, opt)) {
            if (!r.oracle_match) {
                ++mismatches;
                std::cerr << "oracle mismatch: " << r.workload << " " << r.algorithm << "\n";
            }
            rows.push_back(std::move(r));
        }
    }
    std::string csv = bench_csv(rows);
    if (f.out.empty()) std::cout << csv;
    else write_file(f.out, csv);
    std::cerr << rows.size() << " rows, " << mismatches << " oracle mismatches\n";
    return mismatches == 0 ? 0 : 1;
}

HttpServer* running = nullptr;

int serve(const Flags& f) {
    if (f.config.empty()) throw Error(ErrorCode::config, "--config is required", "config");
    ServiceConfig cfg = load_service_config(f.config);
    Service service(std::move(cfg));
    for (const auto& r : service.boot_reports()) std::cerr << "cache validation: " << r.dump() << "\n";
    HttpServer server(service);
    running = &server;
    std::signal(SIGINT, [](int) {
        if (running) running->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (running) running->stop();
    });
    std::cerr << "listening on " << service.config().host << ":" << service.config().port << "\n";
    if (!server.listen(service.config().host, service.config().port)) {
        std::cerr << error_to_json(Error(ErrorCode::config, "cannot listen", "listen")).dump() << "\n";
        return 2;
    }
    return 0;
}

int crawl_cache(const Flags& f) {
    if (f.config.empty()) throw Error(ErrorCode::config, "--config is required", "config");
    if (f.source.empty()) throw Error(ErrorCode::config, "--source is required", "source");
    if (f.attributes.empty()) throw Error(ErrorCode::config, "--attributes is required", "attributes");
    Service service(load_service_config(f.config));
    if (!service.executor().has_source(f.source))
        throw Error(ErrorCode::not_found, "unknown source '" + f.source + "'", "source");
    const Schema& schema = service.executor().source(f.source)->describe().schema;
    SearchQuery q;
    if (!f.region.empty()) {
        json r = parse_json(f.region, "--region");
        for (const auto& p : r.value("predicates", json::array())) q.predicates.push_back(predicate_from_json(p));
    }
    Region region = to_region(schema, q);
    std::vector<std::size_t> attrs;
    RegionBounds bounds;
    for (const auto& a : f.attributes) {
        std::size_t i = schema.index_of(a);
        if (!schema[i].numeric()) throw Error(ErrorCode::kind, "'" + a + "' is not numeric", "attributes");
        attrs.push_back(i);
        bounds.emplace_back(a, region.ranges[i]);
    }
    QueryMeter meter;
    QueryChannel ch(service.executor(), f.source, meter, nullptr, &service.dense_store(), service.config().engine);
    CrawlTask task(schema, region, attrs);
    std::vector<Tuple> tuples = run_crawl(ch, task);
    ch.store_slab(filter_signature(schema, region, attrs), bounds, tuples);
    std::cout << json{{"source_id", f.source}, {"tuples", tuples.size()}, {"queries", meter.snapshot().total},
                      {"entries", service.dense_store().size()}}
                     .dump()
              << "\n";
    return 0;
}

int validate_cache(const Flags& f) {
    if (f.config.empty()) throw Error(ErrorCode::config, "--config is required", "config");
    Service service(load_service_config(f.config));
    json out = json::array();
    for (const auto& r : service.boot_reports())
        if (f.source.empty() || r["source_id"] == f.source) out.push_back(r);
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Query re-ranking gateway over top-k search interfaces"};
    app.require_subcommand(1);
    Flags f;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON configuration file");
        sub->add_option("--seed", f.seed, "Seed");
        sub->add_option("--out", f.out, "Output path");
        sub->add_option("--algorithms", f.algorithms, "Algorithms, e.g. 1d-binary,md-ta")->delimiter(',');
        sub->add_option("--depth", f.depth, "Get-next depth");
    };
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic workload directory");
    auto* ben = app.add_subcommand("bench", "Run algorithms against the brute-force oracle");
    auto* srv = app.add_subcommand("serve", "Start the HTTP service");
    auto* crw = app.add_subcommand("crawl-cache", "Crawl a region into the dense store");
    auto* val = app.add_subcommand("validate-cache", "Validate the dense store against its sources");
    for (auto* s : {gen, ben, srv, crw, val}) add_common(s);
    for (auto* s : {crw, val}) s->add_option("--source", f.source, "Source id");
    crw->add_option("--region", f.region, "Region as {\"predicates\": [...]}");
    crw->add_option("--attributes", f.attributes, "Ranking attributes the slab serves")->delimiter(',');

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return gen_data(f);
        if (*ben) return bench(f);
        if (*srv) return serve(f);
        if (*crw) return crawl_cache(f);
        if (*val) return validate_cache(f);
    } catch (const Error& e) {
        return fail(e);
    } catch (const std::exception& e) {
        return fail(Error(ErrorCode::config, e.what()));
    }
    return 1;
}
