#include "support.hpp"

#include "rerank/http_server.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <future>
#include <thread>

using namespace rtest;

namespace {

json base_config(int delay_ms = 0) {
    return json{{"admin_token", "secret"},
                {"sources",
                 {{{"id", "homes"},
                   {"generator", {{"kind", "homes"}, {"n", 1500}, {"seed", 3}, {"k", 10}, {"delay_ms", delay_ms}}},
                   {"popular_functions", {{{"name", "cheap and large"}, {"weights", {{"price", 1}, {"squarefeet", -0.3}}}}}}},
                  {{"id", "synthetic"},
                   {"generator",
                    {{"kind", "workload"}, {"n", 800}, {"m", 2}, {"correlation", "negative"}, {"dense_fraction", 0.2},
                     {"seed", 5}, {"k", 5}}}}}}};
}

Service make_service(json doc = base_config(), Service::Clock clock = {}) {
    ServiceConfig cfg = service_config_from_json(doc, std::filesystem::temp_directory_path());
    return clock ? Service(std::move(cfg), std::move(clock)) : Service(std::move(cfg));
}

std::shared_ptr<Simulator> sim_of(Service& s, const std::string& id) {
    return std::dynamic_pointer_cast<Simulator>(s.executor().source(id));
}

json md_body(json weights, std::size_t page_size = 10, std::string algorithm = "rerank") {
    return {{"ranking", {{"mode", "md"}, {"weights", std::move(weights)}, {"algorithm", algorithm}}},
            {"page_size", page_size}};
}

std::vector<std::string> page_ids(const json& page) {
    std::vector<std::string> out;
    for (const auto& t : page["tuples"]) out.push_back(t["id"].get<std::string>());
    return out;
}

std::string config_error_field(json doc) {
    try {
        service_config_from_json(doc, ".");
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::config);
        return e.field();
    }
    return "<none>";
}

} // namespace

TEST(ServiceConfig, FieldLevelErrors) {
    json d = base_config();
    d.erase("admin_token");
    EXPECT_EQ(config_error_field(d), "admin_token");
    d = base_config();
    d["sources"][0]["id"] = "bad id";
    EXPECT_EQ(config_error_field(d), "sources[0].id");
    d = base_config();
    d["sources"][1]["id"] = "homes";
    EXPECT_EQ(config_error_field(d), "sources[1].id");
    d = base_config();
    d["sources"][0]["generator"]["kind"] = "cars";
    EXPECT_EQ(config_error_field(d), "sources[0].generator.kind");
    d = base_config();
    d["engine"] = {{"dense_threshold", 2.0}};
    EXPECT_EQ(config_error_field(d), "engine.dense_threshold");
    d = base_config();
    d["sources"][0]["popular_functions"][0]["weights"]["price"] = 3;
    EXPECT_EQ(config_error_field(d), "sources[0].popular_functions");
    d = base_config();
    d["sources"][0]["rate_limit"] = {{"max_in_flight", 0}};
    EXPECT_EQ(config_error_field(d), "sources[0].rate_limit.max_in_flight");
}

TEST(ServiceApi, SourcesListsDescriptors) {
    auto svc = make_service();
    json s = svc.sources();
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0]["source_id"], "homes");
    EXPECT_EQ(s[0]["k"], 10);
    EXPECT_EQ(s[0]["popular_functions"][0]["name"], "cheap and large");
    EXPECT_EQ(s[0]["schema"], schema_to_json(homes_schema()));
    json empty = base_config();
    empty["sources"] = json::array();
    EXPECT_TRUE(make_service(empty).sources().empty());
}

TEST(ServiceApi, SessionsAreDistinctAndSourceChecked) {
    auto svc = make_service();
    auto a = svc.create_session({{"source_id", "homes"}})["session_id"].get<std::string>();
    auto b = svc.create_session({{"source_id", "homes"}})["session_id"].get<std::string>();
    EXPECT_NE(a, b);
    EXPECT_EQ(a.size(), 32u);
    try {
        svc.create_session({{"source_id", "nope"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
}

TEST(ServiceApi, IdleSessionExpires) {
    auto now = std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::now());
    auto svc = make_service(base_config(), [now] { return *now; });
    auto id = svc.create_session({{"source_id", "homes"}})["session_id"].get<std::string>();
    *now += std::chrono::minutes(29);
    EXPECT_NO_THROW(svc.stats(id));
    *now += std::chrono::minutes(31);
    for (int i = 0; i < 2; ++i) {
        try {
            svc.stats(id);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::expired);
        }
    }
    try {
        svc.stats("0000");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::not_found);
    }
}

TEST(ServiceApi, PagesConcatenateToTheOracle) {
    auto svc = make_service();
    auto sim = sim_of(svc, "homes");
    RankingSpec spec{{{"price", 1}, {"squarefeet", -0.3}}};
    auto oracle = ids(oracle_order(sim->describe().schema, sim->dataset(), {}, RankingMD{spec}), 20);
    auto id = svc.create_session({{"source_id", "homes"}})["session_id"].get<std::string>();
    json stats0 = svc.stats(id);
    EXPECT_EQ(stats0["queries_issued"], 0);
    json p0 = svc.query(id, md_body({{"price", 1}, {"squarefeet", -0.3}}));
    json p1 = svc.next(id);
    EXPECT_EQ(p0["page_index"], 0);
    EXPECT_EQ(p1["page_index"], 1);
    auto got = page_ids(p0);
    auto more = page_ids(p1);
    got.insert(got.end(), more.begin(), more.end());
    EXPECT_EQ(got, oracle);
    std::uint64_t sum = p0["stats"]["page"]["queries_issued"].get<std::uint64_t>() +
                        p1["stats"]["page"]["queries_issued"].get<std::uint64_t>();
    json total = svc.stats(id);
    EXPECT_EQ(total["queries_issued"].get<std::uint64_t>(), sum);
    EXPECT_EQ(total["parallel"].get<std::uint64_t>() + total["sequential"].get<std::uint64_t>(), sum);
    EXPECT_GT(sum, 0u);
    double frac = total["parallel_fraction"];
    EXPECT_DOUBLE_EQ(frac, double(total["parallel"].get<std::uint64_t>()) / double(sum));
    for (std::size_t i = 1; i < p0["tuples"].size(); ++i)
        EXPECT_LE(p0["tuples"][i - 1]["score"].get<double>(), p0["tuples"][i]["score"].get<double>());
}

TEST(ServiceApi, RepeatedQueryIsServedFromTheSession) {
    auto svc = make_service();
    auto id = svc.create_session({{"source_id", "synthetic"}})["session_id"].get<std::string>();
    json body = md_body({{"a0", 1}, {"a1", -0.4}}, 7, "binary");
    json first = svc.query(id, body);
    auto before = svc.stats(id)["queries_issued"];
    json again = svc.query(id, body);
    EXPECT_EQ(again["stats"]["page"]["queries_issued"], 0);
    EXPECT_EQ(svc.stats(id)["queries_issued"], before);
    EXPECT_EQ(page_ids(again), page_ids(first));
}

TEST(ServiceApi, ShortPageThenEmptyExhaustedPage) {
    auto svc = make_service();
    auto id = svc.create_session({{"source_id", "homes"}})["session_id"].get<std::string>();
    json body = {{"predicates", {{{"attribute", "price"}, {"op", "range"}, {"lo", 50000}, {"hi", 90000}}}},
                 {"ranking", {{"mode", "1d"}, {"attribute", "price"}, {"direction", "desc"}}},
                 {"page_size", 100}};
    auto sim = sim_of(svc, "homes");
    std::size_t matches = 0;
    for (const auto& t : sim->dataset()) matches += t.number(0) <= 90000;
    ASSERT_LT(matches, 100u);
    json p = svc.query(id, body);
    EXPECT_EQ(p["tuples"].size(), matches);
    EXPECT_TRUE(p["exhausted"].get<bool>());
    json n = svc.next(id);
    EXPECT_TRUE(n["tuples"].empty());
    EXPECT_TRUE(n["exhausted"].get<bool>());
}

TEST(ServiceApi, InvalidRequestsIssueNoQueries) {
    auto svc = make_service();
    auto id = svc.create_session({{"source_id", "homes"}})["session_id"].get<std::string>();
    std::vector<json> bad = {
        md_body({{"price", 1.5}}),
        md_body({{"nope", 1}}),
        md_body({{"zip", 1}}),
        md_body({{"price", 0}}),
        md_body({{"price", 1}}, 0),
        md_body({{"price", 1}}, 101),
        md_body({{"price", 1}}, 10, "quantum"),
        {{"ranking", {{"mode", "1d"}, {"attribute", "price"}, {"direction", "sideways"}}}},
        {{"ranking", {{"mode", "2d"}}}},
        {{"predicates", {{{"attribute", "acres"}, {"op", "range"}, {"lo", 1}, {"hi", 2}}}}, {"ranking", {{"mode", "1d"}, {"attribute", "price"}}}},
        {{"predicates", {{{"attribute", "zip"}, {"value", 3}}}}, {"ranking", {{"mode", "1d"}, {"attribute", "price"}}}},
        json::array(),
    };
    for (const auto& b : bad) {
        EXPECT_THROW(svc.query(id, b), Error) << b.dump();
        EXPECT_EQ(svc.stats(id)["queries_issued"], 0) << b.dump();
    }
    try {
        svc.next(id);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::validation);
    }
}

TEST(ServiceApi, ConcurrentRequestOnOneSessionIsBusy) {
    auto svc = make_service(base_config(5));
    auto id = svc.create_session({{"source_id", "homes"}})["session_id"].get<std::string>();
    auto slow = std::async(std::launch::async, [&] { return svc.query(id, md_body({{"price", 1}, {"bedrooms", -1}}, 30)); });
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    try {
        svc.next(id);
        ADD_FAILURE() << "expected busy";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::busy);
    }
    EXPECT_EQ(slow.get()["tuples"].size(), 30u);
}

TEST(ServiceApi, AdminValidation) {
    auto svc = make_service();
    ASSERT_EQ(svc.boot_reports().size(), 2u);
    EXPECT_TRUE(svc.boot_reports()[0]["kept"].empty());
    try {
        svc.admin_validate("wrong", {{"source_id", "homes"}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::auth);
    }
    auto id = svc.create_session({{"source_id", "synthetic"}})["session_id"].get<std::string>();
    svc.query(id, md_body({{"a0", 1}, {"a1", 0.5}}, 20));
    std::size_t cached = svc.dense_store().size();
    ASSERT_GT(cached, 0u);
    json kept = svc.admin_validate("secret", {{"source_id", "synthetic"}});
    EXPECT_EQ(kept["kept"].size(), cached);
    EXPECT_TRUE(kept["evicted"].empty());
    sim_of(svc, "synthetic")->erase(sim_of(svc, "synthetic")->dataset().front().id);
    json evicted = svc.admin_validate("secret", {{"source_id", "synthetic"}});
    EXPECT_EQ(evicted["evicted"].size(), cached);
    EXPECT_EQ(svc.dense_store().size(), 0u);
}

TEST(HttpApi, RoundTrip) {
    auto svc = make_service();
    HttpServer server(svc);
    int port = server.bind_any("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    auto src = cli.Get("/sources");
    ASSERT_TRUE(src);
    EXPECT_EQ(src->status, 200);
    EXPECT_EQ(json::parse(src->body).size(), 2u);

    auto missing = cli.Post("/sessions", R"({"source_id":"nope"})", "application/json");
    EXPECT_EQ(missing->status, 404);
    EXPECT_EQ(json::parse(missing->body)["code"], "not_found");

    auto created = cli.Post("/sessions", R"({"source_id":"synthetic"})", "application/json");
    ASSERT_EQ(created->status, 200);
    std::string id = json::parse(created->body)["session_id"];

    auto bad = cli.Post("/sessions/" + id + "/query", md_body({{"a0", 1.5}}).dump(), "application/json");
    EXPECT_EQ(bad->status, 400);
    EXPECT_EQ(json::parse(bad->body)["field"], "a0");
    auto garbled = cli.Post("/sessions/" + id + "/query", "{not json", "application/json");
    EXPECT_EQ(garbled->status, 400);

    auto q = cli.Post("/sessions/" + id + "/query", md_body({{"a0", 1}, {"a1", -0.3}}, 5).dump(), "application/json");
    ASSERT_EQ(q->status, 200);
    auto n = cli.Post("/sessions/" + id + "/next", "", "application/json");
    ASSERT_EQ(n->status, 200);
    auto got = page_ids(json::parse(q->body));
    auto more = page_ids(json::parse(n->body));
    got.insert(got.end(), more.begin(), more.end());
    auto sim = sim_of(svc, "synthetic");
    RankingSpec spec{{{"a0", 1}, {"a1", -0.3}}};
    EXPECT_EQ(got, ids(oracle_order(sim->describe().schema, sim->dataset(), {}, RankingMD{spec}), 10));

    auto st = cli.Get("/sessions/" + id + "/stats");
    EXPECT_EQ(st->status, 200);
    EXPECT_GT(json::parse(st->body)["queries_issued"].get<int>(), 0);
    EXPECT_EQ(cli.Get("/sessions/ffff/stats")->status, 404);

    auto denied = cli.Post("/admin/validate-cache", R"({"source_id":"synthetic"})", "application/json");
    EXPECT_EQ(denied->status, 401);
    httplib::Headers h{{"X-Admin-Token", "secret"}};
    auto ok = cli.Post("/admin/validate-cache", h, R"({"source_id":"synthetic"})", "application/json");
    EXPECT_EQ(ok->status, 200);
    EXPECT_EQ(json::parse(ok->body)["source_id"], "synthetic");

    server.stop();
    t.join();
}
