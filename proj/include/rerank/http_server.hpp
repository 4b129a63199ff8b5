#pragma once

#include "rerank/service.hpp"

#include <httplib.h>

namespace rerank {

inline int http_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::validation:
    case ErrorCode::domain:
    case ErrorCode::kind:
    case ErrorCode::schema:
    case ErrorCode::config: return 400;
    case ErrorCode::auth: return 401;
    case ErrorCode::not_found: return 404;
    case ErrorCode::busy: return 409;
    case ErrorCode::expired: return 410;
    case ErrorCode::no_matches: return 404;
    case ErrorCode::transient_source:
    case ErrorCode::source:
    case ErrorCode::indistinguishable: return 502;
    case ErrorCode::storage: return 500;
    }
    return 500;
}

/// HTTP+JSON front of a Service.
class HttpServer {
public:
    explicit HttpServer(Service& service) : service_(service) { routes(); }

    /// Binds and serves on the calling thread until stop().
    bool listen(const std::string& host, int port) { return server_.listen(host, port); }

    /// Binds to an ephemeral port; serve with listen_after_bind().
    int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
    bool listen_after_bind() { return server_.listen_after_bind(); }

    void stop() { server_.stop(); }
    void wait_until_ready() { server_.wait_until_ready(); }

private:
    template <class F>
    void handle(httplib::Response& res, F&& f) {
        try {
            json out = f();
            res.status = 200;
            res.set_content(out.dump(), "application/json");
        } catch (const Error& e) {
            res.status = http_status(e.code());
            res.set_content(error_to_json(e).dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 500;
            res.set_content(json{{"code", "internal_error"}, {"message", e.what()}}.dump(), "application/json");
        }
    }

    static json body_of(const httplib::Request& req) {
        if (req.body.empty()) return json::object();
        try {
            return json::parse(req.body);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::validation, std::string("malformed JSON body: ") + e.what(), "body");
        }
    }

    void routes() {
        server_.Get("/sources", [this](const httplib::Request&, httplib::Response& res) {
            handle(res, [&] { return service_.sources(); });
        });
        server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { return service_.create_session(body_of(req)); });
        });
        server_.Post(R"(/sessions/([A-Za-z0-9]+)/query)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { return service_.query(req.matches[1], body_of(req)); });
        });
        server_.Post(R"(/sessions/([A-Za-z0-9]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { return service_.next(req.matches[1]); });
        });
        server_.Get(R"(/sessions/([A-Za-z0-9]+)/stats)", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] { return service_.stats(req.matches[1]); });
        });
        server_.Post("/admin/validate-cache", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&] {
                std::string token = req.get_header_value("X-Admin-Token");
                std::string auth = req.get_header_value("Authorization");
                if (token.empty() && auth.starts_with("Bearer ")) token = auth.substr(7);
                return service_.admin_validate(token, body_of(req));
            });
        });
    }

    Service& service_;
    httplib::Server server_;
};

} // namespace rerank
