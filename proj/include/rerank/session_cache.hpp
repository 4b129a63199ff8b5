#pragma once

#include "rerank/domain.hpp"
#include "rerank/source.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rerank {

/// Per-session memory: every tuple any backend response returned in this
/// session, the pages already served, and the session's query meter.
/// Confined to one session; not synchronized.
class SessionCache {
public:
    explicit SessionCache(std::string session_id) : session_id_(std::move(session_id)) {}

    const std::string& session_id() const { return session_id_; }

    void record(const std::vector<Tuple>& tuples) {
        for (const auto& t : tuples) seen_.try_emplace(t.id, t);
    }

    std::optional<Tuple> lookup(const std::string& tuple_id) const {
        auto it = seen_.find(tuple_id);
        if (it == seen_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t seen_count() const { return seen_.size(); }

    std::vector<std::vector<ScoredTuple>>& pages_served() { return pages_; }
    const std::vector<std::vector<ScoredTuple>>& pages_served() const { return pages_; }

    QueryMeter& meter() { return meter_; }
    const QueryMeter& meter() const { return meter_; }

private:
    std::string session_id_;
    std::map<std::string, Tuple> seen_;
    std::vector<std::vector<ScoredTuple>> pages_;
    QueryMeter meter_;
};

inline std::optional<Tuple> session_lookup(const SessionCache& cache, const std::string& tuple_id) {
    return cache.lookup(tuple_id);
}

} // namespace rerank
