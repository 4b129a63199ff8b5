#pragma once

// The top-k search interface of a hidden database, and the query meter that
// counts what it costs to use it.

#include "rerank/domain.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace rerank {

enum class ResponseStatus {
    overflow, // truncated at k, more matches exist
    complete, // every match is in the list
};

struct TopKResponse {
    std::vector<Tuple> tuples;
    ResponseStatus status = ResponseStatus::complete;
    std::chrono::system_clock::time_point issued_at{};

    bool complete() const { return status == ResponseStatus::complete; }
    bool overflow() const { return status == ResponseStatus::overflow; }
};

/// A named list of one-click ranking functions offered with a source.
struct PopularFunction {
    std::string name;
    RankingSpec spec;
};

struct SourceDescriptor {
    std::string source_id;
    std::string name;
    Schema schema;
    std::size_t k = 1;
    std::vector<PopularFunction> popular_functions;
};

/// Anything that answers conjunctive queries with at most k tuples under its
/// own, unknown ranking. Implementations must be safe for concurrent search().
///
/// Adapters for backends that cannot report truncation must return overflow
/// whenever the page is full.
class TopKSource {
public:
    virtual ~TopKSource() = default;

    /// Throws Error(schema) for unknown attributes and
    /// Error(transient_source) when a retry may succeed.
    virtual TopKResponse search(const SearchQuery& q) = 0;
    virtual const SourceDescriptor& describe() const = 0;
    /// Equal tokens imply identical data.
    virtual std::string snapshot_version() = 0;
};

/// Backend cost counters. total = parallel_batch + sequential always holds
/// at rest: both are bumped together with total.
class QueryMeter {
public:
    struct Snapshot {
        std::uint64_t total = 0;
        std::uint64_t parallel_batch = 0;
        std::uint64_t sequential = 0;
        std::chrono::nanoseconds wall_time{0};

        double parallel_fraction() const {
            return total == 0 ? 0.0 : static_cast<double>(parallel_batch) / static_cast<double>(total);
        }

        Snapshot operator-(const Snapshot& earlier) const {
            return {total - earlier.total, parallel_batch - earlier.parallel_batch, sequential - earlier.sequential,
                    wall_time - earlier.wall_time};
        }
    };

    void record_sequential(std::uint64_t n = 1) {
        sequential_.fetch_add(n);
        total_.fetch_add(n);
    }
    void record_parallel(std::uint64_t n) {
        parallel_.fetch_add(n);
        total_.fetch_add(n);
    }
    void add_time(std::chrono::nanoseconds d) { wall_ns_.fetch_add(d.count()); }

    Snapshot snapshot() const {
        return {total_.load(), parallel_.load(), sequential_.load(), std::chrono::nanoseconds(wall_ns_.load())};
    }

private:
    std::atomic<std::uint64_t> total_{0};
    std::atomic<std::uint64_t> parallel_{0};
    std::atomic<std::uint64_t> sequential_{0};
    std::atomic<std::int64_t> wall_ns_{0};
};

} // namespace rerank
