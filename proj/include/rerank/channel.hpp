#pragma once

#include "rerank/dense_store.hpp"
#include "rerank/executor.hpp"
#include "rerank/session_cache.hpp"

#include <optional>
#include <string>

namespace rerank {

struct EngineOptions {
    /// 1D: an overflowing interval narrower than this fraction of the
    /// attribute's domain is a dense region.
    double dense_threshold = 1e-3;
    /// MD: same, as a fraction of the normalized volume over the ranking axes.
    double dense_threshold_md = 1e-4;
    /// MD baseline: grid segments per weighted axis when covering a contour.
    std::size_t cover_granularity = 4;
};

/// An engine's handle on one source for one session: routes queries through
/// the executor, charges the session meter, remembers every returned tuple,
/// and exposes the dense-region store (if any).
class QueryChannel {
public:
    QueryChannel(Executor& executor, std::string source_id, QueryMeter& meter, SessionCache* session = nullptr,
                 DenseStore* dense = nullptr, EngineOptions options = {})
        : executor_(executor), source_id_(std::move(source_id)), meter_(meter), session_(session), dense_(dense),
          options_(options), source_(executor.source(source_id_)) {}

    const SourceDescriptor& descriptor() const { return source_->describe(); }
    const Schema& schema() const { return source_->describe().schema; }
    const std::string& source_id() const { return source_id_; }
    const EngineOptions& options() const { return options_; }
    QueryMeter& meter() { return meter_; }

    DenseStore* dense() const { return dense_; }

    /// Source version the dense store is consulted against; fetched once per
    /// channel. Returns nullopt (cache disabled) if the source cannot say.
    const std::optional<std::string>& version() {
        if (!version_checked_) {
            version_checked_ = true;
            try {
                version_ = source_->snapshot_version();
            } catch (const Error&) {
                version_.reset();
            }
        }
        return version_;
    }

    TopKResponse search(const Region& region) {
        TopKResponse r = executor_.submit(source_id_, to_query(schema(), region), meter_);
        if (session_) session_->record(r.tuples);
        return r;
    }

    std::vector<TopKResponse> search_batch(const std::vector<Region>& regions) {
        Batch batch;
        batch.source_id = source_id_;
        batch.batch_id = ++batches_;
        for (const auto& r : regions) batch.queries.push_back(to_query(schema(), r));
        auto out = executor_.submit_batch(batch, meter_);
        if (session_)
            for (const auto& r : out) session_->record(r.tuples);
        return out;
    }

    /// Slab lookup; storage failures degrade to a miss.
    std::optional<DenseRegionEntry> slab(const std::string& signature, const RegionBounds& region) {
        if (!dense_ || !version()) return std::nullopt;
        try {
            return dense_get(*dense_, source_id_, signature, region, *version());
        } catch (const Error&) {
            return std::nullopt;
        }
    }

    void store_slab(const std::string& signature, RegionBounds region, std::vector<Tuple> tuples) {
        if (!dense_ || !version()) return;
        DenseRegionEntry e;
        e.source_id = source_id_;
        e.filter_signature = signature;
        e.region = std::move(region);
        e.tuples = std::move(tuples);
        e.source_version = *version();
        e.schema = schema();
        try {
            dense_put(*dense_, std::move(e), *version());
        } catch (const Error&) {
            // Uncached operation is always correct.
        }
    }

private:
    Executor& executor_;
    std::string source_id_;
    QueryMeter& meter_;
    SessionCache* session_;
    DenseStore* dense_;
    EngineOptions options_;
    std::shared_ptr<TopKSource> source_;
    std::optional<std::string> version_;
    bool version_checked_ = false;
    std::uint64_t batches_ = 0;
};

} // namespace rerank
