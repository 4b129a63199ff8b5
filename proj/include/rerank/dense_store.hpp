#pragma once

// Shared index of fully crawled dense regions ("slabs"). Entries are keyed by
// (source, filter signature, region) and tagged with the source version they
// were crawled at. With a directory the store is durable: one file per entry,
// a JSON header line followed by the slab as dataset CSV, replaced atomically
// via rename so readers never see a partial slab.

#include "rerank/digest.hpp"
#include "rerank/io.hpp"
#include "rerank/source.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <shared_mutex>

namespace rerank {

/// Axis-aligned region over named attributes, sorted by attribute name.
/// Attributes not listed are unconstrained.
using RegionBounds = std::vector<std::pair<std::string, Interval>>;

inline RegionBounds normalized_bounds(RegionBounds b) {
    std::sort(b.begin(), b.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    return b;
}

/// True when `outer` constrains nothing that `inner` leaves looser.
inline bool bounds_contain(const RegionBounds& outer, const RegionBounds& inner) {
    for (const auto& [attr, iv] : outer) {
        auto it = std::find_if(inner.begin(), inner.end(), [&](const auto& p) { return p.first == attr; });
        if (it == inner.end() || !iv.contains(it->second)) return false;
    }
    return true;
}

inline json bounds_to_json(const RegionBounds& b) {
    json out = json::array();
    for (const auto& [attr, iv] : b) {
        json j = interval_to_json(iv);
        j["attribute"] = attr;
        out.push_back(std::move(j));
    }
    return out;
}

inline RegionBounds bounds_from_json(const json& j) {
    RegionBounds b;
    for (const auto& e : j) b.emplace_back(e.at("attribute").get<std::string>(), interval_from_json(e));
    return normalized_bounds(std::move(b));
}

/// Digest of the non-ranking filter predicates of a base region: ranking
/// attribute ranges are widened to the full domain before hashing.
inline std::string filter_signature(const Schema& schema, const Region& base,
                                    const std::vector<std::size_t>& ranking_attributes) {
    Region r = base;
    for (std::size_t i : ranking_attributes) r.ranges[i] = schema[i].domain();
    return sha256_hex(query_to_json(to_query(schema, r)).dump()).substr(0, 32);
}

struct DenseRegionEntry {
    std::string source_id;
    std::string filter_signature;
    RegionBounds region;
    std::vector<Tuple> tuples;
    std::string source_version;
    std::int64_t created_at = 0; // ms since epoch
    std::uint64_t sequence = 0;  // assigned by the store; larger is newer
    bool suspect = false;
    Schema schema;

    std::string region_digest() const { return sha256_hex(bounds_to_json(region).dump()).substr(0, 32); }
    std::string key() const { return source_id + "/" + filter_signature + "/" + region_digest(); }
};

struct ValidationReport {
    std::vector<std::string> kept;
    std::vector<std::string> evicted;
    bool deferred = false; // source unreachable; entries marked suspect
};

class DenseStore {
public:
    /// Memory-only store.
    DenseStore() = default;

    /// Durable store rooted at `dir` (created if missing); existing entries
    /// are loaded.
    explicit DenseStore(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw Error(ErrorCode::storage, "cannot create store directory '" + dir_.string() + "'");
        load();
    }

    bool durable() const { return !dir_.empty(); }

    /// Best entry whose region contains `region`, crawled at `current_version`.
    /// Smallest slab wins; newer breaks ties. Suspect entries are skipped.
    std::optional<DenseRegionEntry> get(const std::string& source_id, const std::string& signature,
                                        const RegionBounds& region, const std::string& current_version) const {
        std::shared_lock lock(mutex_);
        const DenseRegionEntry* best = nullptr;
        for (const auto& [key, e] : entries_) {
            if (e.source_id != source_id || e.filter_signature != signature) continue;
            if (e.suspect || e.source_version != current_version) continue;
            if (!bounds_contain(e.region, region)) continue;
            if (!best || e.tuples.size() < best->tuples.size() ||
                (e.tuples.size() == best->tuples.size() && e.sequence > best->sequence))
                best = &e;
        }
        if (!best) return std::nullopt;
        return *best;
    }

    /// Stores a slab. Returns false (and stores nothing) when the entry's
    /// version is not the source's current version.
    bool put(DenseRegionEntry entry, const std::string& current_version) {
        if (entry.source_version != current_version) return false;
        entry.region = normalized_bounds(std::move(entry.region));
        entry.suspect = false;
        if (entry.created_at == 0)
            entry.created_at = std::chrono::duration_cast<std::chrono::milliseconds>(
                                   std::chrono::system_clock::now().time_since_epoch())
                                   .count();
        std::unique_lock lock(mutex_);
        entry.sequence = ++sequence_;
        std::string key = entry.key();
        if (durable()) write_entry(entry);
        entries_[key] = std::move(entry);
        return true;
    }

    /// Evicts every entry of the source whose version differs from the
    /// source's current snapshot. An unreachable source defers validation and
    /// marks the source's entries suspect.
    ValidationReport validate(TopKSource& source) {
        ValidationReport report;
        const std::string& id = source.describe().source_id;
        std::string current;
        try {
            current = source.snapshot_version();
        } catch (const Error&) {
            std::unique_lock lock(mutex_);
            report.deferred = true;
            for (auto& [key, e] : entries_)
                if (e.source_id == id) {
                    e.suspect = true;
                    report.kept.push_back(key);
                }
            return report;
        }
        std::unique_lock lock(mutex_);
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (it->second.source_id != id) {
                ++it;
                continue;
            }
            if (it->second.source_version == current) {
                it->second.suspect = false;
                report.kept.push_back(it->first);
                ++it;
            } else {
                report.evicted.push_back(it->first);
                if (durable()) std::filesystem::remove(path_for(it->second));
                it = entries_.erase(it);
            }
        }
        return report;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return entries_.size();
    }

    std::vector<DenseRegionEntry> entries() const {
        std::shared_lock lock(mutex_);
        std::vector<DenseRegionEntry> out;
        for (const auto& [_, e] : entries_) out.push_back(e);
        return out;
    }

private:
    std::filesystem::path path_for(const DenseRegionEntry& e) const {
        return dir_ / sha256_hex(e.source_id).substr(0, 16) / (e.filter_signature + "-" + e.region_digest() + ".entry");
    }

    static json header_of(const DenseRegionEntry& e) {
        return {{"source", e.source_id},         {"signature", e.filter_signature}, {"region", bounds_to_json(e.region)},
                {"version", e.source_version},   {"count", e.tuples.size()},        {"created_at", e.created_at},
                {"sequence", e.sequence},        {"schema", schema_to_json(e.schema)}};
    }

    void write_entry(const DenseRegionEntry& e) const {
        auto path = path_for(e);
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        auto tmp = path;
        tmp += ".tmp";
        write_file(tmp.string(), header_of(e).dump() + "\n" + tuples_to_csv(e.schema, e.tuples));
        std::filesystem::rename(tmp, path, ec);
        if (ec) throw Error(ErrorCode::storage, "cannot commit entry '" + path.string() + "': " + ec.message());
    }

    void load() {
        for (const auto& f : std::filesystem::recursive_directory_iterator(dir_)) {
            if (!f.is_regular_file()) continue;
            if (f.path().extension() == ".tmp") {
                std::filesystem::remove(f.path()); // interrupted write
                continue;
            }
            if (f.path().extension() != ".entry") continue;
            std::string text = read_file(f.path().string());
            auto nl = text.find('\n');
            if (nl == std::string::npos) throw Error(ErrorCode::storage, "corrupt entry '" + f.path().string() + "'");
            try {
                json h = json::parse(text.substr(0, nl));
                DenseRegionEntry e;
                e.source_id = h.at("source").get<std::string>();
                e.filter_signature = h.at("signature").get<std::string>();
                e.region = bounds_from_json(h.at("region"));
                e.source_version = h.at("version").get<std::string>();
                e.created_at = h.at("created_at").get<std::int64_t>();
                e.sequence = h.at("sequence").get<std::uint64_t>();
                e.schema = schema_from_json(h.at("schema"));
                e.tuples = tuples_from_csv(e.schema, std::string_view(text).substr(nl + 1));
                if (e.tuples.size() != h.at("count").get<std::size_t>())
                    throw Error(ErrorCode::storage, "tuple count mismatch");
                sequence_ = std::max(sequence_, e.sequence);
                std::string key = e.key();
                entries_[key] = std::move(e);
            } catch (const json::exception& ex) {
                throw Error(ErrorCode::storage, "corrupt entry '" + f.path().string() + "': " + ex.what());
            }
        }
    }

    std::filesystem::path dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, DenseRegionEntry> entries_;
    std::uint64_t sequence_ = 0;
};

inline std::optional<DenseRegionEntry> dense_get(const DenseStore& store, const std::string& source_id,
                                                 const std::string& signature, const RegionBounds& region,
                                                 const std::string& current_version) {
    return store.get(source_id, signature, normalized_bounds(region), current_version);
}

inline bool dense_put(DenseStore& store, DenseRegionEntry entry, const std::string& current_version) {
    return store.put(std::move(entry), current_version);
}

inline ValidationReport validate_dense_cache(DenseStore& store, TopKSource& source) { return store.validate(source); }

} // namespace rerank
