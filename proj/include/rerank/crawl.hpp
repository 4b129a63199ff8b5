#pragma once

// Exhaustive enumeration of every tuple in a region through the top-k
// interface: query a region; if it overflows, partition it and recurse until
// every piece comes back complete.

#include "rerank/channel.hpp"

#include <algorithm>
#include <set>

namespace rerank {

namespace detail {

inline bool pinned(const AttributeSchema& a, const Interval& iv) {
    if (iv.is_point()) return true;
    return a.kind == AttributeKind::numeric_discrete && iv.width() < a.resolution;
}

inline double normalized_width(const AttributeSchema& a, const Interval& iv) {
    double span = a.domain_max - a.domain_min;
    return span > 0 ? iv.width() / span : 0.0;
}

/// Partitions an overflowing region into disjoint pieces that cover it.
/// Pivot: the widest (normalized) unpinned attribute among `preferred`, then
/// among all numeric attributes, then an unpinned categorical attribute. When
/// every returned tuple shares the pivot value the split is three-way around
/// that value, which isolates equal-value clusters in one step.
inline std::vector<Region> split_overflowing(const Schema& schema, const Region& region,
                                             const std::vector<Tuple>& page,
                                             const std::vector<std::size_t>& preferred) {
    auto widest = [&](auto&& candidates) -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        double best_w = -1;
        for (std::size_t i : candidates) {
            if (!schema[i].numeric() || pinned(schema[i], region.ranges[i])) continue;
            double w = normalized_width(schema[i], region.ranges[i]);
            if (w > best_w) {
                best_w = w;
                best = i;
            }
        }
        return best;
    };
    std::vector<std::size_t> all(schema.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    std::optional<std::size_t> pivot = widest(preferred);
    if (!pivot) pivot = widest(all);
    if (pivot) {
        std::size_t p = *pivot;
        const Interval& iv = region.ranges[p];
        std::vector<Interval> parts;
        bool same = !page.empty() && std::all_of(page.begin(), page.end(), [&](const Tuple& t) {
            return t.number(p) == page.front().number(p);
        });
        if (same) {
            parts = iv.split_around(page.front().number(p));
        } else if (auto halves = iv.halve()) {
            parts = {halves->first, halves->second};
        }
        if (parts.size() > 1) {
            std::vector<Region> out;
            for (const auto& part : parts) {
                Region r = region;
                r.ranges[p] = part;
                out.push_back(std::move(r));
            }
            return out;
        }
    }
    for (std::size_t i = 0; i < schema.size(); ++i) {
        if (schema[i].numeric() || region.labels[i]) continue;
        std::vector<Region> out;
        for (const auto& c : schema[i].categories) {
            Region r = region;
            r.labels[i] = c;
            out.push_back(std::move(r));
        }
        return out;
    }
    throw Error(ErrorCode::indistinguishable,
                "more than k tuples are indistinguishable through the search interface (fully pinned query overflows)");
}

} // namespace detail

/// Round-based crawl of one region. Each round's queries are independent and
/// are issued together.
class CrawlTask {
public:
    CrawlTask(const Schema& schema, Region root, std::vector<std::size_t> preferred = {})
        : schema_(&schema), root_(std::move(root)), preferred_(std::move(preferred)) {
        if (!root_.empty()) pending_.push_back(root_);
    }

    /// Starts from a root already known to overflow with the given page.
    static CrawlTask from_overflow(const Schema& schema, Region root, const std::vector<Tuple>& page,
                                   std::vector<std::size_t> preferred = {}) {
        CrawlTask t(schema, root, preferred);
        std::vector<Tuple> inside;
        for (const auto& tup : page)
            if (root.matches(tup)) inside.push_back(tup);
        t.pending_ = detail::split_overflowing(schema, root, inside, t.preferred_);
        t.root_overflowed_ = true;
        return t;
    }

    const Region& root() const { return root_; }
    bool done() const { return pending_.empty(); }
    const std::vector<Region>& pending() const { return pending_; }
    bool root_overflowed() const { return root_overflowed_; }

    void absorb(const std::vector<TopKResponse>& responses) {
        std::vector<Region> next;
        for (std::size_t i = 0; i < responses.size(); ++i) {
            const auto& resp = responses[i];
            for (const auto& t : resp.tuples)
                if (ids_.insert(t.id).second) found_.push_back(t);
            if (resp.overflow()) {
                if (first_round_) root_overflowed_ = true;
                auto parts = detail::split_overflowing(*schema_, pending_[i], resp.tuples, preferred_);
                for (auto& p : parts)
                    if (!p.empty()) next.push_back(std::move(p));
            }
        }
        first_round_ = false;
        pending_ = std::move(next);
    }

    /// Also accepts tuples learned elsewhere (e.g. the overflow page that
    /// triggered the crawl); duplicates are ignored.
    void add_known(const std::vector<Tuple>& tuples) {
        for (const auto& t : tuples)
            if (root_.matches(t) && ids_.insert(t.id).second) found_.push_back(t);
    }

    std::vector<Tuple> take_result() {
        std::sort(found_.begin(), found_.end(), [](const Tuple& a, const Tuple& b) { return a.id < b.id; });
        return std::move(found_);
    }

private:
    const Schema* schema_;
    Region root_;
    std::vector<std::size_t> preferred_;
    std::vector<Region> pending_;
    std::vector<Tuple> found_;
    std::set<std::string> ids_;
    bool root_overflowed_ = false;
    bool first_round_ = true;
};

/// Drives a crawl to completion: the first query alone (sequential), later
/// rounds as parallel batches. Result sorted by id.
inline std::vector<Tuple> run_crawl(QueryChannel& ch, CrawlTask& task, bool first_sequential = true) {
    bool first = first_sequential;
    while (!task.done()) {
        if (first && task.pending().size() == 1) {
            task.absorb({ch.search(task.pending().front())});
        } else {
            task.absorb(ch.search_batch(task.pending()));
        }
        first = false;
    }
    return task.take_result();
}

/// Every tuple matching base ∧ attribute = value.
inline std::vector<Tuple> crawl_equal_value(QueryChannel& ch, const SearchQuery& base, const std::string& attribute,
                                           double value) {
    const Schema& schema = ch.schema();
    std::size_t a = schema.index_of(attribute);
    if (!schema[a].numeric()) throw Error(ErrorCode::kind, "equal-value crawl needs a numeric attribute", attribute);
    if (!schema[a].domain().contains(value)) throw Error(ErrorCode::domain, "value outside domain", attribute);
    Region r = to_region(schema, base);
    r.ranges[a] = r.ranges[a].intersect(Interval::point(value));
    CrawlTask task(schema, r);
    if (r.empty()) {
        // Still costs the one pinned query the interface would need.
        ch.search(r);
        return {};
    }
    return run_crawl(ch, task);
}

/// Every tuple matching base ∧ attribute ∈ interval, sorted by (value, id).
inline std::vector<Tuple> crawl_region(QueryChannel& ch, const SearchQuery& base, const std::string& attribute,
                                       const Interval& interval) {
    const Schema& schema = ch.schema();
    std::size_t a = schema.index_of(attribute);
    if (!schema[a].numeric()) throw Error(ErrorCode::kind, "region crawl needs a numeric attribute", attribute);
    Region r = to_region(schema, base);
    r.ranges[a] = r.ranges[a].intersect(interval);
    CrawlTask task(schema, r, {a});
    std::vector<Tuple> out;
    if (r.empty()) ch.search(r);
    else out = run_crawl(ch, task);
    std::sort(out.begin(), out.end(), [a](const Tuple& x, const Tuple& y) {
        if (x.number(a) != y.number(a)) return x.number(a) < y.number(a);
        return x.id < y.id;
    });
    return out;
}

} // namespace rerank
