#pragma once

// Get-next over a single numeric attribute.
//
// All three variants keep the same state: a "covered" boundary such that every
// matching tuple on the near side of it is known, and a buffer of known tuples
// not yet returned. A get-next either pops the buffer or searches the space
// beyond the boundary until some complete response (or a fully crawled slab)
// proves which tuples come next. Descending order runs the same interval
// arithmetic on mirrored intervals; queries always carry raw bounds.

#include "rerank/crawl.hpp"

#include <deque>
#include <limits>

namespace rerank {

enum class Direction { ascending, descending };
enum class Algorithm1D { baseline, binary, rerank };

inline const char* to_string(Algorithm1D a) {
    switch (a) {
    case Algorithm1D::baseline: return "baseline";
    case Algorithm1D::binary: return "binary";
    case Algorithm1D::rerank: return "rerank";
    }
    return "?";
}

class GetNext1D {
public:
    GetNext1D(QueryChannel& channel, const SearchQuery& base, const std::string& attribute, Direction direction,
              Algorithm1D algorithm)
        : ch_(channel), schema_(channel.schema()), attr_(schema_.index_of(attribute)), direction_(direction),
          algorithm_(algorithm) {
        if (!schema_[attr_].numeric())
            throw Error(ErrorCode::kind, "cannot rank by categorical '" + attribute + "'", attribute);
        base_ = to_region(schema_, base);
        full_ = to_key(base_.ranges[attr_]);
        if (base_.unsatisfiable) full_ = Interval{0, 0, true, true};
        signature_ = filter_signature(schema_, base_, {attr_});
    }

    /// The next tuple in (value, id) order, or nullopt once every match has
    /// been returned.
    std::optional<Tuple> next() {
        if (buffer_.empty()) {
            Interval rest = beyond();
            if (rest.empty()) return std::nullopt;
            if (algorithm_ == Algorithm1D::baseline)
                search_baseline(rest);
            else
                search_binary(rest);
            if (buffer_.empty()) return std::nullopt;
        }
        Tuple t = std::move(buffer_.front());
        buffer_.pop_front();
        discovered_.push_back(t);
        return t;
    }

    const std::vector<Tuple>& discovered() const { return discovered_; }
    std::size_t attribute_index() const { return attr_; }
    Direction direction() const { return direction_; }

    /// Value of the last returned tuple, or the domain's best end before the
    /// first one.
    double frontier_value() const {
        if (!discovered_.empty()) return discovered_.back().number(attr_);
        return direction_ == Direction::ascending ? schema_[attr_].domain_min : schema_[attr_].domain_max;
    }

private:
    struct Probe {
        bool complete = false;
        std::vector<Tuple> tuples;
        Interval extent; // key space; everything matching inside it is in `tuples` when complete
    };

    double key(const Tuple& t) const {
        double v = t.number(attr_);
        return direction_ == Direction::ascending ? v : -v;
    }
    Interval to_key(const Interval& raw) const { return direction_ == Direction::ascending ? raw : raw.mirrored(); }
    Interval to_raw(const Interval& k) const { return direction_ == Direction::ascending ? k : k.mirrored(); }

    Interval beyond() const {
        if (!covered_) return full_;
        return full_.intersect(Interval{covered_->first, std::numeric_limits<double>::infinity(), covered_->second, false});
    }

    Region region_for(const Interval& k) const {
        Region r = base_;
        r.ranges[attr_] = to_raw(k);
        return r;
    }

    bool dense(const Interval& k) const {
        const auto& a = schema_[attr_];
        double span = a.domain_max - a.domain_min;
        return k.is_point() || (span > 0 && k.width() < ch_.options().dense_threshold * span);
    }

    /// Makes everything matching in `extent` (which starts at the covered
    /// boundary) known.
    void absorb(const Interval& extent, std::vector<Tuple> tuples) {
        std::sort(tuples.begin(), tuples.end(), [this](const Tuple& a, const Tuple& b) {
            if (key(a) != key(b)) return key(a) < key(b);
            return a.id < b.id;
        });
        for (auto& t : tuples) buffer_.push_back(std::move(t));
        covered_ = {extent.hi, !extent.hi_open};
    }

    std::optional<Probe> from_slab(const Interval& k) {
        if (algorithm_ != Algorithm1D::rerank) return std::nullopt;
        auto entry = ch_.slab(signature_, {{schema_[attr_].name, to_raw(k)}});
        if (!entry) return std::nullopt;
        Interval slab_key{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), false, false};
        for (const auto& [name, iv] : entry->region)
            if (name == schema_[attr_].name) slab_key = to_key(iv);
        Probe p;
        p.complete = true;
        p.extent = beyond().intersect(slab_key);
        Region r = region_for(p.extent);
        for (auto& t : entry->tuples)
            if (r.matches(t)) p.tuples.push_back(std::move(t));
        return p;
    }

    Probe probe(const Interval& k) {
        if (auto p = from_slab(k)) return std::move(*p);
        TopKResponse r = ch_.search(region_for(k));
        return {r.complete(), std::move(r.tuples), k};
    }

    /// All tuples of an overflowing, dense interval: from the slab cache when
    /// possible, otherwise by crawling (and, for rerank, indexing the slab).
    void resolve_dense(const Interval& w, const std::vector<Tuple>& page) {
        if (auto p = from_slab(w)) {
            absorb(p->extent, std::move(p->tuples));
            return;
        }
        CrawlTask task = CrawlTask::from_overflow(schema_, region_for(w), page, {attr_});
        task.add_known(page);
        std::vector<Tuple> tuples = run_crawl(ch_, task, false);
        if (algorithm_ == Algorithm1D::rerank) ch_.store_slab(signature_, {{schema_[attr_].name, to_raw(w)}}, tuples);
        absorb(w, std::move(tuples));
    }

    void search_binary(Interval w) {
        Probe p = probe(w);
        if (p.complete) {
            absorb(p.extent, std::move(p.tuples));
            return;
        }
        std::vector<Tuple> page = std::move(p.tuples);
        // w overflows: it holds more than k matches, so the next tuple is in it.
        for (;;) {
            if (dense(w)) {
                resolve_dense(w, page);
                return;
            }
            auto [lower, upper] = *w.halve();
            Probe q = probe(lower);
            if (q.complete) {
                bool has_any = !q.tuples.empty();
                absorb(q.extent, std::move(q.tuples));
                if (has_any) return;
                w = w.intersect(beyond());
                continue;
            }
            w = lower;
            page = std::move(q.tuples);
        }
    }

    void search_baseline(const Interval& rest) {
        Interval r = rest;
        std::optional<double> candidate;
        for (;;) {
            TopKResponse resp = ch_.search(region_for(r));
            if (resp.complete()) {
                absorb(r, std::move(resp.tuples));
                if (!buffer_.empty() || !candidate) return;
                // Nothing strictly before the candidate value: the answer sits
                // at that value, together with any ties.
                r = Interval::point(*candidate);
                continue;
            }
            if (r.is_point()) {
                CrawlTask task = CrawlTask::from_overflow(schema_, region_for(r), resp.tuples, {attr_});
                task.add_known(resp.tuples);
                absorb(r, run_crawl(ch_, task, false));
                return;
            }
            double m = std::numeric_limits<double>::infinity();
            for (const auto& t : resp.tuples) m = std::min(m, key(t));
            if (!candidate || m < *candidate) {
                candidate = m;
                r = Interval{r.lo, m, r.lo_open, false};
            } else {
                r = Interval{r.lo, *candidate, r.lo_open, true};
            }
        }
    }

    QueryChannel& ch_;
    const Schema& schema_;
    std::size_t attr_;
    Direction direction_;
    Algorithm1D algorithm_;
    Region base_;
    Interval full_;
    std::string signature_;
    std::optional<std::pair<double, bool>> covered_; // key value, inclusive
    std::deque<Tuple> buffer_;
    std::vector<Tuple> discovered_;
};

/// (min, max) of an attribute over the matches of a query, each found as the
/// first get-next in its direction.
inline std::pair<double, double> discover_extremes(QueryChannel& ch, const SearchQuery& base, const std::string& attribute) {
    GetNext1D up(ch, base, attribute, Direction::ascending, Algorithm1D::rerank);
    auto lo = up.next();
    if (!lo) throw Error(ErrorCode::no_matches, "no tuple matches the query", attribute);
    GetNext1D down(ch, base, attribute, Direction::descending, Algorithm1D::rerank);
    auto hi = down.next();
    if (!hi) throw Error(ErrorCode::no_matches, "no tuple matches the query", attribute);
    std::size_t a = ch.schema().index_of(attribute);
    return {lo->number(a), hi->number(a)};
}

} // namespace rerank
