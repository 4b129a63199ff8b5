#pragma once

// Get-next under a multi-attribute linear ranking.
//
// The unreturned part of the match set is kept as disjoint subspaces (boxes
// over the ranking attributes) plus a pool of tuples already known in full.
// Each subspace remembers its own best tuple. A get-next returns the global
// minimum; when it came from a subspace, that subspace is split on the pivot
// attribute into a lower box, an upper box and the slice through the returned
// tuple's value. The slice is crawled into the pool and the two boxes are
// searched on the following call. All searches and crawls that are pending at
// the same time advance in lockstep, one batch per round.

#include "rerank/cover.hpp"
#include "rerank/crawl.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <set>

namespace rerank {

enum class AlgorithmMD { baseline, binary, rerank, ta };

inline const char* to_string(AlgorithmMD a) {
    switch (a) {
    case AlgorithmMD::baseline: return "baseline";
    case AlgorithmMD::binary: return "binary";
    case AlgorithmMD::rerank: return "rerank";
    case AlgorithmMD::ta: return "ta";
    }
    return "?";
}

/// A unit of work that needs backend queries, advanced one round at a time.
class RoundTask {
public:
    virtual ~RoundTask() = default;
    /// Queries this task needs answered now. May resolve work locally (cache,
    /// pruning) and return nothing.
    virtual std::vector<Region> plan() = 0;
    /// Responses to the last plan(), positionally aligned.
    virtual void absorb(const std::vector<TopKResponse>& responses) = 0;
    virtual bool done() const = 0;
};

/// Drives tasks until all are done. Each round's queries go out together:
/// as one parallel batch, or as a single sequential query when the round has
/// only one.
inline void run_lockstep(QueryChannel& ch, const std::vector<RoundTask*>& tasks) {
    for (;;) {
        std::vector<Region> all;
        std::vector<std::size_t> counts;
        bool any_open = false;
        for (RoundTask* t : tasks) {
            std::vector<Region> p = t->done() ? std::vector<Region>{} : t->plan();
            counts.push_back(p.size());
            for (auto& r : p) all.push_back(std::move(r));
            any_open = any_open || !t->done() || !p.empty();
        }
        if (!any_open) return;
        if (all.empty()) continue;
        std::vector<TopKResponse> responses;
        if (all.size() == 1)
            responses.push_back(ch.search(all.front()));
        else
            responses = ch.search_batch(all);
        std::size_t at = 0;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (counts[i] == 0) continue;
            std::vector<TopKResponse> mine(responses.begin() + static_cast<std::ptrdiff_t>(at),
                                           responses.begin() + static_cast<std::ptrdiff_t>(at + counts[i]));
            at += counts[i];
            tasks[i]->absorb(mine);
        }
    }
}

/// Shared view of the ranking for the MD machinery: scorer, axis positions
/// and the dense-store signature of the base filter.
struct RankingContext {
    const Schema* schema = nullptr;
    Scorer scorer;
    std::vector<std::size_t> attrs;    // schema index per term
    std::vector<std::size_t> weighted; // term positions with non-zero weight
    std::string signature;
    bool use_cache = false;
    double dense_volume = 1e-4;

    RankingContext(const Schema& s, const RankingSpec& spec, const Region& base, bool cache, double threshold)
        : schema(&s), scorer(s, spec), use_cache(cache), dense_volume(threshold) {
        for (std::size_t j = 0; j < scorer.terms().size(); ++j) {
            attrs.push_back(scorer.terms()[j].index);
            if (scorer.terms()[j].weight != 0) weighted.push_back(j);
        }
        signature = filter_signature(s, base, attrs);
    }

    std::vector<Interval> axes(const Region& r) const {
        std::vector<Interval> out;
        for (std::size_t i : attrs) out.push_back(r.ranges[i]);
        return out;
    }

    double min_score(const Region& r) const { return min_corner_score(scorer, axes(r)); }

    RegionBounds bounds(const Region& r) const {
        RegionBounds b;
        for (std::size_t i : attrs) b.emplace_back((*schema)[i].name, r.ranges[i]);
        return normalized_bounds(std::move(b));
    }

    double normalized(std::size_t term, const Interval& iv) const {
        const auto& t = scorer.terms()[term];
        double span = t.domain_max - t.domain_min;
        return span > 0 ? iv.width() / span : 0.0;
    }

    bool dense(const Region& r) const {
        double volume = 1.0;
        bool all_pinned = true;
        for (std::size_t j : weighted) {
            const Interval& iv = r.ranges[attrs[j]];
            volume *= normalized(j, iv);
            all_pinned = all_pinned && detail::pinned((*schema)[attrs[j]], iv);
        }
        return all_pinned || volume < dense_volume;
    }

    ScoredTuple scored(const Tuple& t) const { return {scorer(t), t}; }
};

/// Crawl of one region, optionally answered from (and recorded into) the
/// dense store.
class CachedCrawl final : public RoundTask {
public:
    CachedCrawl(QueryChannel& ch, const RankingContext& ctx, Region region, std::vector<Tuple> known = {},
                bool overflowed = false)
        : ch_(ch), ctx_(ctx), region_(std::move(region)), task_(make_task(ch, region_, known, overflowed)) {
        task_.add_known(known);
        if (ctx_.use_cache) {
            if (auto e = ch_.slab(ctx_.signature, ctx_.bounds(region_))) {
                for (auto& t : e->tuples)
                    if (region_.matches(t)) result_.push_back(std::move(t));
                resolved_ = true;
            }
        }
    }

    std::vector<Region> plan() override {
        if (resolved_) return {};
        if (task_.done()) {
            finish();
            return {};
        }
        return task_.pending();
    }

    void absorb(const std::vector<TopKResponse>& responses) override {
        task_.absorb(responses);
        if (task_.done()) finish();
    }

    bool done() const override { return resolved_; }

    /// Every tuple in the region (sorted by id when crawled).
    std::vector<Tuple>& result() { return result_; }

private:
    static CrawlTask make_task(QueryChannel& ch, const Region& r, const std::vector<Tuple>& page, bool overflowed) {
        if (overflowed) return CrawlTask::from_overflow(ch.schema(), r, page);
        return CrawlTask(ch.schema(), r);
    }

    void finish() {
        bool overflowed = task_.root_overflowed();
        result_ = task_.take_result();
        resolved_ = true;
        if (ctx_.use_cache && overflowed) ch_.store_slab(ctx_.signature, ctx_.bounds(region_), result_);
    }

    QueryChannel& ch_;
    const RankingContext& ctx_;
    Region region_;
    CrawlTask task_;
    std::vector<Tuple> result_;
    bool resolved_ = false;
};

/// Finds the best (score, id) tuple in one subspace.
class SubspaceSearch final : public RoundTask {
public:
    SubspaceSearch(QueryChannel& ch, const RankingContext& ctx, Region space, AlgorithmMD algorithm)
        : ch_(ch), ctx_(ctx), space_(std::move(space)), algorithm_(algorithm) {
        if (!space_.empty()) frontier_.push_back(space_);
    }

    std::vector<Region> plan() override {
        // Resolve what is known without queries: finished crawls, pruned
        // boxes, cached slabs.
        for (auto it = crawls_.begin(); it != crawls_.end();) {
            if ((*it)->done()) {
                for (const auto& t : (*it)->result()) offer(t);
                it = crawls_.erase(it);
            } else {
                ++it;
            }
        }
        std::vector<Region> kept;
        for (auto& box : frontier_) {
            if (pruned(box)) continue;
            if (ctx_.use_cache && box_from_slab(box)) continue;
            kept.push_back(std::move(box));
        }
        frontier_ = std::move(kept);
        asked_ = frontier_;
        std::vector<Region> out = frontier_;
        crawl_counts_.clear();
        for (auto& c : crawls_) {
            auto p = c->plan();
            crawl_counts_.push_back(p.size());
            for (auto& r : p) out.push_back(std::move(r));
        }
        if (out.empty() && crawls_.empty()) finished_ = true;
        return out;
    }

    void absorb(const std::vector<TopKResponse>& responses) override {
        std::size_t at = 0;
        bool improved = false;
        std::vector<Region> overflowing;
        std::vector<std::vector<Tuple>> pages;
        for (const auto& box : asked_) {
            const auto& r = responses[at++];
            for (const auto& t : r.tuples) improved = offer(t) || improved;
            if (r.overflow()) {
                overflowing.push_back(box);
                pages.push_back(r.tuples);
            }
        }
        for (std::size_t i = 0; i < crawls_.size(); ++i) {
            std::size_t n = crawl_counts_[i];
            if (n == 0) continue;
            std::vector<TopKResponse> mine(responses.begin() + static_cast<std::ptrdiff_t>(at),
                                           responses.begin() + static_cast<std::ptrdiff_t>(at + n));
            at += n;
            crawls_[i]->absorb(mine);
            for (const auto& r : mine)
                for (const auto& t : r.tuples) improved = offer(t) || improved;
        }
        asked_.clear();
        frontier_.clear();
        bool open = std::any_of(overflowing.begin(), overflowing.end(), [&](const Region& r) { return !ctx_.dense(r); });
        if (algorithm_ == AlgorithmMD::baseline && improved && best_ && open) {
            // Re-cover the strictly-better side (ties included) of the new
            // candidate's contour.
            Box bounding{ctx_.axes(space_)};
            Contour c{&ctx_.scorer, std::nextafter(best_->score, std::numeric_limits<double>::infinity())};
            for (const auto& cell : cover_contour(c, bounding, ch_.options().cover_granularity)) {
                Region r = space_;
                for (std::size_t j = 0; j < ctx_.attrs.size(); ++j) r.ranges[ctx_.attrs[j]] = cell.axes[j];
                if (!r.empty()) frontier_.push_back(std::move(r));
            }
            for (std::size_t i = 0; i < overflowing.size(); ++i)
                if (ctx_.dense(overflowing[i]) && !pruned(overflowing[i])) start_dense(overflowing[i], pages[i]);
            return;
        }
        for (std::size_t i = 0; i < overflowing.size(); ++i) {
            if (pruned(overflowing[i])) continue;
            if (ctx_.dense(overflowing[i])) {
                start_dense(overflowing[i], pages[i]);
                continue;
            }
            for (auto& half : split(overflowing[i])) frontier_.push_back(std::move(half));
        }
    }

    bool done() const override { return finished_; }

    const std::optional<ScoredTuple>& best() const { return best_; }

private:
    bool offer(const Tuple& t) {
        if (!space_.matches(t)) return false;
        ScoredTuple s = ctx_.scored(t);
        if (!best_ || s < *best_) {
            best_ = std::move(s);
            return true;
        }
        return false;
    }

    bool pruned(const Region& box) const { return best_ && ctx_.min_score(box) > best_->score; }

    bool box_from_slab(const Region& box) {
        auto e = ch_.slab(ctx_.signature, ctx_.bounds(box));
        if (!e) return false;
        for (const auto& t : e->tuples)
            if (box.matches(t)) offer(t);
        return true;
    }

    void start_dense(const Region& box, const std::vector<Tuple>& page) {
        // In the baseline the new cover may already hold an overlapping
        // cell; drop cells inside the crawled box so nothing is asked twice.
        std::erase_if(frontier_, [&](const Region& r) { return box.contains(r); });
        auto c = std::make_unique<CachedCrawl>(ch_, ctx_, box, page, true);
        if (c->done()) {
            for (const auto& t : c->result()) offer(t);
            return;
        }
        crawls_.push_back(std::move(c));
    }

    /// Halves the longest normalized weighted edge; ties go round-robin.
    std::vector<Region> split(const Region& box) {
        const auto& w = ctx_.weighted;
        std::optional<std::size_t> pick;
        double longest = -1;
        for (std::size_t s = 0; s < w.size(); ++s) {
            std::size_t j = w[(s + turn_) % w.size()];
            const Interval& iv = box.ranges[ctx_.attrs[j]];
            if (detail::pinned((*ctx_.schema)[ctx_.attrs[j]], iv)) continue;
            double len = ctx_.normalized(j, iv);
            if (len > longest) {
                longest = len;
                pick = j;
            }
        }
        turn_ = (turn_ + 1) % std::max<std::size_t>(w.size(), 1);
        std::size_t a = ctx_.attrs[*pick];
        auto halves = box.ranges[a].halve();
        Region lo = box, hi = box;
        lo.ranges[a] = halves->first;
        hi.ranges[a] = halves->second;
        return {lo, hi};
    }

    QueryChannel& ch_;
    const RankingContext& ctx_;
    Region space_;
    AlgorithmMD algorithm_;
    std::vector<Region> frontier_;
    std::vector<Region> asked_;
    std::vector<std::unique_ptr<CachedCrawl>> crawls_;
    std::vector<std::size_t> crawl_counts_;
    std::optional<ScoredTuple> best_;
    std::size_t turn_ = 0;
    bool finished_ = false;
};

/// The three parts of a subspace around a returned tuple's pivot value:
/// strictly below, strictly above, and the equal slice. Empty parts are
/// returned as empty regions.
struct SubspacePartition {
    Region lower;
    Region upper;
    Region slice;
};

inline SubspacePartition partition_subspaces(const Region& space, const Tuple& found, std::size_t pivot) {
    double v = found.number(pivot);
    const Interval& iv = space.ranges[pivot];
    SubspacePartition p{space, space, space};
    p.lower.ranges[pivot] = iv.intersect(Interval{iv.lo, v, iv.lo_open, true});
    p.upper.ranges[pivot] = iv.intersect(Interval{v, iv.hi, true, iv.hi_open});
    p.slice.ranges[pivot] = iv.intersect(Interval::point(v));
    return p;
}

/// Ranking attribute with the largest |weight| (first on ties).
inline std::size_t pivot_attribute(const Scorer& scorer) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < scorer.terms().size(); ++j)
        if (std::abs(scorer.terms()[j].weight) > std::abs(scorer.terms()[best].weight)) best = j;
    return scorer.terms()[best].index;
}

class GetNextMD {
public:
    GetNextMD(QueryChannel& channel, const SearchQuery& base, const RankingSpec& spec, AlgorithmMD algorithm)
        : ch_(channel), algorithm_(algorithm) {
        if (algorithm == AlgorithmMD::ta) throw Error(ErrorCode::config, "use GetNextTA for the threshold algorithm");
        spec.validate(ch_.schema());
        Region root = to_region(ch_.schema(), base);
        ctx_ = std::make_unique<RankingContext>(ch_.schema(), spec, root,
                                                algorithm == AlgorithmMD::rerank && ch_.dense() != nullptr,
                                                ch_.options().dense_threshold_md);
        pivot_ = pivot_attribute(ctx_->scorer);
        if (!root.empty()) add_space(std::move(root));
    }

    std::optional<ScoredTuple> next() {
        settle();
        std::size_t from = spaces_.size();
        const ScoredTuple* best = pool_.empty() ? nullptr : &*pool_.begin();
        for (std::size_t i = 0; i < spaces_.size(); ++i) {
            const auto& b = spaces_[i]->best();
            if (b && (!best || *b < *best)) {
                best = &*b;
                from = i;
            }
        }
        if (!best) return std::nullopt;
        ScoredTuple out = *best;
        if (from == spaces_.size()) {
            pool_.erase(pool_.begin());
        } else {
            SubspacePartition p = partition_subspaces(region_of(from), out.tuple, pivot_);
            regions_.erase(regions_.begin() + static_cast<std::ptrdiff_t>(from));
            spaces_.erase(spaces_.begin() + static_cast<std::ptrdiff_t>(from));
            for (Region* r : {&p.lower, &p.upper})
                if (!r->empty()) add_space(std::move(*r));
            slices_.push_back({std::make_unique<CachedCrawl>(ch_, *ctx_, p.slice), out.tuple.id});
        }
        discovered_.push_back(out);
        return out;
    }

    const std::vector<ScoredTuple>& discovered() const { return discovered_; }

private:
    struct Slice {
        std::unique_ptr<CachedCrawl> crawl;
        std::string returned_id;
    };

    const Region& region_of(std::size_t i) const { return regions_[i]; }

    void add_space(Region r) {
        regions_.push_back(r);
        pending_.push_back(spaces_.size());
        spaces_.push_back(std::make_unique<SubspaceSearch>(ch_, *ctx_, std::move(r), algorithm_));
    }

    void settle() {
        std::vector<RoundTask*> tasks;
        for (std::size_t i : pending_) tasks.push_back(spaces_[i].get());
        for (auto& s : slices_) tasks.push_back(s.crawl.get());
        run_lockstep(ch_, tasks);
        for (auto& s : slices_)
            for (auto& t : s.crawl->result())
                if (t.id != s.returned_id) pool_.insert(ctx_->scored(t));
        slices_.clear();
        pending_.clear();
    }

    QueryChannel& ch_;
    AlgorithmMD algorithm_;
    std::unique_ptr<RankingContext> ctx_;
    std::size_t pivot_ = 0;
    std::vector<std::unique_ptr<SubspaceSearch>> spaces_;
    std::vector<Region> regions_;
    std::vector<std::size_t> pending_;
    std::vector<Slice> slices_;
    std::set<ScoredTuple> pool_;
    std::vector<ScoredTuple> discovered_;
};

} // namespace rerank
