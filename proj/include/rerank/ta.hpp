#pragma once

// Threshold algorithm over per-attribute sorted access, where every sorted
// access is a 1D get-next on the hidden database and a pulled tuple arrives
// with all of its attributes.

#include "rerank/rerank_1d.hpp"

#include <limits>
#include <set>
#include <unordered_set>

namespace rerank {

/// Instrumentation of one TA cursor: the threshold after every sorted access
/// and the (best score, threshold) pair at every return.
struct TaProbe {
    std::vector<double> thresholds;
    std::vector<std::pair<double, double>> returns;
};

class GetNextTA {
public:
    GetNextTA(QueryChannel& channel, const SearchQuery& base, const RankingSpec& spec)
        : scorer_((spec.validate(channel.schema()), Scorer(channel.schema(), spec))) {
        for (const auto& term : scorer_.terms()) {
            if (term.weight == 0) continue;
            Cursor c;
            c.term = term;
            c.last = term.weight > 0 ? term.domain_min : term.domain_max;
            c.get = std::make_unique<GetNext1D>(channel, base, channel.schema()[term.index].name,
                                                term.weight > 0 ? Direction::ascending : Direction::descending,
                                                Algorithm1D::rerank);
            cursors_.push_back(std::move(c));
        }
    }

    std::optional<ScoredTuple> next() {
        for (;;) {
            double tau = threshold();
            if (!candidates_.empty()) {
                const ScoredTuple& best = *candidates_.begin();
                if (best.score < tau) return pop(tau);
            }
            if (exhausted_) {
                if (candidates_.empty()) return std::nullopt;
                return pop(tau);
            }
            pull();
        }
    }

    const TaProbe& probe() const { return probe_; }
    const std::vector<ScoredTuple>& discovered() const { return discovered_; }

private:
    struct Cursor {
        Scorer::Term term{};
        double last = 0.0;
        std::unique_ptr<GetNext1D> get;
    };

    /// Lower bound on the score of any tuple not yet pulled; +inf once some
    /// cursor has run dry, since every match has then been seen.
    double threshold() const {
        if (exhausted_) return std::numeric_limits<double>::infinity();
        double tau = 0.0;
        for (const auto& c : cursors_) tau += c.term.weight * Scorer::norm(c.term, c.last);
        return tau;
    }

    void pull() {
        Cursor& c = cursors_[turn_];
        turn_ = (turn_ + 1) % cursors_.size();
        std::optional<Tuple> t = c.get->next();
        if (!t) {
            exhausted_ = true;
        } else {
            c.last = t->number(c.term.index);
            if (!returned_.contains(t->id) && pulled_.insert(t->id).second) candidates_.insert({scorer_(*t), *t});
        }
        probe_.thresholds.push_back(threshold());
    }

    ScoredTuple pop(double tau) {
        ScoredTuple out = *candidates_.begin();
        candidates_.erase(candidates_.begin());
        returned_.insert(out.tuple.id);
        probe_.returns.emplace_back(out.score, tau);
        discovered_.push_back(out);
        return out;
    }

    Scorer scorer_;
    std::vector<Cursor> cursors_;
    std::size_t turn_ = 0;
    bool exhausted_ = false;
    std::set<ScoredTuple> candidates_;
    std::unordered_set<std::string> pulled_;
    std::unordered_set<std::string> returned_;
    std::vector<ScoredTuple> discovered_;
    TaProbe probe_;
};

} // namespace rerank
