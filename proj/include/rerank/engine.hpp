#pragma once

#include "rerank/rerank_md.hpp"
#include "rerank/ta.hpp"

#include <memory>
#include <variant>

namespace rerank {

struct Ranking1D {
    std::string attribute;
    Direction direction = Direction::ascending;
    Algorithm1D algorithm = Algorithm1D::rerank;
};

struct RankingMD {
    RankingSpec spec;
    AlgorithmMD algorithm = AlgorithmMD::rerank;
};

using RankingRequest = std::variant<Ranking1D, RankingMD>;

/// Uniform get-next over every engine. Scores of 1D cursors are the oriented
/// normalized value (negated when descending).
class RankedCursor {
public:
    virtual ~RankedCursor() = default;
    virtual std::optional<ScoredTuple> next() = 0;
};

namespace detail {

class Cursor1D final : public RankedCursor {
public:
    Cursor1D(QueryChannel& ch, const SearchQuery& base, const Ranking1D& r)
        : get_(ch, base, r.attribute, r.direction, r.algorithm), attr_(ch.schema()[get_.attribute_index()]) {}
    std::optional<ScoredTuple> next() override {
        auto t = get_.next();
        if (!t) return std::nullopt;
        double v = normalize(attr_, t->number(get_.attribute_index()));
        return ScoredTuple{get_.direction() == Direction::ascending ? v : -v, std::move(*t)};
    }

private:
    GetNext1D get_;
    AttributeSchema attr_;
};

class CursorMD final : public RankedCursor {
public:
    CursorMD(QueryChannel& ch, const SearchQuery& base, const RankingMD& r) : get_(ch, base, r.spec, r.algorithm) {}
    std::optional<ScoredTuple> next() override { return get_.next(); }

private:
    GetNextMD get_;
};

class CursorTA final : public RankedCursor {
public:
    CursorTA(QueryChannel& ch, const SearchQuery& base, const RankingMD& r) : get_(ch, base, r.spec) {}
    std::optional<ScoredTuple> next() override { return get_.next(); }

private:
    GetNextTA get_;
};

} // namespace detail

inline std::unique_ptr<RankedCursor> make_cursor(QueryChannel& ch, const SearchQuery& base, const RankingRequest& r) {
    if (const auto* one = std::get_if<Ranking1D>(&r)) return std::make_unique<detail::Cursor1D>(ch, base, *one);
    const auto& md = std::get<RankingMD>(r);
    if (md.algorithm == AlgorithmMD::ta) return std::make_unique<detail::CursorTA>(ch, base, md);
    return std::make_unique<detail::CursorMD>(ch, base, md);
}

inline Algorithm1D parse_algorithm_1d(const std::string& s) {
    if (s == "baseline") return Algorithm1D::baseline;
    if (s == "binary") return Algorithm1D::binary;
    if (s == "rerank") return Algorithm1D::rerank;
    throw Error(ErrorCode::validation, "unknown 1d algorithm '" + s + "'", "algorithm");
}

inline AlgorithmMD parse_algorithm_md(const std::string& s) {
    if (s == "baseline") return AlgorithmMD::baseline;
    if (s == "binary") return AlgorithmMD::binary;
    if (s == "rerank") return AlgorithmMD::rerank;
    if (s == "ta") return AlgorithmMD::ta;
    throw Error(ErrorCode::validation, "unknown md algorithm '" + s + "'", "algorithm");
}

/// Brute-force reference order: every match sorted by (score, id), or by
/// (oriented value, id) for a 1D ranking.
inline std::vector<ScoredTuple> oracle_order(const Schema& schema, const std::vector<Tuple>& dataset,
                                             const SearchQuery& base, const RankingRequest& r) {
    Region region = to_region(schema, base);
    std::vector<ScoredTuple> out;
    if (const auto* one = std::get_if<Ranking1D>(&r)) {
        std::size_t a = schema.index_of(one->attribute);
        bool asc = one->direction == Direction::ascending;
        for (const auto& t : dataset)
            if (region.matches(t)) {
                double v = normalize(schema[a], t.number(a));
                out.push_back({asc ? v : -v, t});
            }
        std::sort(out.begin(), out.end(), [&](const ScoredTuple& x, const ScoredTuple& y) {
            double vx = x.tuple.number(a), vy = y.tuple.number(a);
            if (vx != vy) return asc ? vx < vy : vx > vy;
            return x.tuple.id < y.tuple.id;
        });
        return out;
    }
    const auto& md = std::get<RankingMD>(r);
    for (const auto& t : dataset)
        if (region.matches(t)) out.push_back({score(md.spec, t, schema).value, t});
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace rerank
