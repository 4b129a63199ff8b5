#pragma once

// Schema, tuples, predicates, ranking functions and scoring. Everything here
// is an immutable value once constructed.

#include "rerank/error.hpp"
#include "rerank/interval.hpp"

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace rerank {

enum class AttributeKind { numeric_continuous, numeric_discrete, categorical };

inline const char* to_string(AttributeKind kind) {
    switch (kind) {
    case AttributeKind::numeric_continuous: return "numeric-continuous";
    case AttributeKind::numeric_discrete: return "numeric-discrete";
    case AttributeKind::categorical: return "categorical";
    }
    return "?";
}

inline AttributeKind parse_attribute_kind(const std::string& s) {
    if (s == "numeric-continuous" || s == "continuous") return AttributeKind::numeric_continuous;
    if (s == "numeric-discrete" || s == "discrete") return AttributeKind::numeric_discrete;
    if (s == "categorical") return AttributeKind::categorical;
    throw Error(ErrorCode::schema, "unknown attribute kind '" + s + "'", "kind");
}

inline bool valid_identifier(const std::string& name) {
    return !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

struct AttributeSchema {
    std::string name;
    AttributeKind kind = AttributeKind::numeric_continuous;
    double domain_min = 0.0;
    double domain_max = 0.0;
    std::vector<std::string> categories;
    double resolution = 0.0;

    bool numeric() const { return kind != AttributeKind::categorical; }

    Interval domain() const { return Interval::closed(domain_min, domain_max); }

    void validate() const {
        if (!valid_identifier(name)) throw Error(ErrorCode::schema, "invalid attribute name '" + name + "'", "name");
        if (numeric()) {
            if (!(domain_min <= domain_max))
                throw Error(ErrorCode::schema, "domain_min > domain_max for '" + name + "'", name);
            if (kind == AttributeKind::numeric_discrete && !(resolution > 0))
                throw Error(ErrorCode::schema, "discrete attribute '" + name + "' needs resolution > 0", name);
        } else if (categories.empty()) {
            throw Error(ErrorCode::schema, "categorical attribute '" + name + "' has no categories", name);
        }
    }

    bool has_category(const std::string& label) const {
        return std::find(categories.begin(), categories.end(), label) != categories.end();
    }

    friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;
};

/// Attribute list of one source, with name lookup. Attribute order is the
/// order tuple values are stored in.
class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<AttributeSchema> attributes) : attributes_(std::move(attributes)) {
        for (std::size_t i = 0; i < attributes_.size(); ++i) {
            attributes_[i].validate();
            if (!index_.emplace(attributes_[i].name, i).second)
                throw Error(ErrorCode::schema, "duplicate attribute '" + attributes_[i].name + "'",
                            attributes_[i].name);
        }
    }

    std::size_t size() const { return attributes_.size(); }
    bool empty() const { return attributes_.empty(); }
    const std::vector<AttributeSchema>& attributes() const { return attributes_; }
    const AttributeSchema& operator[](std::size_t i) const { return attributes_[i]; }

    std::optional<std::size_t> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t index_of(const std::string& name) const {
        auto i = find(name);
        if (!i) throw Error(ErrorCode::schema, "unknown attribute '" + name + "'", name);
        return *i;
    }

    const AttributeSchema& at(const std::string& name) const { return attributes_[index_of(name)]; }

    friend bool operator==(const Schema& a, const Schema& b) { return a.attributes_ == b.attributes_; }

private:
    std::vector<AttributeSchema> attributes_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// A numeric value or a category label.
using Value = std::variant<double, std::string>;

/// One record. `values` is positional, aligned with the source schema.
struct Tuple {
    std::string id;
    std::vector<Value> values;

    double number(std::size_t i) const { return std::get<double>(values[i]); }
    const std::string& label(std::size_t i) const { return std::get<std::string>(values[i]); }

    friend bool operator==(const Tuple&, const Tuple&) = default;
};

/// Checks the tuple invariants against a schema.
inline void validate_tuple(const Schema& schema, const Tuple& t) {
    if (t.id.empty()) throw Error(ErrorCode::schema, "tuple without id", "id");
    if (t.values.size() != schema.size())
        throw Error(ErrorCode::schema, "tuple '" + t.id + "' has wrong number of values");
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& a = schema[i];
        if (a.numeric()) {
            const double* v = std::get_if<double>(&t.values[i]);
            if (!v) throw Error(ErrorCode::kind, "tuple '" + t.id + "': '" + a.name + "' must be numeric", a.name);
            if (!a.domain().contains(*v))
                throw Error(ErrorCode::domain, "tuple '" + t.id + "': '" + a.name + "' outside domain", a.name);
        } else {
            const std::string* v = std::get_if<std::string>(&t.values[i]);
            if (!v || !a.has_category(*v))
                throw Error(ErrorCode::domain, "tuple '" + t.id + "': bad category for '" + a.name + "'", a.name);
        }
    }
}

// ---------------------------------------------------------------------------
// Predicates and queries

struct Predicate {
    std::string attribute;
    std::variant<Interval, Value> form;

    static Predicate range(std::string attribute, double lo, double hi, bool lo_open = false, bool hi_open = false) {
        return {std::move(attribute), Interval{lo, hi, lo_open, hi_open}};
    }
    static Predicate equals(std::string attribute, Value v) { return {std::move(attribute), std::move(v)}; }

    bool is_range() const { return std::holds_alternative<Interval>(form); }
    const Interval& interval() const { return std::get<Interval>(form); }
    const Value& value() const { return std::get<Value>(form); }

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Conjunction of predicates. `unsatisfiable` marks the canonical form of a
/// contradictory conjunction.
struct SearchQuery {
    std::vector<Predicate> predicates;
    bool unsatisfiable = false;

    friend bool operator==(const SearchQuery&, const SearchQuery&) = default;
};

/// Per-attribute constraint box over a whole schema; the evaluation form of a
/// SearchQuery. Numeric attributes carry an interval, categorical attributes
/// an optional pinned label.
struct Region {
    std::vector<Interval> ranges;
    std::vector<std::optional<std::string>> labels;
    bool unsatisfiable = false;

    static Region full(const Schema& schema) {
        Region r;
        r.ranges.resize(schema.size());
        r.labels.resize(schema.size());
        for (std::size_t i = 0; i < schema.size(); ++i)
            if (schema[i].numeric()) r.ranges[i] = schema[i].domain();
        return r;
    }

    bool empty() const {
        if (unsatisfiable) return true;
        return std::any_of(ranges.begin(), ranges.end(), [](const Interval& iv) { return iv.empty(); });
    }

    bool contains(const Region& other) const {
        if (other.empty()) return true;
        for (std::size_t i = 0; i < ranges.size(); ++i) {
            if (!ranges[i].contains(other.ranges[i])) return false;
            if (labels[i] && labels[i] != other.labels[i]) return false;
        }
        return true;
    }

    Region intersect(const Region& other) const {
        Region r = *this;
        r.unsatisfiable = unsatisfiable || other.unsatisfiable;
        for (std::size_t i = 0; i < ranges.size(); ++i) {
            r.ranges[i] = ranges[i].intersect(other.ranges[i]);
            if (other.labels[i]) {
                if (labels[i] && labels[i] != other.labels[i]) r.unsatisfiable = true;
                r.labels[i] = other.labels[i];
            }
        }
        return r;
    }

    bool matches(const Tuple& t) const {
        if (unsatisfiable) return false;
        for (std::size_t i = 0; i < ranges.size(); ++i) {
            if (labels[i]) {
                if (std::get<std::string>(t.values[i]) != *labels[i]) return false;
            } else if (const double* v = std::get_if<double>(&t.values[i])) {
                if (!ranges[i].contains(*v)) return false;
            }
        }
        return true;
    }

    friend bool operator==(const Region&, const Region&) = default;
};

/// Builds the constraint box of a query. Throws on unknown attributes, kind
/// mismatches, inverted ranges and unknown categories.
inline Region to_region(const Schema& schema, const SearchQuery& q) {
    Region r = Region::full(schema);
    r.unsatisfiable = q.unsatisfiable;
    for (const auto& p : q.predicates) {
        std::size_t i = schema.index_of(p.attribute);
        const auto& a = schema[i];
        if (p.is_range()) {
            const Interval& iv = p.interval();
            if (!a.numeric()) throw Error(ErrorCode::kind, "range predicate on categorical '" + a.name + "'", a.name);
            if (!(iv.lo <= iv.hi)) throw Error(ErrorCode::validation, "range lo > hi on '" + a.name + "'", a.name);
            r.ranges[i] = r.ranges[i].intersect(iv);
        } else if (a.numeric()) {
            const double* v = std::get_if<double>(&p.value());
            if (!v) throw Error(ErrorCode::kind, "label compared with numeric '" + a.name + "'", a.name);
            r.ranges[i] = r.ranges[i].intersect(Interval::point(*v));
        } else {
            const std::string* v = std::get_if<std::string>(&p.value());
            if (!v) throw Error(ErrorCode::kind, "number compared with categorical '" + a.name + "'", a.name);
            if (!a.has_category(*v))
                throw Error(ErrorCode::validation, "'" + *v + "' is not a category of '" + a.name + "'", a.name);
            if (r.labels[i] && *r.labels[i] != *v) r.unsatisfiable = true;
            r.labels[i] = *v;
        }
    }
    return r;
}

/// Canonical query of a box: one predicate per constrained attribute, sorted
/// by name; full closed domains are omitted.
inline SearchQuery to_query(const Schema& schema, const Region& r) {
    SearchQuery q;
    if (r.empty()) {
        q.unsatisfiable = true;
        return q;
    }
    for (std::size_t i = 0; i < schema.size(); ++i) {
        const auto& a = schema[i];
        if (r.labels[i]) {
            q.predicates.push_back(Predicate::equals(a.name, *r.labels[i]));
        } else if (a.numeric() && !(r.ranges[i] == a.domain())) {
            q.predicates.push_back({a.name, r.ranges[i]});
        }
    }
    std::sort(q.predicates.begin(), q.predicates.end(),
              [](const Predicate& x, const Predicate& y) { return x.attribute < y.attribute; });
    return q;
}

inline SearchQuery canonicalize(const Schema& schema, const SearchQuery& q) { return to_query(schema, to_region(schema, q)); }

inline bool matches(const Schema& schema, const SearchQuery& q, const Tuple& t) { return to_region(schema, q).matches(t); }

// ---------------------------------------------------------------------------
// Ranking

/// Min-max normalization onto [0,1]; a degenerate domain maps to 0.
inline double normalize(const AttributeSchema& a, double raw) {
    if (!a.numeric()) throw Error(ErrorCode::kind, "cannot normalize categorical '" + a.name + "'", a.name);
    if (!a.domain().contains(raw)) throw Error(ErrorCode::domain, "value outside domain of '" + a.name + "'", a.name);
    if (a.domain_min == a.domain_max) return 0.0;
    return (raw - a.domain_min) / (a.domain_max - a.domain_min);
}

struct RankingTerm {
    std::string attribute;
    double weight = 0.0;

    friend bool operator==(const RankingTerm&, const RankingTerm&) = default;
};

/// User preference: sum of weight * normalized value, minimized.
struct RankingSpec {
    std::vector<RankingTerm> terms;

    void validate(const Schema& schema) const {
        bool nonzero = false;
        std::set<std::string> names;
        for (const auto& t : terms) {
            auto i = schema.find(t.attribute);
            if (!i) throw Error(ErrorCode::validation, "unknown attribute '" + t.attribute + "'", t.attribute);
            if (!schema[*i].numeric())
                throw Error(ErrorCode::validation, "cannot rank by categorical '" + t.attribute + "'", t.attribute);
            if (!(t.weight >= -1.0 && t.weight <= 1.0))
                throw Error(ErrorCode::validation, "weight of '" + t.attribute + "' outside [-1,1]", t.attribute);
            if (!names.insert(t.attribute).second)
                throw Error(ErrorCode::validation, "duplicate ranking attribute '" + t.attribute + "'", t.attribute);
            nonzero = nonzero || t.weight != 0.0;
        }
        if (!nonzero) throw Error(ErrorCode::validation, "ranking needs at least one non-zero weight", "weights");
    }

    friend bool operator==(const RankingSpec&, const RankingSpec&) = default;
};

/// RankingSpec bound to schema positions. Terms are evaluated in spec order so
/// every caller computes bit-identical scores.
class Scorer {
public:
    struct Term {
        std::size_t index;
        double weight;
        double domain_min;
        double domain_max;
    };

    Scorer() = default;
    Scorer(const Schema& schema, const RankingSpec& spec) {
        for (const auto& t : spec.terms) {
            std::size_t i = schema.index_of(t.attribute);
            const auto& a = schema[i];
            if (!a.numeric()) throw Error(ErrorCode::kind, "cannot rank by categorical '" + a.name + "'", a.name);
            terms_.push_back({i, t.weight, a.domain_min, a.domain_max});
        }
    }

    const std::vector<Term>& terms() const { return terms_; }

    static double norm(const Term& t, double raw) {
        if (t.domain_min == t.domain_max) return 0.0;
        return (raw - t.domain_min) / (t.domain_max - t.domain_min);
    }

    double operator()(const Tuple& t) const {
        double s = 0.0;
        for (const auto& term : terms_) s += term.weight * norm(term, t.number(term.index));
        return s;
    }

    /// Score of a point given per-term raw coordinates (same order as terms()).
    double at(const std::vector<double>& raw) const {
        double s = 0.0;
        for (std::size_t j = 0; j < terms_.size(); ++j) s += terms_[j].weight * norm(terms_[j], raw[j]);
        return s;
    }

private:
    std::vector<Term> terms_;
};

struct Score {
    double value = 0.0;
};

/// Score of one tuple. Throws a schema error when a ranked attribute is
/// missing from the schema or the tuple.
inline Score score(const RankingSpec& spec, const Tuple& t, const Schema& schema) {
    double s = 0.0;
    for (const auto& term : spec.terms) {
        auto i = schema.find(term.attribute);
        if (!i || *i >= t.values.size())
            throw Error(ErrorCode::schema, "missing attribute '" + term.attribute + "'", term.attribute);
        const double* raw = std::get_if<double>(&t.values[*i]);
        if (!raw) throw Error(ErrorCode::kind, "'" + term.attribute + "' is not numeric", term.attribute);
        s += term.weight * normalize(schema[*i], *raw);
    }
    return {s};
}

/// A tuple with its score. Ordered by (score, id); lower ranks first.
struct ScoredTuple {
    double score = 0.0;
    Tuple tuple;

    friend bool operator<(const ScoredTuple& a, const ScoredTuple& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.tuple.id < b.tuple.id;
    }
};

inline bool ranks_before(double score_a, const std::string& id_a, double score_b, const std::string& id_b) {
    if (score_a != score_b) return score_a < score_b;
    return id_a < id_b;
}

} // namespace rerank
