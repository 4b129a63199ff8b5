#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

namespace rerank {

/// A slice of one numeric attribute's domain, with independently open or
/// closed endpoints.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_open = false;
    bool hi_open = false;

    static Interval closed(double lo, double hi) { return {lo, hi, false, false}; }
    static Interval point(double v) { return {v, v, false, false}; }

    bool empty() const {
        if (lo > hi) return true;
        if (lo == hi) return lo_open || hi_open;
        if (lo_open && hi_open && std::nextafter(lo, hi) == hi) return true;
        return false;
    }

    /// True when at most one representable value lies inside.
    bool is_point() const {
        if (empty()) return true;
        if (lo == hi) return true;
        if (std::nextafter(lo, hi) != hi) return false;
        return lo_open || hi_open;
    }

    double width() const { return hi > lo ? hi - lo : 0.0; }

    bool contains(double x) const {
        if (lo_open ? !(x > lo) : !(x >= lo)) return false;
        if (hi_open ? !(x < hi) : !(x <= hi)) return false;
        return true;
    }

    /// Superset test; empty intervals are contained in everything.
    bool contains(const Interval& other) const {
        if (other.empty()) return true;
        if (empty()) return false;
        bool lo_ok = lo < other.lo || (lo == other.lo && (!lo_open || other.lo_open));
        bool hi_ok = hi > other.hi || (hi == other.hi && (!hi_open || other.hi_open));
        return lo_ok && hi_ok;
    }

    Interval intersect(const Interval& other) const {
        Interval r;
        if (lo > other.lo) {
            r.lo = lo;
            r.lo_open = lo_open;
        } else if (other.lo > lo) {
            r.lo = other.lo;
            r.lo_open = other.lo_open;
        } else {
            r.lo = lo;
            r.lo_open = lo_open || other.lo_open;
        }
        if (hi < other.hi) {
            r.hi = hi;
            r.hi_open = hi_open;
        } else if (other.hi < hi) {
            r.hi = other.hi;
            r.hi_open = other.hi_open;
        } else {
            r.hi = hi;
            r.hi_open = hi_open || other.hi_open;
        }
        return r;
    }

    /// The same set seen through x -> -x. Used to run descending searches
    /// with ascending interval arithmetic.
    Interval mirrored() const { return {-hi, -lo, hi_open, lo_open}; }

    /// Splits into [lo, mid) and [mid, hi] (endpoint flags preserved on the
    /// outer ends). Returns nullopt when the interval cannot be split.
    std::optional<std::pair<Interval, Interval>> halve() const {
        if (is_point()) return std::nullopt;
        double mid = std::midpoint(lo, hi);
        if (lo < mid && mid < hi) {
            return std::pair{Interval{lo, mid, lo_open, true}, Interval{mid, hi, false, hi_open}};
        }
        // lo and hi are adjacent doubles and both endpoints are closed.
        return std::pair{Interval::point(lo), Interval{lo, hi, true, hi_open}};
    }

    /// Partition around a value v inside the interval: below, at, above.
    /// Empty parts are dropped.
    std::vector<Interval> split_around(double v) const {
        std::vector<Interval> parts;
        for (Interval p : {Interval{lo, v, lo_open, true}, Interval::point(v), Interval{v, hi, true, hi_open}}) {
            p = p.intersect(*this);
            if (!p.empty()) parts.push_back(p);
        }
        return parts;
    }

    friend bool operator==(const Interval&, const Interval&) = default;
};

} // namespace rerank
