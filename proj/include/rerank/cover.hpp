#pragma once

// Covering the strictly-better side of a linear rank contour with
// axis-aligned boxes, the only shape a search form can express.

#include "rerank/domain.hpp"

#include <cmath>
#include <vector>

namespace rerank {

/// One interval per ranking term, in Scorer::terms() order.
struct Box {
    std::vector<Interval> axes;

    bool empty() const {
        return std::any_of(axes.begin(), axes.end(), [](const Interval& iv) { return iv.empty(); });
    }
    bool contains(const std::vector<double>& point) const {
        for (std::size_t j = 0; j < axes.size(); ++j)
            if (!axes[j].contains(point[j])) return false;
        return true;
    }
    friend bool operator==(const Box&, const Box&) = default;
};

/// Level set of a ranking function; the region of interest is every point
/// scoring strictly below `bound`.
struct Contour {
    const Scorer* scorer = nullptr;
    double bound = 0.0;
};

/// Lowest score any point of the box can reach (its minimal corner: lo for a
/// positive weight, hi for a negative one). Open ends are treated as closed,
/// which only makes the bound looser.
inline double min_corner_score(const Scorer& s, const std::vector<Interval>& axes) {
    std::vector<double> corner(axes.size());
    for (std::size_t j = 0; j < axes.size(); ++j) corner[j] = s.terms()[j].weight >= 0 ? axes[j].lo : axes[j].hi;
    return s.at(corner);
}

inline double max_corner_score(const Scorer& s, const std::vector<Interval>& axes) {
    std::vector<double> corner(axes.size());
    for (std::size_t j = 0; j < axes.size(); ++j) corner[j] = s.terms()[j].weight >= 0 ? axes[j].hi : axes[j].lo;
    return s.at(corner);
}

/// g equal pieces of an interval that partition it exactly; a point interval
/// (or g = 1) yields itself.
inline std::vector<Interval> segments(const Interval& iv, std::size_t g) {
    if (g <= 1 || iv.is_point()) return {iv};
    std::vector<double> cuts(g + 1);
    for (std::size_t j = 0; j <= g; ++j) cuts[j] = iv.lo + (iv.hi - iv.lo) * static_cast<double>(j) / static_cast<double>(g);
    cuts[0] = iv.lo;
    cuts[g] = iv.hi;
    std::vector<Interval> out;
    for (std::size_t j = 0; j < g; ++j) {
        Interval seg{cuts[j], cuts[j + 1], j == 0 ? iv.lo_open : false, j + 1 == g ? iv.hi_open : true};
        if (!seg.empty()) out.push_back(seg);
    }
    return out;
}

/// Grid cells (g segments per weighted axis) whose minimal corner scores
/// below the bound. Returned in lexicographic cell order, last axis fastest.
inline std::vector<Box> cover_cells(const Contour& contour, const Box& bounding, std::size_t granularity) {
    const Scorer& s = *contour.scorer;
    std::vector<std::vector<Interval>> segs;
    for (std::size_t j = 0; j < bounding.axes.size(); ++j)
        segs.push_back(s.terms()[j].weight != 0 ? segments(bounding.axes[j], granularity)
                                                 : std::vector<Interval>{bounding.axes[j]});
    std::vector<Box> out;
    if (bounding.empty()) return out;
    std::vector<std::size_t> idx(segs.size(), 0);
    for (;;) {
        Box cell;
        for (std::size_t j = 0; j < segs.size(); ++j) cell.axes.push_back(segs[j][idx[j]]);
        if (min_corner_score(s, cell.axes) < contour.bound) out.push_back(std::move(cell));
        std::size_t j = segs.size();
        while (j > 0) {
            --j;
            if (++idx[j] < segs[j].size()) break;
            idx[j] = 0;
            if (j == 0) return out;
        }
        if (segs.empty()) return out;
    }
}

/// cover_cells, with runs of cells adjacent along the last axis merged into
/// single slabs.
inline std::vector<Box> cover_contour(const Contour& contour, const Box& bounding, std::size_t granularity) {
    std::vector<Box> cells = cover_cells(contour, bounding, granularity);
    std::vector<Box> out;
    for (auto& c : cells) {
        if (!out.empty()) {
            Box& prev = out.back();
            std::size_t last = c.axes.size() - 1;
            bool same_prefix = std::equal(prev.axes.begin(), prev.axes.begin() + last, c.axes.begin());
            const Interval& a = prev.axes[last];
            const Interval& b = c.axes[last];
            bool adjacent = a.hi == b.lo && a.hi_open != b.lo_open;
            if (same_prefix && adjacent) {
                prev.axes[last].hi = b.hi;
                prev.axes[last].hi_open = b.hi_open;
                continue;
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace rerank
