#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace hfnt {

// Per-tree fitness in minimization orientation: approximation error, tree
// size, and negated diversity index.
struct ObjectiveTriple {
    double error = 0.0;
    double size = 0.0;
    double neg_diversity = 0.0;

    double operator[](std::size_t i) const {
        return i == 0 ? error : i == 1 ? size : neg_diversity;
    }

    static constexpr std::size_t count = 3;

    bool operator==(const ObjectiveTriple&) const = default;
};

// a dominates b: no worse in every objective, strictly better in at least one.
inline bool dominates(const ObjectiveTriple& a, const ObjectiveTriple& b) {
    bool strict = false;
    for (std::size_t i = 0; i < ObjectiveTriple::count; ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strict = true;
    }
    return strict;
}

// Fast nondominated sort (Deb et al.): fronts of member indices, front 0
// holding the undominated set.
inline std::vector<std::vector<std::size_t>>
nondominated_sort(std::span<const ObjectiveTriple> members) {
    const std::size_t n = members.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> dom_count(n, 0);

    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            if (dominates(members[p], members[q])) {
                dominated[p].push_back(q);
                ++dom_count[q];
            } else if (dominates(members[q], members[p])) {
                dominated[q].push_back(p);
                ++dom_count[p];
            }
        }
    }

    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> current;
    for (std::size_t p = 0; p < n; ++p)
        if (dom_count[p] == 0) current.push_back(p);

    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<std::size_t> next;
        for (std::size_t p : current)
            for (std::size_t q : dominated[p])
                if (--dom_count[q] == 0) next.push_back(q);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

// NSGA-II crowding distance within one front. Boundary members of each
// objective get +infinity; interior members accumulate normalized neighbor
// gaps; a zero-range objective contributes nothing.
inline std::vector<double> crowding_distance(std::span<const ObjectiveTriple> front) {
    const std::size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n == 0) return dist;
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), inf);
        return dist;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t m = 0; m < ObjectiveTriple::count; ++m) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return front[a][m] < front[b][m]; });
        dist[order.front()] = inf;
        dist[order.back()] = inf;
        const double range = front[order.back()][m] - front[order.front()][m];
        if (range <= 0.0) continue;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (dist[order[i]] == inf) continue;
            dist[order[i]] += (front[order[i + 1]][m] - front[order[i - 1]][m]) / range;
        }
    }
    return dist;
}

} // namespace hfnt
