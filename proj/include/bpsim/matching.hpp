#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "bpsim/errors.hpp"

namespace bpsim {

struct MatchEdge {
    int left = -1;
    int right = -1;
    double cost = 0.0;
};

/// Maximum-cardinality bipartite matching of minimum total cost among the
/// maximum-cardinality matchings, over an explicit (possibly sparse) edge
/// list. Successive shortest augmenting paths; after k augmentations the
/// matching is cost-minimal among all matchings of size k.
inline std::vector<std::pair<int, int>> min_cost_matching(int n_left, int n_right,
                                                          const std::vector<MatchEdge>& edges) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    for (const auto& e : edges) {
        if (e.left < 0 || e.left >= n_left || e.right < 0 || e.right >= n_right)
            throw Error("min_cost_matching: edge endpoint out of range");
        if (!(e.cost >= 0.0) || !std::isfinite(e.cost))
            throw Error("min_cost_matching: costs must be finite and non-negative");
    }

    // keep the cheapest edge per (left, right) pair
    std::vector<std::vector<std::pair<int, double>>> adj(n_left);
    for (const auto& e : edges) {
        bool merged = false;
        for (auto& [r, c] : adj[e.left])
            if (r == e.right) {
                c = std::min(c, e.cost);
                merged = true;
                break;
            }
        if (!merged) adj[e.left].emplace_back(e.right, e.cost);
    }

    std::vector<int> match_left(n_left, -1), match_right(n_right, -1);

    for (;;) {
        // Bellman-Ford over the residual graph from all free left nodes;
        // sizes here are tiny, so no potentials are needed.
        std::vector<double> dist_l(n_left, kInf), dist_r(n_right, kInf);
        std::vector<int> parent_r(n_right, -1); // left node we reached this right node from
        for (int l = 0; l < n_left; ++l)
            if (match_left[l] < 0) dist_l[l] = 0.0;

        bool changed = true;
        while (changed) {
            changed = false;
            for (int l = 0; l < n_left; ++l) {
                if (dist_l[l] == kInf) continue;
                for (const auto& [r, c] : adj[l]) {
                    if (match_left[l] == r) continue;
                    double nd = dist_l[l] + c;
                    if (nd < dist_r[r] - 1e-15) {
                        dist_r[r] = nd;
                        parent_r[r] = l;
                        changed = true;
                        int l2 = match_right[r];
                        if (l2 >= 0) {
                            // traversing the matched edge backwards refunds its cost
                            double cost_lr = 0.0;
                            for (const auto& [rr, cc] : adj[l2])
                                if (rr == r) {
                                    cost_lr = cc;
                                    break;
                                }
                            double nl = nd - cost_lr;
                            if (nl < dist_l[l2] - 1e-15) dist_l[l2] = nl;
                        }
                    }
                }
            }
        }

        // cheapest free right node reachable
        int best_r = -1;
        double best = kInf;
        for (int r = 0; r < n_right; ++r)
            if (match_right[r] < 0 && dist_r[r] < best) {
                best = dist_r[r];
                best_r = r;
            }
        if (best_r < 0) break;

        // walk the augmenting path back through parent pointers
        int r = best_r;
        while (r >= 0) {
            int l = parent_r[r];
            int prev_r = match_left[l];
            match_left[l] = r;
            match_right[r] = l;
            r = prev_r;
        }
    }

    std::vector<std::pair<int, int>> result;
    for (int l = 0; l < n_left; ++l)
        if (match_left[l] >= 0) result.emplace_back(l, match_left[l]);
    return result;
}

} // namespace bpsim
