#include "perturb/star_matching.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <deque>
#include <numeric>
#include <stdexcept>

#include "perturb/rng.hpp"

namespace perturb {

int StarDemand::total() const { return std::accumulate(demand.begin(), demand.end(), 0); }

void StarDemand::validate(const BipartiteGraph& g) const {
    if (static_cast<int>(demand.size()) != g.a_size)
        throw std::invalid_argument("StarDemand: size mismatch");
    for (int d : demand)
        if (d < 1) throw std::invalid_argument("StarDemand: demand < 1");
    if (total() != g.b_size) throw std::invalid_argument("StarDemand: sum != |B|");
}

namespace {

// Maximum matching on the graph that has demand[a] copies of each a-vertex.
// Layered BFS + lowest-index-first DFS (Hopcroft-Karp). Returns per-copy and
// per-b matches; copy c belongs to original copy_owner[c].
struct ReplicatedMatching {
    std::vector<int> copy_owner;
    std::vector<int> match_copy;  // copy -> b or -1
    std::vector<int> match_b;     // b -> copy or -1
    int size = 0;
};

ReplicatedMatching max_matching_replicated(const BipartiteGraph& g, const StarDemand& d) {
    ReplicatedMatching rm;
    for (int a = 0; a < g.a_size; ++a)
        for (int c = 0; c < d.demand[a]; ++c) rm.copy_owner.push_back(a);
    const int left = static_cast<int>(rm.copy_owner.size());
    rm.match_copy.assign(left, -1);
    rm.match_b.assign(g.b_size, -1);

    std::vector<int> dist(left);
    const int INF = 1 << 30;

    auto bfs = [&]() -> bool {
        std::deque<int> queue;
        bool found = false;
        for (int c = 0; c < left; ++c) {
            if (rm.match_copy[c] == -1) {
                dist[c] = 0;
                queue.push_back(c);
            } else {
                dist[c] = INF;
            }
        }
        while (!queue.empty()) {
            int c = queue.front();
            queue.pop_front();
            for (int b : g.adj[rm.copy_owner[c]]) {
                int next = rm.match_b[b];
                if (next == -1) {
                    found = true;
                } else if (dist[next] == INF) {
                    dist[next] = dist[c] + 1;
                    queue.push_back(next);
                }
            }
        }
        return found;
    };

    std::function<bool(int)> dfs = [&](int c) -> bool {
        for (int b : g.adj[rm.copy_owner[c]]) {
            int next = rm.match_b[b];
            if (next == -1 || (dist[next] == dist[c] + 1 && dfs(next))) {
                rm.match_copy[c] = b;
                rm.match_b[b] = c;
                return true;
            }
        }
        dist[c] = INF;
        return false;
    };

    while (bfs())
        for (int c = 0; c < left; ++c)
            if (rm.match_copy[c] == -1 && dfs(c)) ++rm.size;
    return rm;
}

// Koenig-style witness: originals with a copy reachable from an unmatched copy
// by alternating paths form a Hall-violating set.
std::vector<int> hall_witness_from(const BipartiteGraph& g, const ReplicatedMatching& rm) {
    const int left = static_cast<int>(rm.copy_owner.size());
    std::vector<char> copy_reached(left, 0);
    std::vector<char> b_reached(g.b_size, 0);
    std::deque<int> queue;
    for (int c = 0; c < left; ++c)
        if (rm.match_copy[c] == -1) {
            copy_reached[c] = 1;
            queue.push_back(c);
        }
    while (!queue.empty()) {
        int c = queue.front();
        queue.pop_front();
        for (int b : g.adj[rm.copy_owner[c]]) {
            if (b_reached[b]) continue;
            b_reached[b] = 1;
            int next = rm.match_b[b];
            if (next != -1 && !copy_reached[next]) {
                copy_reached[next] = 1;
                queue.push_back(next);
            }
        }
    }
    std::vector<char> in_witness(g.a_size, 0);
    for (int c = 0; c < left; ++c)
        if (copy_reached[c]) in_witness[rm.copy_owner[c]] = 1;
    std::vector<int> witness;
    for (int a = 0; a < g.a_size; ++a)
        if (in_witness[a]) witness.push_back(a);
    return witness;
}

}  // namespace

HallResult check_hall_condition(const BipartiteGraph& g, const StarDemand& d, HallMode mode) {
    d.validate(g);
    if (mode == HallMode::exhaustive) {
        if (g.a_size > 20) throw std::invalid_argument("exhaustive Hall check: |A| > 20");
        // neighbourhood masks only work for b_size <= 63; fall back to flags otherwise
        if (g.b_size <= 63) {
            std::vector<std::uint64_t> mask(g.a_size, 0);
            for (int a = 0; a < g.a_size; ++a)
                for (int b : g.adj[a]) mask[a] |= 1ULL << b;
            for (std::uint32_t s = 1; s < (1u << g.a_size); ++s) {
                std::uint64_t nb = 0;
                int need = 0;
                for (int a = 0; a < g.a_size; ++a)
                    if (s & (1u << a)) {
                        nb |= mask[a];
                        need += d.demand[a];
                    }
                if (std::popcount(nb) < need) {
                    std::vector<int> witness;
                    for (int a = 0; a < g.a_size; ++a)
                        if (s & (1u << a)) witness.push_back(a);
                    return {false, witness};
                }
            }
            return {true, {}};
        }
        std::vector<char> nb(g.b_size);
        for (std::uint32_t s = 1; s < (1u << g.a_size); ++s) {
            std::fill(nb.begin(), nb.end(), 0);
            int need = 0;
            for (int a = 0; a < g.a_size; ++a)
                if (s & (1u << a)) {
                    need += d.demand[a];
                    for (int b : g.adj[a]) nb[b] = 1;
                }
            int have = static_cast<int>(std::count(nb.begin(), nb.end(), char(1)));
            if (have < need) {
                std::vector<int> witness;
                for (int a = 0; a < g.a_size; ++a)
                    if (s & (1u << a)) witness.push_back(a);
                return {false, witness};
            }
        }
        return {true, {}};
    }
    auto rm = max_matching_replicated(g, d);
    if (rm.size == d.total()) return {true, {}};
    return {false, hall_witness_from(g, rm)};
}

StarPackingResult find_star_packing(const BipartiteGraph& g, const StarDemand& d) {
    d.validate(g);
    auto rm = max_matching_replicated(g, d);
    if (rm.size != d.total()) return {std::nullopt, hall_witness_from(g, rm)};
    StarPacking packing;
    packing.stars.assign(g.a_size, {});
    for (int c = 0; c < static_cast<int>(rm.copy_owner.size()); ++c)
        packing.stars[rm.copy_owner[c]].push_back(rm.match_copy[c]);
    return {std::move(packing), {}};
}

bool validate_star_packing(const BipartiteGraph& g, const StarDemand& d, const StarPacking& p) {
    if (static_cast<int>(p.stars.size()) != g.a_size) return false;
    std::vector<char> leaf_used(g.b_size, 0);
    for (int a = 0; a < g.a_size; ++a) {
        if (static_cast<int>(p.stars[a].size()) != d.demand[a]) return false;
        for (int b : p.stars[a]) {
            if (b < 0 || b >= g.b_size || leaf_used[b]) return false;
            leaf_used[b] = 1;
            if (!std::binary_search(g.adj[a].begin(), g.adj[a].end(), b)) return false;
        }
    }
    return true;
}

Case1Result complete_case1(const Tree& tree, const Graph& host, const PerturbationPlan& phases,
                           double lambda, std::int64_t retry_budget, std::uint64_t seed) {
    const int n = tree.vertex_count();
    const int to_remove = static_cast<int>(std::ceil(lambda * n));
    LeafRemoval pruned = remove_leaves(tree, to_remove, derive_seed(seed, 1));

    Graph r1 = graph_union(host, phases.sample_phase(0, n));
    auto embed =
        embed_forest_greedy(pruned.pruned, r1, VertexSet::full(n), derive_seed(seed, 2), retry_budget);
    if (!embed.embedding) return {std::nullopt, "almost_spanning", embed.stuck_subtree_size};
    Embedding result = std::move(*embed.embedding);

    // centers owing leaves and the unused host vertices
    std::vector<int> centers;  // tree ids
    for (int v = 0; v < n; ++v)
        if (pruned.removed_at[v] > 0) centers.push_back(v);
    std::vector<int> b_vertices;  // host ids
    for (int h = 0; h < n; ++h)
        if (!result.used[h]) b_vertices.push_back(h);

    Graph r2 = phases.sample_phase(1, n);
    BipartiteGraph bg;
    bg.a_size = static_cast<int>(centers.size());
    bg.b_size = static_cast<int>(b_vertices.size());
    bg.adj.assign(bg.a_size, {});
    StarDemand demand;
    for (int i = 0; i < bg.a_size; ++i) {
        int center_host = result.map[centers[i]];
        for (int j = 0; j < bg.b_size; ++j) {
            int b_host = b_vertices[j];
            if (host.has_edge(center_host, b_host) || r2.has_edge(center_host, b_host))
                bg.adj[i].push_back(j);
        }
        demand.demand.push_back(pruned.removed_at[centers[i]]);
    }

    auto packing = find_star_packing(bg, demand);
    if (!packing.packing) return {std::nullopt, "star_packing", 0};

    // attach the removed leaves: leaves deleted at a center are interchangeable
    std::vector<std::vector<int>> leaves_of(n);
    for (int leaf : pruned.removed) leaves_of[tree.neighbors(leaf)[0]].push_back(leaf);
    for (int i = 0; i < bg.a_size; ++i) {
        const auto& star = packing.packing->stars[i];
        const auto& leaves = leaves_of[centers[i]];
        for (std::size_t j = 0; j < star.size(); ++j) result.place(leaves[j], b_vertices[star[j]]);
    }
    return {std::move(result), "", 0};
}

}  // namespace perturb
