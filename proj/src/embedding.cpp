#include "perturb/embedding.hpp"

#include <algorithm>

#include "perturb/rng.hpp"

namespace perturb {

VertexSet Embedding::used_set() const {
    std::vector<int> v;
    for (int i = 0; i < static_cast<int>(used.size()); ++i)
        if (used[i]) v.push_back(i);
    return VertexSet(std::move(v));
}

EmbedResult embed_forest_greedy(const Forest& f, const Graph& host, const VertexSet& allowed,
                                std::uint64_t seed, std::int64_t retry_budget) {
    const int host_n = host.vertex_count();
    Rng rng(derive_seed(seed, 0x656d6264 /*"embd"*/));

    std::vector<char> in_allowed(host_n, 0);
    for (int v : allowed) in_allowed[v] = 1;

    // Global BFS order; each vertex's parent is its unique earlier neighbour.
    std::vector<int> order;
    for (const auto& comp : f.components())
        for (int v : comp) order.push_back(v);
    std::vector<int> pos(f.universe, -1);
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = static_cast<int>(i);
    std::vector<int> parent(f.universe, -1);
    for (int v : order)
        for (int u : f.adj[v])
            if (pos[u] < pos[v]) parent[v] = u;

    std::vector<int> allowed_list = allowed.members();
    Embedding emb(f.universe, host_n);
    std::int64_t budget = retry_budget;
    int last_stuck = 1;

    std::vector<int> candidates;
    std::size_t idx = 0;
    while (idx < order.size()) {
        int v = order[idx];
        int p = parent[v];
        candidates.clear();
        if (p == -1) {
            for (int h : allowed_list)
                if (!emb.used[h]) candidates.push_back(h);
        } else {
            for (int h : host.neighbors(emb.map[p]))
                if (in_allowed[h] && !emb.used[h]) candidates.push_back(h);
        }
        if (!candidates.empty()) {
            emb.place(v, candidates[rng.next_below(candidates.size())]);
            --budget;
            ++idx;
            if (budget < 0) return {std::nullopt, last_stuck};
            continue;
        }
        if (p == -1) {
            // a root with no free allowed vertex: the allowed set is exhausted
            return {std::nullopt, static_cast<int>(order.size() - idx)};
        }
        // Dead end: un-place the parent's whole placed subtree and re-randomize
        // its choices from the parent's BFS position.
        int stuck = 1;
        for (std::size_t j = order.size(); j-- > static_cast<std::size_t>(pos[p]);) {
            int u = order[j];
            if (emb.map[u] == -1) continue;
            int a = u;
            while (a != -1 && a != p) a = parent[a];
            if (a == p) {
                emb.unplace(u);
                ++stuck;
            }
        }
        last_stuck = stuck;
        idx = static_cast<std::size_t>(pos[p]);
        if (budget < 0) return {std::nullopt, last_stuck};
    }
    return {std::move(emb), 0};
}

VerifyResult verify_embedding(const Forest& f, const Graph& host, const Embedding& e) {
    std::vector<char> seen(host.vertex_count(), 0);
    for (int v : f.vertices) {
        int h = v < static_cast<int>(e.map.size()) ? e.map[v] : -1;
        if (h == -1) return {false, "vertex " + std::to_string(v) + " unmapped"};
        if (h < 0 || h >= host.vertex_count())
            return {false, "vertex " + std::to_string(v) + " maps out of range"};
        if (seen[h]) return {false, "collision at host vertex " + std::to_string(h)};
        seen[h] = 1;
    }
    for (int v : f.vertices)
        for (int u : f.adj[v]) {
            if (u < v) continue;
            if (!host.has_edge(e.map[v], e.map[u]))
                return {false,
                        "edge (" + std::to_string(v) + "," + std::to_string(u) + ") lands on a non-edge"};
        }
    return {true, ""};
}

}  // namespace perturb
