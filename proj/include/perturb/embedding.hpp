#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perturb/graph.hpp"
#include "perturb/tree.hpp"

namespace perturb {

/// Injective partial map from tree vertices to host vertices.
struct Embedding {
    std::vector<int> map;    // tree id -> host vertex, -1 if unmapped
    std::vector<char> used;  // host vertex occupied

    explicit Embedding(int tree_universe = 0, int host_n = 0)
        : map(tree_universe, -1), used(host_n, 0) {}

    bool place(int tree_v, int host_v) {
        if (map[tree_v] != -1 || used[host_v]) return false;
        map[tree_v] = host_v;
        used[host_v] = 1;
        return true;
    }
    void unplace(int tree_v) {
        if (map[tree_v] == -1) return;
        used[map[tree_v]] = 0;
        map[tree_v] = -1;
    }
    VertexSet used_set() const;
};

struct EmbedResult {
    std::optional<Embedding> embedding;
    int stuck_subtree_size = 0;  // on failure
};

/// BFS-order greedy embedding of a bounded-degree forest into `host`,
/// restricted to `allowed`. Roots go to uniformly random unused allowed
/// vertices; children to random unused allowed neighbours of the parent's
/// image. Dead ends un-place the parent's subtree and re-randomize, spending
/// from retry_budget (counted in vertex placements).
EmbedResult embed_forest_greedy(const Forest& f, const Graph& host, const VertexSet& allowed,
                                std::uint64_t seed, std::int64_t retry_budget);

struct VerifyResult {
    bool ok = true;
    std::string violation;
};

/// Independent validator: injective, total on f, every forest edge lands on a
/// host edge.
VerifyResult verify_embedding(const Forest& f, const Graph& host, const Embedding& e);

}  // namespace perturb
