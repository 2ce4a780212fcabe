#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perturb/embedding.hpp"
#include "perturb/graph.hpp"
#include "perturb/tree.hpp"

namespace perturb {

/// Bipartite graph with sides A (centers) and B (leaf candidates),
/// index-based; adj[a] lists b-indices.
struct BipartiteGraph {
    int a_size = 0;
    int b_size = 0;
    std::vector<std::vector<int>> adj;
};

/// Per-center leaf demand; sum(demand) must equal b_size.
struct StarDemand {
    std::vector<int> demand;
    int total() const;
    void validate(const BipartiteGraph& g) const;
};

enum class HallMode { exhaustive, matching };

struct HallResult {
    bool ok = false;
    std::vector<int> witness;  // violating S (a-indices) when !ok
};

/// True iff |N(S)| >= sum_{s in S} demand(s) for all S subseteq A.
/// Exhaustive mode scans all subsets (requires a_size <= 20); matching mode
/// decides via maximum matching in the demand-replicated graph.
HallResult check_hall_condition(const BipartiteGraph& g, const StarDemand& d, HallMode mode);

struct StarPacking {
    std::vector<std::vector<int>> stars;  // a-index -> its leaves (b-indices)
};

struct StarPackingResult {
    std::optional<StarPacking> packing;
    std::vector<int> witness;  // Hall-violating S when infeasible
};

/// Maximum bipartite matching (augmenting paths, lowest-index-first) on the
/// replicated graph, collapsed back to stars. Succeeds exactly when the Hall
/// condition holds.
StarPackingResult find_star_packing(const BipartiteGraph& g, const StarDemand& d);

/// Re-reads the bipartite graph and checks the packing invariants.
bool validate_star_packing(const BipartiteGraph& g, const StarDemand& d, const StarPacking& p);

/// Many-leaves case: embed the leaf-pruned tree into phase-1 random edges,
/// then attach the removed leaves via a star packing in host + phase-2 edges.
struct Case1Result {
    std::optional<Embedding> embedding;
    std::string failed_stage;  // "almost_spanning" or "star_packing" on failure
    int stuck_subtree_size = 0;
};

Case1Result complete_case1(const Tree& tree, const Graph& host, const PerturbationPlan& phases,
                           double lambda, std::int64_t retry_budget, std::uint64_t seed);

}  // namespace perturb
