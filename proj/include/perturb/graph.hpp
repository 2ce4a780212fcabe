#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace perturb {

/// Sorted set of vertices from [0, n). Immutable value type with the usual
/// set algebra; the pipeline mostly passes these into the certifiers.
class VertexSet {
public:
    VertexSet() = default;
    explicit VertexSet(std::vector<int> members);  // sorts and dedups

    static VertexSet full(int n);

    bool contains(int v) const;
    int size() const { return static_cast<int>(members_.size()); }
    bool empty() const { return members_.empty(); }
    const std::vector<int>& members() const { return members_; }

    auto begin() const { return members_.begin(); }
    auto end() const { return members_.end(); }

    static VertexSet set_union(const VertexSet& a, const VertexSet& b);
    static VertexSet set_difference(const VertexSet& a, const VertexSet& b);
    static VertexSet set_intersection(const VertexSet& a, const VertexSet& b);
    static bool disjoint(const VertexSet& a, const VertexSet& b);

    bool operator==(const VertexSet& other) const { return members_ == other.members_; }

private:
    std::vector<int> members_;
};

/// Undirected simple graph on vertices 0..n-1. Immutable after construction;
/// adjacency is kept both as sorted neighbour lists (for scans) and a hashed
/// pair set (for O(1) membership), since the pipeline alternates between the
/// two access patterns.
class Graph {
public:
    Graph() = default;
    static Graph from_edges(int n, const std::vector<std::pair<int, int>>& edges);

    int vertex_count() const { return n_; }
    std::size_t edge_count() const { return m_; }

    bool has_edge(int u, int v) const {
        if (u == v) return false;
        return edge_set_.count(edge_key(u, v)) > 0;
    }

    const std::vector<int>& neighbors(int v) const { return adj_[v]; }
    int degree(int v) const { return static_cast<int>(adj_[v].size()); }

    /// All edges as (u,v) with u < v, lexicographically sorted.
    std::vector<std::pair<int, int>> edges() const;

private:
    static std::uint64_t edge_key(int u, int v) {
        if (u > v) std::swap(u, v);
        return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
    }

    int n_ = 0;
    std::size_t m_ = 0;
    std::vector<std::vector<int>> adj_;
    std::unordered_set<std::uint64_t> edge_set_;
};

/// G(n,p): every pair included independently with probability p.
/// Deterministic for a fixed seed. Throws std::invalid_argument on bad p or n.
Graph generate_gnp(int n, double p, std::uint64_t seed);

/// Complete bipartite graph with sides [0,a) and [a,a+b).
Graph complete_bipartite(int a, int b);

Graph graph_union(const Graph& g, const Graph& h);

int min_degree(const Graph& g);

/// Edges between disjoint nonempty x and y, divided by |x||y|.
double density(const Graph& g, const VertexSet& x, const VertexSet& y);

/// Number of edges between disjoint x and y.
std::size_t count_cross_edges(const Graph& g, const VertexSet& x, const VertexSet& y);

// Edge-list text format: first line "n m", then m lines "u v" with u < v.
void write_edge_list(std::ostream& out, const Graph& g);
Graph read_edge_list(std::istream& in);
Graph load_graph_file(const std::string& path);

/// The random perturbation, split into independent phases R_1..R_4 with
/// per-phase edge probabilities c_i/n. Each phase is sampled from a seed
/// derived from (seed, phase), so plans replay exactly.
struct PerturbationPlan {
    std::array<double, 4> phase_probabilities{};  // each in [0,1]
    std::uint64_t seed = 0;

    static PerturbationPlan from_c(double c_total, const std::array<double, 4>& split, int n,
                                   std::uint64_t seed);

    Graph sample_phase(int phase, int n) const;
    Graph union_of_phases(int n) const;
};

}  // namespace perturb
