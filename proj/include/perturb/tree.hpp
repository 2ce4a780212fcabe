#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "perturb/graph.hpp"

namespace perturb {

/// Rooted labeled tree on vertices 0..n-1, stored as a parent array with
/// parent[root] == -1. Degrees are in the unrooted sense.
class Tree {
public:
    explicit Tree(std::vector<int> parent);  // validates connectivity and acyclicity

    int vertex_count() const { return n_; }
    int parent(int v) const { return parent_[v]; }
    int root() const { return root_; }
    int degree(int v) const { return static_cast<int>(adj_[v].size()); }
    int max_degree() const;
    const std::vector<int>& neighbors(int v) const { return adj_[v]; }

    /// Edges as (parent, child) pairs, one per non-root vertex.
    std::vector<std::pair<int, int>> edges() const;

private:
    int n_ = 0;
    int root_ = -1;
    std::vector<int> parent_;
    std::vector<std::vector<int>> adj_;
};

/// A forest over vertex ids [0, universe); only `vertices` are active.
/// Used for subtrees of a Tree (leaf-pruned trees, bare-path complements)
/// so that vertex labels survive the surgery.
struct Forest {
    int universe = 0;
    std::vector<int> vertices;             // sorted active ids
    std::vector<std::vector<int>> adj;     // indexed by id, empty for inactive
    std::size_t edge_count = 0;

    static Forest from_tree(const Tree& t);
    bool active(int v) const;
    int max_degree() const;
    /// Connected components, each listed in BFS order from its lowest vertex.
    std::vector<std::vector<int>> components() const;
};

enum class TreeShape { uniform_attachment, path, caterpillar, broom, subdivided };

TreeShape tree_shape_from_string(const std::string& s);
std::string to_string(TreeShape shape);

/// Bounded-degree test-instance generator. `path` is the n-path; `caterpillar`
/// is a spine with pendant leaves attached at interior spine vertices (the
/// many-leaves regime); `broom` is a path with a brush of delta_max-1 leaves at
/// one end; `subdivided` is a small uniform-attachment skeleton with every edge
/// subdivided into a long segment (the few-leaves regime).
Tree generate_bounded_tree(int n, int delta_max, TreeShape shape, std::uint64_t seed);

int count_leaves(const Tree& t);

/// Vertex-disjoint bare paths of length k (k edges) plus the leftover forest.
struct BarePathDecomposition {
    std::vector<std::vector<int>> paths;          // each has k+1 vertices, in path order
    VertexSet forest_vertices;                    // V(T) minus path interiors
    std::vector<std::pair<int, int>> special_pairs;  // (first, last) of each path

    /// The forest T minus all path interiors, with original labels.
    Forest forest(const Tree& t) const;
};

/// Greedy maximal collection: every maximal run of degree-2 vertices is chopped
/// into floor(run/(k+1)) disjoint pieces of k+1 vertices each. The returned
/// count meets the (n-(2l-2)(k+1))/(k+1) lower bound.
BarePathDecomposition extract_bare_paths(const Tree& t, int k);

/// Restricts a decomposition to its first `count` paths (recomputing the
/// forest and special pairs).
BarePathDecomposition take_paths(const Tree& t, const BarePathDecomposition& d, int count);

struct LeafRemoval {
    Forest pruned;                   // tree on n-count vertices, original labels
    std::vector<int> removed;        // the deleted leaves
    std::vector<int> removed_at;     // per vertex: number of leaves deleted there
};

/// Deletes `count` leaves of t, chosen uniformly at random among all leaves.
LeafRemoval remove_leaves(const Tree& t, int count, std::uint64_t seed);

// Tree file format: n on the first line, then n-1 lines "parent child".
void write_tree(std::ostream& out, const Tree& t);
Tree read_tree(std::istream& in);
Tree load_tree_file(const std::string& path);

}  // namespace perturb
