#include "doctest.h"
#include "perturb/rng.hpp"
#include "perturb/tree.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

using namespace perturb;

namespace {

// exhaustive oracle: maximum number of vertex-disjoint paths of k edges whose
// vertices all have degree exactly two in t
int max_bare_packing(const Tree& t, int k) {
    int n = t.vertex_count();
    std::vector<std::vector<int>> candidates;
    std::vector<int> path;
    std::function<void(int)> extend = [&](int v) {
        path.push_back(v);
        if (static_cast<int>(path.size()) == k + 1) {
            if (path.front() < path.back()) candidates.push_back(path);
            path.pop_back();
            return;
        }
        for (int u : t.neighbors(v)) {
            if (t.degree(u) != 2) continue;
            if (std::find(path.begin(), path.end(), u) != path.end()) continue;
            extend(u);
        }
        path.pop_back();
    };
    for (int v = 0; v < n; ++v)
        if (t.degree(v) == 2) extend(v);
    int best = 0;
    std::function<void(std::size_t, std::set<int>&, int)> pick = [&](std::size_t idx,
                                                                     std::set<int>& used,
                                                                     int count) {
        best = std::max(best, count);
        for (std::size_t i = idx; i < candidates.size(); ++i) {
            bool clash = false;
            for (int v : candidates[i])
                if (used.count(v)) {
                    clash = true;
                    break;
                }
            if (clash) continue;
            for (int v : candidates[i]) used.insert(v);
            pick(i + 1, used, count + 1);
            for (int v : candidates[i]) used.erase(v);
        }
    };
    std::set<int> used;
    pick(0, used, 0);
    return best;
}

Tree star(int leaves) {
    std::vector<int> parent(leaves + 1, 0);
    parent[0] = -1;
    return Tree(std::move(parent));
}

std::vector<int> degree_sequence(const std::vector<std::vector<int>>& adj,
                                 const std::vector<int>& vertices) {
    std::vector<int> d;
    for (int v : vertices) d.push_back(static_cast<int>(adj[v].size()));
    std::sort(d.begin(), d.end());
    return d;
}

}  // namespace

TEST_CASE("path generator yields the unique max-degree-2 tree") {
    Tree t = generate_bounded_tree(5, 2, TreeShape::path, 1);
    CHECK(t.vertex_count() == 5);
    CHECK(t.max_degree() == 2);
    CHECK(count_leaves(t) == 2);
}

TEST_CASE("uniform attachment respects the degree bound") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Tree t = generate_bounded_tree(50, 3, TreeShape::uniform_attachment, seed);
        CHECK(t.vertex_count() == 50);
        CHECK(t.max_degree() <= 3);
        CHECK(t.edges().size() == 49);
    }
}

TEST_CASE("caterpillar on 7 vertices with max degree 3 has at least 3 leaves") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Tree t = generate_bounded_tree(7, 3, TreeShape::caterpillar, seed);
        CHECK(t.max_degree() <= 3);
        CHECK(count_leaves(t) >= 3);
    }
}

TEST_CASE("generators reject infeasible inputs") {
    CHECK_THROWS_AS(generate_bounded_tree(5, 1, TreeShape::path, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_bounded_tree(8, 2, TreeShape::caterpillar, 1),
                    std::invalid_argument);
}

TEST_CASE("count_leaves examples") {
    CHECK(count_leaves(generate_bounded_tree(5, 2, TreeShape::path, 1)) == 2);
    CHECK(count_leaves(star(4)) == 4);
    // broom: path of 4 plus 3 leaves at one end
    Tree broom(std::vector<int>{-1, 0, 1, 2, 3, 3, 3});
    CHECK(count_leaves(broom) == 4);
    std::vector<int> single{-1};
    CHECK_THROWS_AS(count_leaves(Tree(single)), std::invalid_argument);
}

TEST_CASE("subdivided trees have few leaves and long bare runs") {
    Tree t = generate_bounded_tree(300, 3, TreeShape::subdivided, 3);
    CHECK(t.vertex_count() == 300);
    CHECK(count_leaves(t) < 0.05 * 300);
    auto d = extract_bare_paths(t, 9);
    CHECK(static_cast<int>(d.paths.size()) >= 300 / 16);
}

TEST_CASE("bare paths: 10-path with k=2 gives exactly the packing optimum 2") {
    Tree t = generate_bounded_tree(10, 2, TreeShape::path, 1);
    auto d = extract_bare_paths(t, 2);
    CHECK(max_bare_packing(t, 2) == 2);
    CHECK(d.paths.size() == 2);
    for (const auto& p : d.paths) CHECK(p.size() == 3);
}

TEST_CASE("bare paths: star has none") {
    auto d = extract_bare_paths(star(4), 2);
    CHECK(d.paths.empty());
    CHECK(d.special_pairs.empty());
}

TEST_CASE("bare path output invariants and the leaf-count lower bound") {
    Rng rng(77);
    const char* shapes[] = {"uniform-attachment", "caterpillar", "subdivided", "path"};
    for (int rep = 0; rep < 120; ++rep) {
        int n = 10 + static_cast<int>(rng.next_below(190));
        int dmax = 2 + static_cast<int>(rng.next_below(4));
        TreeShape shape = tree_shape_from_string(shapes[rep % 4]);
        if (shape == TreeShape::caterpillar && dmax < 3) dmax = 3;
        Tree t = generate_bounded_tree(n, dmax, shape, rng.next_u64());
        for (int k : {3, 5, 7}) {
            auto d = extract_bare_paths(t, k);
            int leaves = count_leaves(t);
            double bound = (n - (2.0 * leaves - 2.0) * (k + 1)) / (k + 1);
            CHECK(static_cast<double>(d.paths.size()) >= bound - 1e-9);
            std::set<int> seen;
            for (const auto& p : d.paths) {
                CHECK(static_cast<int>(p.size()) == k + 1);
                for (int v : p) {
                    CHECK(!seen.count(v));
                    seen.insert(v);
                }
                for (std::size_t i = 1; i + 1 < p.size(); ++i) CHECK(t.degree(p[i]) == 2);
            }
        }
    }
}

TEST_CASE("forest plus paths reassembles the original edge set") {
    Rng rng(13);
    for (int rep = 0; rep < 25; ++rep) {
        int n = 20 + static_cast<int>(rng.next_below(80));
        Tree t = generate_bounded_tree(n, 4, TreeShape::uniform_attachment, rng.next_u64());
        auto d = extract_bare_paths(t, 3);
        Forest f = d.forest(t);
        std::set<std::pair<int, int>> edges;
        for (int v : f.vertices)
            for (int u : f.adj[v])
                if (v < u) edges.insert({v, u});
        for (const auto& p : d.paths)
            for (std::size_t i = 0; i + 1 < p.size(); ++i)
                edges.insert({std::min(p[i], p[i + 1]), std::max(p[i], p[i + 1])});
        std::set<std::pair<int, int>> expected;
        for (auto [a, b] : t.edges()) expected.insert({std::min(a, b), std::max(a, b)});
        CHECK(edges == expected);
    }
}

TEST_CASE("remove_leaves examples") {
    auto removal = remove_leaves(star(4), 2, 1);
    CHECK(removal.pruned.vertices.size() == 3);
    CHECK(removal.removed_at[0] == 2);

    Tree path5 = generate_bounded_tree(5, 2, TreeShape::path, 1);
    auto r2 = remove_leaves(path5, 2, 1);
    CHECK(r2.pruned.vertices.size() == 3);
    int total = 0;
    for (int c : r2.removed_at) total += c;
    CHECK(total == 2);

    CHECK_THROWS_AS(remove_leaves(path5, 3, 1), std::invalid_argument);
}

TEST_CASE("removing all caterpillar leaves bares the spine") {
    Tree t = generate_bounded_tree(40, 4, TreeShape::caterpillar, 5);
    int leaves = count_leaves(t);
    auto removal = remove_leaves(t, leaves, 9);
    int total = 0;
    for (int c : removal.removed_at) total += c;
    CHECK(total == leaves);
    CHECK(static_cast<int>(removal.removed.size()) == leaves);
}

TEST_CASE("re-attaching removed leaves restores the degree sequence") {
    Rng rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        int n = 15 + static_cast<int>(rng.next_below(60));
        Tree t = generate_bounded_tree(n, 4, TreeShape::uniform_attachment, rng.next_u64());
        int take = std::max(1, count_leaves(t) / 2);
        auto removal = remove_leaves(t, take, rng.next_u64());
        auto adj = removal.pruned.adj;
        std::vector<int> vertices = removal.pruned.vertices;
        int next = n;
        adj.resize(n + take);
        for (int v = 0; v < n; ++v)
            for (int i = 0; i < removal.removed_at[v]; ++i) {
                adj[v].push_back(next);
                adj[next].push_back(v);
                vertices.push_back(next);
                ++next;
            }
        std::vector<int> orig_vertices(n);
        for (int v = 0; v < n; ++v) orig_vertices[v] = v;
        std::vector<std::vector<int>> orig_adj(n);
        for (int v = 0; v < n; ++v) orig_adj[v] = t.neighbors(v);
        CHECK(degree_sequence(adj, vertices) == degree_sequence(orig_adj, orig_vertices));
        std::size_t edge_count = 0;
        for (int v : vertices) edge_count += adj[v].size();
        CHECK(edge_count / 2 == static_cast<std::size_t>(n - 1));
    }
}

TEST_CASE("tree file round trip") {
    Tree t = generate_bounded_tree(30, 3, TreeShape::uniform_attachment, 4);
    std::stringstream ss;
    write_tree(ss, t);
    Tree u = read_tree(ss);
    CHECK(u.vertex_count() == t.vertex_count());
    std::set<std::pair<int, int>> a, b;
    for (auto [p, c] : t.edges()) a.insert({std::min(p, c), std::max(p, c)});
    for (auto [p, c] : u.edges()) b.insert({std::min(p, c), std::max(p, c)});
    CHECK(a == b);
}
