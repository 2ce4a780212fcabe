#include "perturb/tree.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "perturb/rng.hpp"

namespace perturb {

Tree::Tree(std::vector<int> parent) : parent_(std::move(parent)) {
    n_ = static_cast<int>(parent_.size());
    if (n_ == 0) throw std::invalid_argument("Tree: empty");
    adj_.assign(n_, {});
    for (int v = 0; v < n_; ++v) {
        int p = parent_[v];
        if (p == -1) {
            if (root_ != -1) throw std::invalid_argument("Tree: multiple roots");
            root_ = v;
            continue;
        }
        if (p < 0 || p >= n_ || p == v) throw std::invalid_argument("Tree: bad parent");
        adj_[v].push_back(p);
        adj_[p].push_back(v);
    }
    if (root_ == -1) throw std::invalid_argument("Tree: no root");
    // n-1 parent edges and no repeats => acyclic iff connected; check reachability.
    std::vector<char> seen(n_, 0);
    std::deque<int> queue{root_};
    seen[root_] = 1;
    int reached = 1;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        for (int u : adj_[v])
            if (!seen[u]) {
                seen[u] = 1;
                ++reached;
                queue.push_back(u);
            }
    }
    if (reached != n_) throw std::invalid_argument("Tree: not connected");
    for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

int Tree::max_degree() const {
    int d = 0;
    for (int v = 0; v < n_; ++v) d = std::max(d, degree(v));
    return d;
}

std::vector<std::pair<int, int>> Tree::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(n_ - 1);
    for (int v = 0; v < n_; ++v)
        if (parent_[v] != -1) out.emplace_back(parent_[v], v);
    return out;
}

Forest Forest::from_tree(const Tree& t) {
    Forest f;
    f.universe = t.vertex_count();
    f.adj.assign(f.universe, {});
    f.vertices.resize(f.universe);
    for (int v = 0; v < f.universe; ++v) {
        f.vertices[v] = v;
        f.adj[v] = t.neighbors(v);
    }
    f.edge_count = static_cast<std::size_t>(f.universe) - 1;
    return f;
}

bool Forest::active(int v) const {
    return std::binary_search(vertices.begin(), vertices.end(), v);
}

int Forest::max_degree() const {
    int d = 0;
    for (int v : vertices) d = std::max(d, static_cast<int>(adj[v].size()));
    return d;
}

std::vector<std::vector<int>> Forest::components() const {
    std::vector<char> seen(universe, 0);
    std::vector<std::vector<int>> comps;
    for (int start : vertices) {
        if (seen[start]) continue;
        std::vector<int> comp{start};
        seen[start] = 1;
        for (std::size_t i = 0; i < comp.size(); ++i)
            for (int u : adj[comp[i]])
                if (!seen[u]) {
                    seen[u] = 1;
                    comp.push_back(u);
                }
        comps.push_back(std::move(comp));
    }
    return comps;
}

TreeShape tree_shape_from_string(const std::string& s) {
    if (s == "uniform-attachment") return TreeShape::uniform_attachment;
    if (s == "path") return TreeShape::path;
    if (s == "caterpillar") return TreeShape::caterpillar;
    if (s == "broom") return TreeShape::broom;
    if (s == "subdivided") return TreeShape::subdivided;
    throw std::invalid_argument("unknown tree shape: " + s);
}

std::string to_string(TreeShape shape) {
    switch (shape) {
        case TreeShape::uniform_attachment: return "uniform-attachment";
        case TreeShape::path: return "path";
        case TreeShape::caterpillar: return "caterpillar";
        case TreeShape::broom: return "broom";
        case TreeShape::subdivided: return "subdivided";
    }
    return "?";
}

namespace {

Tree make_path(int n) {
    std::vector<int> parent(n, -1);
    for (int v = 1; v < n; ++v) parent[v] = v - 1;
    return Tree(std::move(parent));
}

Tree make_uniform_attachment(int n, int delta_max, Rng& rng) {
    std::vector<int> parent(n, -1);
    std::vector<int> degree(n, 0);
    std::vector<int> open;  // vertices with residual capacity
    open.push_back(0);
    for (int v = 1; v < n; ++v) {
        std::size_t j = rng.next_below(open.size());
        int p = open[j];
        parent[v] = p;
        if (++degree[p] >= delta_max) {
            open[j] = open.back();
            open.pop_back();
        }
        degree[v] = 1;
        if (delta_max > 1) open.push_back(v);
    }
    return Tree(std::move(parent));
}

// Spine 0..s-1, pendants attached at interior spine vertices so that the
// canonical spine (tree minus leaves) really is the spine.
Tree make_caterpillar(int n, int delta_max, Rng& rng) {
    if (n <= 3) return make_path(n);
    int capacity_per_interior = delta_max - 2;
    if (capacity_per_interior < 1)
        throw std::invalid_argument("caterpillar: needs delta_max >= 3");
    // smallest spine with enough interior capacity for the pendants; stay near
    // it so the tree keeps many leaves
    int s_min = 3;
    while ((s_min - 2) * capacity_per_interior < n - s_min) ++s_min;
    if (s_min > n - 1) throw std::invalid_argument("caterpillar: infeasible n/delta_max");
    int jitter = std::min(n - 1 - s_min, std::max(1, n / 10));
    int s = s_min + (jitter > 0 ? static_cast<int>(rng.next_below(jitter + 1)) : 0);
    std::vector<int> parent(n, -1);
    for (int v = 1; v < s; ++v) parent[v] = v - 1;
    std::vector<int> slots;
    for (int v = 1; v < s - 1; ++v)
        for (int c = 0; c < capacity_per_interior; ++c) slots.push_back(v);
    rng.shuffle(slots);
    if (static_cast<int>(slots.size()) < n - s)
        throw std::invalid_argument("caterpillar: infeasible n/delta_max");
    for (int v = s; v < n; ++v) parent[v] = slots[v - s];
    return Tree(std::move(parent));
}

Tree make_broom(int n, int delta_max) {
    int brush = std::min(delta_max - 1, n - 1);
    int handle = n - brush;
    std::vector<int> parent(n, -1);
    for (int v = 1; v < handle; ++v) parent[v] = v - 1;
    for (int v = handle; v < n; ++v) parent[v] = handle - 1;
    return Tree(std::move(parent));
}

// Skeleton of ~n/12 vertices, every skeleton edge blown up into a segment.
Tree make_subdivided(int n, int delta_max, Rng& rng) {
    int m = std::max(2, n / 12);
    if (m >= n) m = n - 1;
    Tree skeleton = make_uniform_attachment(m, delta_max, rng);
    int extra = n - m;             // vertices to distribute over m-1 edges
    int base = extra / (m - 1);
    int remainder = extra % (m - 1);
    std::vector<int> parent(n, -1);
    int next_id = m;
    int edge_index = 0;
    for (int v = 0; v < m; ++v) {
        int p = skeleton.parent(v);
        if (p == -1) continue;
        int interior = base + (edge_index < remainder ? 1 : 0);
        ++edge_index;
        // path p - a_1 - ... - a_interior - v
        int prev = p;
        for (int j = 0; j < interior; ++j) {
            parent[next_id] = prev;
            prev = next_id++;
        }
        parent[v] = prev;
    }
    return Tree(std::move(parent));
}

}  // namespace

Tree generate_bounded_tree(int n, int delta_max, TreeShape shape, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_bounded_tree: n < 1");
    if (delta_max < 2 && n >= 3)
        throw std::invalid_argument("generate_bounded_tree: delta_max < 2 with n >= 3");
    Rng rng(derive_seed(seed, 0x74726565 /*"tree"*/));
    Tree t = [&] {
        switch (shape) {
            case TreeShape::path: return make_path(n);
            case TreeShape::uniform_attachment: return make_uniform_attachment(n, delta_max, rng);
            case TreeShape::caterpillar: return make_caterpillar(n, delta_max, rng);
            case TreeShape::broom: return make_broom(n, delta_max);
            case TreeShape::subdivided: return make_subdivided(n, delta_max, rng);
        }
        throw std::invalid_argument("generate_bounded_tree: bad shape");
    }();
    if (t.max_degree() > delta_max)
        throw std::logic_error("generate_bounded_tree: degree bound violated");
    return t;
}

int count_leaves(const Tree& t) {
    if (t.vertex_count() < 2) throw std::invalid_argument("count_leaves: single-vertex tree");
    int leaves = 0;
    for (int v = 0; v < t.vertex_count(); ++v)
        if (t.degree(v) == 1) ++leaves;
    return leaves;
}

BarePathDecomposition extract_bare_paths(const Tree& t, int k) {
    if (k < 2) throw std::invalid_argument("extract_bare_paths: k < 2");
    int n = t.vertex_count();
    // Components of the subgraph induced on degree-2 vertices are paths; walk
    // each from one end and take consecutive chunks of k+1 vertices.
    std::vector<char> is_deg2(n, 0);
    for (int v = 0; v < n; ++v) is_deg2[v] = t.degree(v) == 2;
    std::vector<char> seen(n, 0);
    BarePathDecomposition out;
    for (int v = 0; v < n; ++v) {
        if (!is_deg2[v] || seen[v]) continue;
        // count degree-2 neighbours to find a run end
        int deg2_nb = 0;
        for (int u : t.neighbors(v))
            if (is_deg2[u]) ++deg2_nb;
        if (deg2_nb == 2) continue;  // interior of a run; wait for an end
        // walk the run
        std::vector<int> run{v};
        seen[v] = 1;
        int cur = v, prev = -1;
        for (;;) {
            int next = -1;
            for (int u : t.neighbors(cur))
                if (is_deg2[u] && u != prev) {
                    next = u;
                    break;
                }
            if (next == -1) break;
            run.push_back(next);
            seen[next] = 1;
            prev = cur;
            cur = next;
        }
        for (std::size_t start = 0; start + k < run.size(); start += k + 1)
            out.paths.emplace_back(run.begin() + start, run.begin() + start + k + 1);
    }
    // isolated degree-2 cycles cannot occur in a tree, but a run might be a
    // single vertex with two degree-2 neighbours on a 3-cycle; trees exclude it.
    std::vector<char> interior(n, 0);
    for (const auto& path : out.paths) {
        out.special_pairs.emplace_back(path.front(), path.back());
        for (std::size_t i = 1; i + 1 < path.size(); ++i) interior[path[i]] = 1;
    }
    std::vector<int> remaining;
    for (int v = 0; v < n; ++v)
        if (!interior[v]) remaining.push_back(v);
    out.forest_vertices = VertexSet(std::move(remaining));
    return out;
}

Forest BarePathDecomposition::forest(const Tree& t) const {
    Forest f;
    f.universe = t.vertex_count();
    f.adj.assign(f.universe, {});
    f.vertices = forest_vertices.members();
    std::vector<char> active(f.universe, 0);
    for (int v : f.vertices) active[v] = 1;
    for (auto [p, c] : t.edges()) {
        if (active[p] && active[c]) {
            f.adj[p].push_back(c);
            f.adj[c].push_back(p);
            ++f.edge_count;
        }
    }
    for (int v : f.vertices) std::sort(f.adj[v].begin(), f.adj[v].end());
    return f;
}

BarePathDecomposition take_paths(const Tree& t, const BarePathDecomposition& d, int count) {
    BarePathDecomposition out;
    int keep = std::min<int>(count, static_cast<int>(d.paths.size()));
    out.paths.assign(d.paths.begin(), d.paths.begin() + keep);
    std::vector<char> interior(t.vertex_count(), 0);
    for (const auto& path : out.paths) {
        out.special_pairs.emplace_back(path.front(), path.back());
        for (std::size_t i = 1; i + 1 < path.size(); ++i) interior[path[i]] = 1;
    }
    std::vector<int> remaining;
    for (int v = 0; v < t.vertex_count(); ++v)
        if (!interior[v]) remaining.push_back(v);
    out.forest_vertices = VertexSet(std::move(remaining));
    return out;
}

LeafRemoval remove_leaves(const Tree& t, int count, std::uint64_t seed) {
    int n = t.vertex_count();
    std::vector<int> leaves;
    for (int v = 0; v < n; ++v)
        if (t.degree(v) == 1) leaves.push_back(v);
    if (count > static_cast<int>(leaves.size()))
        throw std::invalid_argument("remove_leaves: count exceeds leaf count");
    if (count < 0 || n - count < 1)
        throw std::invalid_argument("remove_leaves: bad count");
    Rng rng(derive_seed(seed, 0x6c656166 /*"leaf"*/));
    rng.shuffle(leaves);
    LeafRemoval out;
    out.removed.assign(leaves.begin(), leaves.begin() + count);
    out.removed_at.assign(n, 0);
    std::vector<char> gone(n, 0);
    for (int v : out.removed) gone[v] = 1;
    for (int v : out.removed) out.removed_at[t.neighbors(v)[0]]++;
    Forest& f = out.pruned;
    f.universe = n;
    f.adj.assign(n, {});
    for (int v = 0; v < n; ++v)
        if (!gone[v]) f.vertices.push_back(v);
    for (auto [p, c] : t.edges())
        if (!gone[p] && !gone[c]) {
            f.adj[p].push_back(c);
            f.adj[c].push_back(p);
            ++f.edge_count;
        }
    for (int v : f.vertices) std::sort(f.adj[v].begin(), f.adj[v].end());
    return out;
}

void write_tree(std::ostream& out, const Tree& t) {
    out << t.vertex_count() << '\n';
    for (auto [p, c] : t.edges()) out << p << ' ' << c << '\n';
}

Tree read_tree(std::istream& in) {
    int n;
    if (!(in >> n) || n < 1) throw std::runtime_error("tree file: bad header");
    std::vector<int> parent(n, -1);
    std::vector<char> has_parent(n, 0);
    for (int i = 0; i < n - 1; ++i) {
        int p, c;
        if (!(in >> p >> c)) throw std::runtime_error("tree file: truncated");
        if (c < 0 || c >= n || has_parent[c]) throw std::runtime_error("tree file: bad child");
        parent[c] = p;
        has_parent[c] = 1;
    }
    return Tree(std::move(parent));
}

Tree load_tree_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tree file: " + path);
    return read_tree(in);
}

}  // namespace perturb
