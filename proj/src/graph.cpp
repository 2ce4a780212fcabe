#include "perturb/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "perturb/rng.hpp"

namespace perturb {

VertexSet::VertexSet(std::vector<int> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
}

VertexSet VertexSet::full(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return VertexSet(std::move(v));
}

bool VertexSet::contains(int v) const {
    return std::binary_search(members_.begin(), members_.end(), v);
}

VertexSet VertexSet::set_union(const VertexSet& a, const VertexSet& b) {
    std::vector<int> out;
    out.reserve(a.members_.size() + b.members_.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    VertexSet r;
    r.members_ = std::move(out);
    return r;
}

VertexSet VertexSet::set_difference(const VertexSet& a, const VertexSet& b) {
    std::vector<int> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    VertexSet r;
    r.members_ = std::move(out);
    return r;
}

VertexSet VertexSet::set_intersection(const VertexSet& a, const VertexSet& b) {
    std::vector<int> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    VertexSet r;
    r.members_ = std::move(out);
    return r;
}

bool VertexSet::disjoint(const VertexSet& a, const VertexSet& b) {
    auto it = a.begin();
    auto jt = b.begin();
    while (it != a.end() && jt != b.end()) {
        if (*it < *jt)
            ++it;
        else if (*jt < *it)
            ++jt;
        else
            return false;
    }
    return true;
}

Graph Graph::from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    if (n < 0) throw std::invalid_argument("Graph: negative vertex count");
    Graph g;
    g.n_ = n;
    g.adj_.assign(n, {});
    g.edge_set_.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        if (u == v) throw std::invalid_argument("Graph: self-loop");
        if (u < 0 || v < 0 || u >= n || v >= n) throw std::invalid_argument("Graph: vertex out of range");
        if (!g.edge_set_.insert(edge_key(u, v)).second) continue;  // dedup
        g.adj_[u].push_back(v);
        g.adj_[v].push_back(u);
        ++g.m_;
    }
    for (auto& nb : g.adj_) std::sort(nb.begin(), nb.end());
    return g;
}

std::vector<std::pair<int, int>> Graph::edges() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(m_);
    for (int u = 0; u < n_; ++u)
        for (int v : adj_[u])
            if (u < v) out.emplace_back(u, v);
    return out;
}

Graph generate_gnp(int n, double p, std::uint64_t seed) {
    if (n < 0) throw std::invalid_argument("generate_gnp: negative n");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("generate_gnp: p outside [0,1]");
    Rng rng(derive_seed(seed, 0x676e70 /*"gnp"*/));
    std::vector<std::pair<int, int>> edges;
    if (p > 0.0) {
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (p >= 1.0 || rng.next_double() < p) edges.emplace_back(u, v);
    }
    return Graph::from_edges(n, edges);
}

Graph complete_bipartite(int a, int b) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(static_cast<std::size_t>(a) * b);
    for (int u = 0; u < a; ++u)
        for (int v = a; v < a + b; ++v) edges.emplace_back(u, v);
    return Graph::from_edges(a + b, edges);
}

Graph graph_union(const Graph& g, const Graph& h) {
    if (g.vertex_count() != h.vertex_count())
        throw std::invalid_argument("graph_union: mismatched vertex counts");
    auto edges = g.edges();
    auto more = h.edges();
    edges.insert(edges.end(), more.begin(), more.end());
    return Graph::from_edges(g.vertex_count(), edges);
}

int min_degree(const Graph& g) {
    if (g.vertex_count() == 0) throw std::invalid_argument("min_degree: empty graph");
    int md = g.degree(0);
    for (int v = 1; v < g.vertex_count(); ++v) md = std::min(md, g.degree(v));
    return md;
}

std::size_t count_cross_edges(const Graph& g, const VertexSet& x, const VertexSet& y) {
    // scan the smaller side's adjacency
    const VertexSet& small = x.size() <= y.size() ? x : y;
    const VertexSet& large = x.size() <= y.size() ? y : x;
    std::size_t count = 0;
    for (int u : small)
        for (int v : g.neighbors(u))
            if (large.contains(v)) ++count;
    return count;
}

double density(const Graph& g, const VertexSet& x, const VertexSet& y) {
    if (x.empty() || y.empty()) throw std::invalid_argument("density: empty set");
    if (!VertexSet::disjoint(x, y)) throw std::invalid_argument("density: overlapping sets");
    std::size_t e = count_cross_edges(g, x, y);
    return static_cast<double>(e) / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

void write_edge_list(std::ostream& out, const Graph& g) {
    out << g.vertex_count() << ' ' << g.edge_count() << '\n';
    for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

Graph read_edge_list(std::istream& in) {
    int n;
    std::size_t m;
    if (!(in >> n >> m)) throw std::runtime_error("edge list: bad header");
    std::vector<std::pair<int, int>> edges;
    edges.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        int u, v;
        if (!(in >> u >> v)) throw std::runtime_error("edge list: truncated");
        edges.emplace_back(u, v);
    }
    return Graph::from_edges(n, edges);
}

Graph load_graph_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph file: " + path);
    return read_edge_list(in);
}

PerturbationPlan PerturbationPlan::from_c(double c_total, const std::array<double, 4>& split,
                                          int n, std::uint64_t seed) {
    if (c_total < 0) throw std::invalid_argument("PerturbationPlan: negative c");
    PerturbationPlan plan;
    plan.seed = seed;
    for (int i = 0; i < 4; ++i) {
        double p = n > 0 ? c_total * split[i] / n : 0.0;
        plan.phase_probabilities[i] = std::min(1.0, std::max(0.0, p));
    }
    return plan;
}

Graph PerturbationPlan::sample_phase(int phase, int n) const {
    if (phase < 0 || phase >= 4) throw std::invalid_argument("sample_phase: phase out of range");
    double p = phase_probabilities[phase];
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("sample_phase: probability outside [0,1]");
    return generate_gnp(n, p, derive_seed(seed, 0x706861u /*"pha"*/, phase));
}

Graph PerturbationPlan::union_of_phases(int n) const {
    Graph u = sample_phase(0, n);
    for (int i = 1; i < 4; ++i) u = graph_union(u, sample_phase(i, n));
    return u;
}

}  // namespace perturb
