#include "perturb/regularity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "perturb/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace perturb {

namespace {

int threshold_size(double eps, int cluster_size) {
    int m = static_cast<int>(std::ceil(eps * cluster_size - 1e-12));
    return std::max(1, std::min(m, cluster_size));
}

std::size_t cross_edges_between(const Graph& g, const std::vector<int>& u1,
                                const std::vector<int>& u2) {
    std::size_t count = 0;
    for (int a : u1)
        for (int b : u2)
            if (g.has_edge(a, b)) ++count;
    return count;
}

double subset_density(const Graph& g, const std::vector<int>& u1, const std::vector<int>& u2) {
    return static_cast<double>(cross_edges_between(g, u1, u2)) /
           (static_cast<double>(u1.size()) * static_cast<double>(u2.size()));
}

// For a fixed U1, the minimizing U2 is simply the m2 vertices of y with the
// fewest neighbours in U1. One side of the search collapses.
std::vector<int> worst_partner_subset(const Graph& g, const std::vector<int>& u1,
                                      const std::vector<int>& y, int m2) {
    std::vector<std::pair<int, int>> scored;  // (count into u1, vertex)
    scored.reserve(y.size());
    for (int b : y) {
        int cnt = 0;
        for (int a : u1)
            if (g.has_edge(a, b)) ++cnt;
        scored.emplace_back(cnt, b);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<int> u2;
    u2.reserve(m2);
    for (int i = 0; i < m2; ++i) u2.push_back(scored[i].second);
    return u2;
}

// One sampled probe. Even indices draw both subsets uniformly; odd indices use
// a pivot vertex's non-neighbourhood plus a greedy worst partner, which finds
// the structured violations (e.g. two sets on the same side of a bipartition)
// that uniform sampling essentially never hits.
bool sampled_probe(const Graph& g, const std::vector<int>& xs, const std::vector<int>& ys, int m1,
                   int m2, double delta, std::uint64_t probe_seed, DensityWitness& out) {
    Rng rng(probe_seed);
    std::vector<int> u1;
    u1.reserve(m1);
    bool structured = (probe_seed & 1u) == 1u;
    if (!structured) {
        auto idx = rng.sample_indices(static_cast<int>(xs.size()), m1);
        for (int i : idx) u1.push_back(xs[i]);
        std::vector<int> u2;
        auto idx2 = rng.sample_indices(static_cast<int>(ys.size()), m2);
        for (int i : idx2) u2.push_back(ys[i]);
        double d = subset_density(g, u1, u2);
        if (d < delta) {
            out = {std::move(u1), std::move(u2), d};
            return true;
        }
        return false;
    }
    int pivot = ys[rng.next_below(ys.size())];
    std::vector<int> non_nb, nb;
    for (int a : xs)
        (g.has_edge(a, pivot) ? nb : non_nb).push_back(a);
    rng.shuffle(non_nb);
    rng.shuffle(nb);
    for (int a : non_nb) {
        if (static_cast<int>(u1.size()) == m1) break;
        u1.push_back(a);
    }
    for (int a : nb) {
        if (static_cast<int>(u1.size()) == m1) break;
        u1.push_back(a);
    }
    std::vector<int> u2 = worst_partner_subset(g, u1, ys, m2);
    double d = subset_density(g, u1, u2);
    if (d < delta) {
        out = {std::move(u1), std::move(u2), d};
        return true;
    }
    return false;
}

}  // namespace

CertVerdict certify_dense(const Graph& g, const VertexSet& x, const VertexSet& y, double eps,
                          double delta, CertMode mode, const CertOptions& opts) {
    if (eps <= 0.0 || eps >= 1.0 || delta <= 0.0 || delta >= 1.0)
        throw std::invalid_argument("certify_dense: eps/delta outside (0,1)");
    if (x.empty() || y.empty()) throw std::invalid_argument("certify_dense: empty side");
    if (!VertexSet::disjoint(x, y)) throw std::invalid_argument("certify_dense: overlapping sides");
    const std::vector<int>& xs = x.members();
    const std::vector<int>& ys = y.members();
    const int m1 = threshold_size(eps, x.size());
    const int m2 = threshold_size(eps, y.size());

    if (mode == CertMode::exhaustive) {
        if (x.size() + y.size() > 24)
            throw std::invalid_argument("certify_dense exhaustive: |x|+|y| > 24");
        // enumerate threshold-size subsets of the smaller side, pair each with
        // its worst partner on the other side
        bool x_outer = x.size() <= y.size();
        const std::vector<int>& outer = x_outer ? xs : ys;
        const std::vector<int>& inner = x_outer ? ys : xs;
        const int mo = x_outer ? m1 : m2;
        const int mi = x_outer ? m2 : m1;
        std::vector<int> comb(mo);
        std::iota(comb.begin(), comb.end(), 0);
        const int no = static_cast<int>(outer.size());
        for (;;) {
            std::vector<int> u_outer;
            u_outer.reserve(mo);
            for (int i : comb) u_outer.push_back(outer[i]);
            std::vector<int> u_inner = worst_partner_subset(g, u_outer, inner, mi);
            double d = subset_density(g, u_outer, u_inner);
            if (d < delta) {
                DensityWitness w;
                w.u1 = x_outer ? u_outer : u_inner;
                w.u2 = x_outer ? u_inner : u_outer;
                w.density = d;
                return {false, w};
            }
            // next combination
            int i = mo - 1;
            while (i >= 0 && comb[i] == no - mo + i) --i;
            if (i < 0) break;
            ++comb[i];
            for (int j = i + 1; j < mo; ++j) comb[j] = comb[j - 1] + 1;
        }
        return {true, std::nullopt};
    }

    // sampled: blocks of probes, each derived from (seed, index); the lowest
    // failing index wins so serial and parallel runs return the same witness
    const int budget = std::max(1, opts.budget);
    const int block = 64;
    for (int start = 0; start < budget; start += block) {
        int end = std::min(budget, start + block);
        int first_fail = budget;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(min : first_fail) if (opts.parallel)
#endif
        for (int s = start; s < end; ++s) {
            DensityWitness w;
            if (sampled_probe(g, xs, ys, m1, m2, delta, derive_seed(opts.seed, 0xce27, s), w))
                first_fail = std::min(first_fail, s);
        }
        if (first_fail < budget) {
            DensityWitness w;
            sampled_probe(g, xs, ys, m1, m2, delta, derive_seed(opts.seed, 0xce27, first_fail), w);
            return {false, w};
        }
    }
    return {true, std::nullopt};
}

CertVerdict certify_super_regular(const Graph& g, const VertexSet& x, const VertexSet& y,
                                  double eps, double delta, CertMode mode,
                                  const CertOptions& opts) {
    // degree clause first: it is cheap and exact
    for (int h = 0; h < 2; ++h) {
        const VertexSet& from = h == 0 ? x : y;
        const VertexSet& to = h == 0 ? y : x;
        double need = delta * to.size();
        for (int v : from) {
            int cnt = 0;
            for (int u : g.neighbors(v))
                if (to.contains(u)) ++cnt;
            if (cnt < need - 1e-12) {
                DensityWitness w;
                w.u1 = {v};
                w.u2 = to.members();
                w.density = static_cast<double>(cnt) / to.size();
                return {false, w};
            }
        }
    }
    return certify_dense(g, x, y, eps, delta, mode, opts);
}

bool recheck_witness(const Graph& g, const VertexSet& x, const VertexSet& y, double eps,
                     double delta, const DensityWitness& w) {
    // degree-clause witnesses: single vertex vs whole partner side
    if (w.u1.size() == 1 && static_cast<int>(w.u2.size()) == y.size()) {
        int v = w.u1[0];
        if (x.contains(v)) {
            int cnt = 0;
            for (int u : g.neighbors(v))
                if (y.contains(u)) ++cnt;
            if (cnt < delta * y.size()) return true;
        }
        if (y.contains(v)) {
            int cnt = 0;
            for (int u : g.neighbors(v))
                if (x.contains(u)) ++cnt;
            if (cnt < delta * x.size()) return true;
        }
    }
    if (static_cast<int>(w.u1.size()) < threshold_size(eps, x.size())) return false;
    if (static_cast<int>(w.u2.size()) < threshold_size(eps, y.size())) return false;
    for (int v : w.u1)
        if (!x.contains(v)) return false;
    for (int v : w.u2)
        if (!y.contains(v)) return false;
    return subset_density(g, w.u1, w.u2) < delta;
}

std::vector<std::vector<int>> star_cover(const Graph& g, double alpha) {
    const int n = g.vertex_count();
    if (n == 0) throw std::invalid_argument("star_cover: empty graph");
    if (alpha <= 0.0) throw std::invalid_argument("star_cover: alpha <= 0");
    if (min_degree(g) + 1e-9 < alpha * n)
        throw std::invalid_argument("star_cover: min degree below alpha*n");
    const int cap = 1 + static_cast<int>(std::floor(1.0 / alpha + 1e-9));  // max vertices per star

    std::vector<std::vector<int>> stars;
    std::vector<int> star_of(n, -1);

    // maximal family of 2-stars
    for (int v = 0; v < n; ++v) {
        if (star_of[v] != -1) continue;
        for (int u : g.neighbors(v)) {
            if (star_of[u] != -1) continue;
            star_of[v] = star_of[u] = static_cast<int>(stars.size());
            stars.push_back({v, u});
            break;
        }
    }

    // exchange moves for uncovered vertices
    for (int v = 0; v < n; ++v) {
        if (star_of[v] != -1) continue;
        bool placed = false;
        // move 1: join a neighbour that is a center (either end of a 2-star)
        // of a star with spare capacity
        for (int u : g.neighbors(v)) {
            int s = star_of[u];
            if (s == -1) continue;
            auto& star = stars[s];
            if (static_cast<int>(star.size()) >= cap) continue;
            bool u_center = star[0] == u;
            if (!u_center && star.size() == 2) {
                std::swap(star[0], star[1]);  // 2-stars: either end may serve as center
                u_center = true;
            }
            if (!u_center) continue;
            star.push_back(v);
            star_of[v] = s;
            placed = true;
            break;
        }
        if (placed) continue;
        // move 2: steal a leaf from a star of size >= 3 and pair up with it
        for (int u : g.neighbors(v)) {
            int s = star_of[u];
            if (s == -1) continue;
            auto& star = stars[s];
            if (star.size() < 3 || star[0] == u) continue;
            star.erase(std::find(star.begin(), star.end(), u));
            star_of[v] = star_of[u] = static_cast<int>(stars.size());
            stars.push_back({v, u});
            placed = true;
            break;
        }
        if (placed) continue;
        // an uncovered neighbour would have been paired in the first pass
        throw std::runtime_error("star_cover: exchange argument stuck (alpha > 1/2?)");
    }
    return stars;
}

bool validate_star_cover(const Graph& g, double alpha, const std::vector<std::vector<int>>& stars) {
    const int n = g.vertex_count();
    const int cap = 1 + static_cast<int>(std::floor(1.0 / alpha + 1e-9));
    std::vector<char> covered(n, 0);
    for (const auto& star : stars) {
        if (static_cast<int>(star.size()) < 2 || static_cast<int>(star.size()) > cap) return false;
        for (std::size_t i = 1; i < star.size(); ++i)
            if (!g.has_edge(star[0], star[i])) return false;
        for (int v : star) {
            if (covered[v]) return false;
            covered[v] = 1;
        }
    }
    return std::all_of(covered.begin(), covered.end(), [](char c) { return c == 1; });
}

namespace {

// Neighbourhood signatures against a probe set; vertices whose signature class
// is large keep their class, the rest join the nearest large class by Hamming
// distance. Structured hosts (complete multipartite, disjoint dense blocks)
// split cleanly; unstructured hosts collapse into one class, recovering a
// plain random equitable partition.
std::vector<std::vector<int>> signature_classes(const Graph& g, int target_size, Rng& rng) {
    const int n = g.vertex_count();
    const int probes = std::min(n, 12);
    std::vector<int> probe = rng.sample_indices(n, probes);
    std::vector<std::uint32_t> sig(n, 0);
    for (int v = 0; v < n; ++v)
        for (int j = 0; j < probes; ++j)
            if (g.has_edge(v, probe[j])) sig[v] |= 1u << j;
    std::map<std::uint32_t, std::vector<int>> groups;
    for (int v = 0; v < n; ++v) groups[sig[v]].push_back(v);

    std::vector<std::uint32_t> kept_sigs;
    std::vector<std::vector<int>> classes;
    for (auto& [s, members] : groups)
        if (static_cast<int>(members.size()) >= target_size) {
            kept_sigs.push_back(s);
            classes.push_back(std::move(members));
        }
    if (classes.empty()) {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        return {all};
    }
    for (auto& [s, members] : groups) {
        if (members.empty()) continue;
        if (std::find(kept_sigs.begin(), kept_sigs.end(), s) != kept_sigs.end()) continue;
        int best = 0, best_dist = 33;
        for (std::size_t i = 0; i < kept_sigs.size(); ++i) {
            int dist = std::popcount(s ^ kept_sigs[i]);
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(i);
            }
        }
        for (int v : members) classes[best].push_back(v);
    }
    return classes;
}

}  // namespace

PartitionResult build_partition(const Graph& g, double alpha, int target_cluster_size,
                                const RegularityParams& params, std::uint64_t seed,
                                double alpha_prime, bool parallel) {
    const int n = g.vertex_count();
    if (n == 0) return {std::nullopt, "empty_graph", -1};
    if (min_degree(g) + 1e-9 < alpha * n) return {std::nullopt, "min_degree", -1};
    if (alpha_prime <= 0.0) alpha_prime = alpha / 4.0;
    const double eps = params.epsilon;
    const double delta = params.delta;
    Rng rng(derive_seed(seed, 0x70617274 /*"part"*/));

    // 1. signature-refined equitable clusters
    auto classes = signature_classes(g, target_cluster_size, rng);
    std::vector<std::vector<int>> clusters;
    for (auto& cls : classes) {
        rng.shuffle(cls);
        int count = std::max(1, static_cast<int>(std::lround(
                                    static_cast<double>(cls.size()) / target_cluster_size)));
        int base = static_cast<int>(cls.size()) / count;
        int rem = static_cast<int>(cls.size()) % count;
        std::size_t at = 0;
        for (int j = 0; j < count; ++j) {
            int sz = base + (j < rem ? 1 : 0);
            clusters.emplace_back(cls.begin() + at, cls.begin() + at + sz);
            at += sz;
        }
    }
    const int kc = static_cast<int>(clusters.size());
    if (kc < 2) return {std::nullopt, "too_few_clusters", -1};
    std::vector<VertexSet> cluster_sets;
    cluster_sets.reserve(kc);
    for (auto& cl : clusters) cluster_sets.emplace_back(cl);

    // 2. cluster graph on certified-dense pairs
    std::vector<std::pair<int, int>> cg_edges;
    for (int i = 0; i < kc; ++i)
        for (int j = i + 1; j < kc; ++j) {
            if (density(g, cluster_sets[i], cluster_sets[j]) < alpha_prime) continue;
            CertOptions opts{params.witness_budget, derive_seed(seed, 0xc6, i, j), parallel};
            if (certify_dense(g, cluster_sets[i], cluster_sets[j], eps, delta,
                              CertMode::sampled, opts)
                    .pass)
                cg_edges.emplace_back(i, j);
        }
    Graph cluster_graph = Graph::from_edges(kc, cg_edges);
    int cg_md = min_degree(cluster_graph);
    if (cg_md == 0) return {std::nullopt, "cluster_graph_isolated", -1};
    double alpha_cover = std::min(0.5, static_cast<double>(cg_md) / kc);

    // 3+4. star cover; center becomes V^1, merged leaves become V^2
    auto stars = star_cover(cluster_graph, alpha_cover);
    std::vector<std::array<std::vector<int>, 2>> pairs;
    for (const auto& star : stars) {
        std::array<std::vector<int>, 2> pair;
        pair[0] = clusters[star[0]];
        for (std::size_t i = 1; i < star.size(); ++i)
            pair[1].insert(pair[1].end(), clusters[star[i]].begin(), clusters[star[i]].end());
        std::sort(pair[0].begin(), pair[0].end());
        std::sort(pair[1].begin(), pair[1].end());
        pairs.push_back(std::move(pair));
    }
    const int q = static_cast<int>(pairs.size());

    // 5. trim to a super-regular core: drop vertices with cross-degree below
    // delta*|partner| until stable, capped at eps*|cluster| deletions
    std::vector<int> trimmed;
    for (int i = 0; i < q; ++i) {
        std::size_t cap0 = static_cast<std::size_t>(std::floor(eps * pairs[i][0].size()));
        std::size_t cap1 = static_cast<std::size_t>(std::floor(eps * pairs[i][1].size()));
        std::size_t dropped0 = 0, dropped1 = 0;
        bool changed = true;
        while (changed) {
            changed = false;
            for (int h = 0; h < 2; ++h) {
                auto& side = pairs[i][h];
                auto& other = pairs[i][1 - h];
                std::vector<char> other_mask(n, 0);
                for (int v : other) other_mask[v] = 1;
                double need = delta * other.size();
                for (std::size_t idx = side.size(); idx-- > 0;) {
                    int cnt = 0;
                    for (int u : g.neighbors(side[idx]))
                        if (other_mask[u]) ++cnt;
                    if (cnt < need - 1e-12) {
                        trimmed.push_back(side[idx]);
                        side.erase(side.begin() + idx);
                        (h == 0 ? dropped0 : dropped1)++;
                        changed = true;
                    }
                }
            }
        }
        if (dropped0 > cap0 || dropped1 > cap1) return {std::nullopt, "trim_cap", i};
        if (pairs[i][0].empty() || pairs[i][1].empty()) return {std::nullopt, "trim_cap", i};
    }

    // 6. redistribute trimmed vertices to a random eligible cluster
    std::vector<int> added(2 * q, 0);
    rng.shuffle(trimmed);
    for (int v : trimmed) {
        std::vector<std::pair<int, int>> eligible;  // (pair, side the vertex joins)
        for (int i = 0; i < q; ++i)
            for (int h = 0; h < 2; ++h) {
                const auto& toward = pairs[i][h];  // v needs delta-fraction degree here
                int cnt = 0;
                for (int u : g.neighbors(v))
                    if (std::binary_search(toward.begin(), toward.end(), u)) ++cnt;
                if (cnt >= delta * toward.size()) eligible.emplace_back(i, 1 - h);
            }
        if (eligible.empty()) return {std::nullopt, "redistribute", -1};
        auto [pi, ph] = eligible[rng.next_below(eligible.size())];
        pairs[pi][ph].insert(
            std::upper_bound(pairs[pi][ph].begin(), pairs[pi][ph].end(), v), v);
        added[2 * pi + ph]++;
    }
    // growth bound: the added fraction f must keep robust_eps(eps, f) within 2*eps
    for (int i = 0; i < q; ++i)
        for (int h = 0; h < 2; ++h) {
            double base = static_cast<double>(pairs[i][h].size()) - added[2 * i + h];
            double f = added[2 * i + h] / std::max(1.0, eps * base);
            if (robust_eps(eps, f) > 2.0 * eps + 1e-12) return {std::nullopt, "growth_bound", i};
        }

    // final certification, fresh state
    ClusterPartition part;
    part.pairs = pairs;
    part.params = params;
    part.q = q;
    std::size_t min_sz = SIZE_MAX, max_sz = 0;
    for (int i = 0; i < q; ++i)
        for (int h = 0; h < 2; ++h) {
            min_sz = std::min(min_sz, pairs[i][h].size());
            max_sz = std::max(max_sz, pairs[i][h].size());
        }
    part.rho = static_cast<double>(max_sz) / static_cast<double>(min_sz);
    for (int i = 0; i < q; ++i) {
        VertexSet a(pairs[i][0]), b(pairs[i][1]);
        CertOptions opts{params.witness_budget, derive_seed(seed, 0xf1a1, i), parallel};
        if (!certify_super_regular(g, a, b, eps, delta, CertMode::sampled, opts).pass)
            return {std::nullopt, "final_certification", i};
        part.pair_density.push_back(density(g, a, b));
    }
    return {std::move(part), "", -1};
}

std::string ClusterPartition::to_json(const Graph& g) const {
    nlohmann::json j;
    j["epsilon"] = params.epsilon;
    j["delta"] = params.delta;
    j["rho"] = rho;
    j["q"] = q;
    j["clusters"] = nlohmann::json::array();
    for (int i = 0; i < q; ++i)
        for (int h = 0; h < 2; ++h) {
            nlohmann::json c;
            c["i"] = i + 1;
            c["h"] = h + 1;
            c["members"] = pairs[i][h];
            j["clusters"].push_back(c);
        }
    j["pair_densities"] = pair_density;
    (void)g;
    return j.dump(2);
}

CertVerdict subset_inherits(const Graph& g, const VertexSet& x, const VertexSet& y, int size_x,
                            int size_y, double eps_prime, double delta, int budget,
                            std::uint64_t seed) {
    if (size_x < 1 || size_x > x.size() || size_y < 1 || size_y > y.size())
        throw std::invalid_argument("subset_inherits: bad subset sizes");
    Rng rng(derive_seed(seed, 0x5ab));
    std::vector<int> xs, ys;
    for (int i : rng.sample_indices(x.size(), size_x)) xs.push_back(x.members()[i]);
    for (int i : rng.sample_indices(y.size(), size_y)) ys.push_back(y.members()[i]);
    CertOptions opts{budget, derive_seed(seed, 0x5ac), true};
    return certify_super_regular(g, VertexSet(xs), VertexSet(ys), eps_prime, delta / 2.0,
                                 CertMode::sampled, opts);
}

double combine_delta(double delta, int r) {
    if (r < 1 || delta <= 0.0) throw std::invalid_argument("combine_delta: bad arguments");
    return delta / r;
}

double robust_eps(double eps, double f) {
    if (eps <= 0.0 || f < 0.0) throw std::invalid_argument("robust_eps: bad arguments");
    return std::max(2.0 * f, 1.0 + f) * eps;
}

double robust_delta(double delta, double f, double eps) {
    if (delta <= 0.0 || f < 0.0 || eps <= 0.0)
        throw std::invalid_argument("robust_delta: bad arguments");
    return std::min(0.25, 1.0 / (1.0 + f * eps)) * delta;
}

}  // namespace perturb
