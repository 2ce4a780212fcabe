#include "perturb/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "perturb/rng.hpp"
#include "perturb/star_matching.hpp"

namespace perturb {

namespace {

constexpr int kPairIndexOf(int cluster_id) { return cluster_id / 2; }
constexpr int kSideOf(int cluster_id) { return cluster_id % 2; }
constexpr int kClusterId(int pair_index, int side) { return 2 * pair_index + side; }
constexpr int kPartner(int cluster_id) { return cluster_id ^ 1; }

std::vector<int> intersect_neighbors(const Graph& g, int v, const std::vector<int>& pool,
                                     const std::vector<char>& blocked) {
    std::vector<int> out;
    for (int u : pool)
        if (!blocked[u] && g.has_edge(v, u)) out.push_back(u);
    return out;
}

void erase_values(std::vector<int>& v, const std::vector<char>& remove_mask) {
    v.erase(std::remove_if(v.begin(), v.end(), [&](int x) { return remove_mask[x] != 0; }),
            v.end());
}

}  // namespace

int Case2State::x_count() const {
    int c = 0;
    for (const auto& pr : x_sets) c += static_cast<int>(pr[0].size() + pr[1].size());
    return c;
}

int Case2State::w_count() const {
    int c = 0;
    for (const auto& pr : w_sets) c += static_cast<int>(pr[0].size() + pr[1].size());
    return c;
}

StageStatus stage_embed_forest(const Tree& t, const BarePathDecomposition& decomp, const Graph& r2,
                               const ClusterPartition& part, Case2State& st, std::uint64_t seed,
                               std::int64_t retry_budget) {
    const int n = t.vertex_count();
    st.n = n;
    st.partition = part;
    st.cluster_of.assign(n, -1);
    for (int i = 0; i < part.q; ++i)
        for (int h = 0; h < 2; ++h)
            for (int v : part.pairs[i][h]) st.cluster_of[v] = kClusterId(i, h);

    Forest f = decomp.forest(t);
    auto embedded = embed_forest_greedy(f, r2, VertexSet::full(n), derive_seed(seed, 0xf0), retry_budget);
    if (!embedded.embedding)
        return {false, "forest embedding failed, stuck subtree " +
                           std::to_string(embedded.stuck_subtree_size), 0};
    st.forest_map = std::move(*embedded.embedding);

    // pending paths and their current host endpoints
    st.pending.clear();
    std::vector<char> special_host(n, 0);
    for (const auto& path : decomp.paths) {
        PendingPath p;
        p.tree_u = path.front();
        p.tree_v = path.back();
        p.tree_interior.assign(path.begin() + 1, path.end() - 1);
        p.host_x = st.forest_map.map[p.tree_u];
        p.host_y = st.forest_map.map[p.tree_v];
        special_host[p.host_x] = 1;
        special_host[p.host_y] = 1;
        st.pending.push_back(std::move(p));
    }

    auto collect_sets = [&] {
        st.x_sets.assign(part.q, {});
        st.w_sets.assign(part.q, {});
        for (int i = 0; i < part.q; ++i)
            for (int h = 0; h < 2; ++h)
                for (int v : part.pairs[i][h]) {
                    if (special_host[v])
                        st.x_sets[i][h].push_back(v);
                    else if (!st.forest_map.used[v])
                        st.w_sets[i][h].push_back(v);
                }
    };
    collect_sets();
    st.z.assign(part.q, {});

    // occupancy check: |W_i| should sit in the 5-sigma hypergeometric band
    st.occupancy_in_band.assign(2 * part.q, 1);
    int used_total = 0;
    for (int v = 0; v < n; ++v) used_total += st.forest_map.used[v] ? 1 : 0;
    int free_total = n - used_total;
    for (int i = 0; i < part.q; ++i)
        for (int h = 0; h < 2; ++h) {
            double cluster = static_cast<double>(part.pairs[i][h].size());
            double mean = cluster * free_total / n;
            double var = free_total * (cluster / n) * (1.0 - cluster / n) *
                         (static_cast<double>(n - free_total) / std::max(1, n - 1));
            double sigma = std::sqrt(std::max(var, 1e-9));
            double got = static_cast<double>(st.w_sets[i][h].size());
            st.occupancy_in_band[kClusterId(i, h)] = std::abs(got - mean) <= 5.0 * sigma ? 1 : 0;
        }

    // Even out the free sets: hypergeometric noise leaves some clusters with
    // too few free vertices for the later arithmetic, so re-map non-special
    // forest vertices from starved clusters onto free vertices of rich ones.
    // Each swap keeps the embedding valid (re-checked edge by edge).
    Rng rng(derive_seed(seed, 0xba1a));
    std::vector<int> inverse(n, -1);
    for (int v : f.vertices) inverse[st.forest_map.map[v]] = v;
    auto free_count = [&](int cid) {
        return static_cast<int>(st.w_sets[kPairIndexOf(cid)][kSideOf(cid)].size());
    };
    int target = free_total / (2 * part.q);
    for (int round = 0; round < 2 * free_total + 8; ++round) {
        int lo = 0, hi = 0;
        for (int cid = 1; cid < 2 * part.q; ++cid) {
            if (free_count(cid) < free_count(lo)) lo = cid;
            if (free_count(cid) > free_count(hi)) hi = cid;
        }
        if (free_count(lo) >= target || free_count(hi) - free_count(lo) <= 1) break;
        // move one embedded vertex out of `lo`, onto a free vertex of `hi`
        auto& donors = part.pairs[kPairIndexOf(hi)][kSideOf(hi)];
        std::vector<int> starved_used;
        for (int u : part.pairs[kPairIndexOf(lo)][kSideOf(lo)])
            if (st.forest_map.used[u] && !special_host[u]) starved_used.push_back(u);
        rng.shuffle(starved_used);
        bool moved = false;
        for (int u : starved_used) {
            int tu = inverse[u];
            std::vector<int> images;
            for (int nb : f.adj[tu])
                if (st.forest_map.map[nb] != -1) images.push_back(st.forest_map.map[nb]);
            std::vector<int> cands;
            for (int v : donors)
                if (!st.forest_map.used[v] && !special_host[v]) {
                    bool ok = true;
                    for (int img : images)
                        if (!r2.has_edge(v, img)) {
                            ok = false;
                            break;
                        }
                    if (ok) cands.push_back(v);
                }
            if (cands.empty()) continue;
            int v = cands[rng.next_below(cands.size())];
            st.forest_map.unplace(tu);
            st.forest_map.place(tu, v);
            inverse[v] = tu;
            inverse[u] = -1;
            moved = true;
            break;
        }
        if (!moved) break;
        collect_sets();
    }
    collect_sets();
    return {true, "", used_total};
}

StageStatus stage_fix_endpoints(const Graph& g, const Graph& r3, Case2State& st,
                                std::uint64_t seed) {
    const int n = st.n;
    const int q = st.partition.q;
    Rng rng(derive_seed(seed, 0xf1));

    // split each W into an intermediate half and a new-endpoint half
    std::vector<std::vector<int>> half1(2 * q), half2(2 * q);
    for (int i = 0; i < q; ++i)
        for (int h = 0; h < 2; ++h) {
            auto pool = st.w_sets[i][h];
            rng.shuffle(pool);
            std::size_t mid = pool.size() / 2;
            half1[kClusterId(i, h)].assign(pool.begin(), pool.begin() + mid);
            half2[kClusterId(i, h)].assign(pool.begin() + mid, pool.end());
        }

    std::vector<char> consumed(n, 0);
    std::vector<std::array<std::vector<int>, 2>> new_x(q);
    int offset = static_cast<int>(rng.next_below(2 * q));

    for (std::size_t pi = 0; pi < st.pending.size(); ++pi) {
        PendingPath& p = st.pending[pi];
        int dest = (offset + static_cast<int>(pi)) % (2 * q);  // x' lands here

        auto relocate = [&](int endpoint, int dest_cluster) -> std::pair<int, int> {
            // host edge endpoint->w with w in the partner's first half, then an
            // edge of r3 (or the host) w->e' into the destination's second half
            int partner = kPartner(st.cluster_of[endpoint]);
            std::vector<int> ws = intersect_neighbors(g, endpoint, half1[partner], consumed);
            rng.shuffle(ws);
            std::vector<char> in_half2(st.n, 0);
            for (int v : half2[dest_cluster]) in_half2[v] = 1;
            for (int w : ws) {
                std::vector<int> cands;
                auto consider = [&](int e2) {
                    if (!consumed[e2] && in_half2[e2]) cands.push_back(e2);
                };
                for (int e2 : r3.neighbors(w)) consider(e2);
                for (int e2 : g.neighbors(w)) consider(e2);
                std::sort(cands.begin(), cands.end());
                cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
                if (!cands.empty()) {
                    int e2 = cands[rng.next_below(cands.size())];
                    consumed[w] = consumed[e2] = 1;
                    return {w, e2};
                }
            }
            return {-1, -1};
        };

        auto [wx, x2] = relocate(p.host_x, dest);
        if (x2 == -1)
            return {false,
                    "no bridging edge for pair " + std::to_string(pi) + " (x side), half sizes " +
                        std::to_string(half1[kPartner(st.cluster_of[p.host_x])].size()) + "/" +
                        std::to_string(half2[dest].size()),
                    0};
        auto [wy, y2] = relocate(p.host_y, kPartner(dest));
        if (y2 == -1)
            return {false,
                    "no bridging edge for pair " + std::to_string(pi) + " (y side), half sizes " +
                        std::to_string(half1[kPartner(st.cluster_of[p.host_y])].size()) + "/" +
                        std::to_string(half2[kPartner(dest)].size()),
                    0};

        p.bridge_x = wx;
        p.bridge_y = wy;
        p.host_x = x2;
        p.host_y = y2;
        p.home = kPairIndexOf(dest);
        // keep the invariant host_x in side 0, host_y in side 1 of the home pair
        if (kSideOf(dest) == 1) {
            std::swap(p.tree_u, p.tree_v);
            std::reverse(p.tree_interior.begin(), p.tree_interior.end());
            std::swap(p.host_x, p.host_y);
            std::swap(p.bridge_x, p.bridge_y);
        }
        new_x[p.home][0].push_back(p.host_x);
        new_x[p.home][1].push_back(p.host_y);
    }

    // all consumed vertices leave the free sets; new endpoints become X
    int consumed_count = 0;
    for (int v = 0; v < n; ++v) consumed_count += consumed[v];
    for (int i = 0; i < q; ++i)
        for (int h = 0; h < 2; ++h) erase_values(st.w_sets[i][h], consumed);
    st.x_sets = std::move(new_x);
    st.z.assign(q, {});
    for (std::size_t pi = 0; pi < st.pending.size(); ++pi)
        st.z[st.pending[pi].home].push_back(static_cast<int>(pi));
    st.k -= 4;

    if (2 * st.w_count() != (st.k - 1) * st.x_count())
        return {false, "size identity 2|W| = (k-1)|X| broken after k update", consumed_count};
    return {true, "", consumed_count};
}

AdjustmentLedger compute_adjustment_ledger(const Case2State& st) {
    const int q = st.partition.q;
    const int k = st.k;
    AdjustmentLedger led;
    led.m.resize(q);
    led.l_z.resize(q);
    led.l_w.resize(q);
    led.removals.resize(q);
    led.consumption.assign(2 * q, 0);

    double max_ratio = 1.0;
    for (int i = 0; i < q; ++i) {
        double zi = static_cast<double>(st.z[i].size());
        double w0 = static_cast<double>(st.w_sets[i][0].size());
        double w1 = static_cast<double>(st.w_sets[i][1].size());
        led.m[i] = std::min({zi, 2.0 * w0 / (k - 1), 2.0 * w1 / (k - 1)});
        led.l_z[i] = std::min({static_cast<int>(st.z[i].size()) / 2,
                               static_cast<int>(st.w_sets[i][0].size()) / (k - 1),
                               static_cast<int>(st.w_sets[i][1].size()) / (k - 1)});
        led.l_w[i] = ((k - 1) / 2) * led.l_z[i];
        led.removals[i] = static_cast<int>(st.z[i].size()) - led.l_z[i];
        for (int h = 0; h < 2; ++h) {
            if (w0 > 0 && w1 > 0 && zi > 0) {
                double ratio = ((k - 1) / 2.0) * zi / (h == 0 ? w0 : w1);
                max_ratio = std::max({max_ratio, ratio, 1.0 / ratio});
            }
        }
    }
    led.gamma = 1.0 / (3.0 * max_ratio * max_ratio);

    // pools: what each cluster must shed; seconds / second-lasts feasibility
    std::vector<int> pool(2 * q, 0);
    for (int i = 0; i < q; ++i)
        for (int h = 0; h < 2; ++h)
            pool[kClusterId(i, h)] = static_cast<int>(st.w_sets[i][h].size()) - led.l_w[i];
    led.feasible = true;
    for (int i = 0; i < q; ++i)
        if (pool[kClusterId(i, 0)] < led.removals[i] || pool[kClusterId(i, 1)] < led.removals[i])
            led.feasible = false;

    led.gamma_ok = true;
    for (int i = 0; i < q; ++i) {
        for (int h = 0; h < 2; ++h) {
            double wsz = static_cast<double>(st.w_sets[i][h].size());
            double xsz = static_cast<double>(st.x_sets[i][h].size());
            if (wsz > 0 && pool[kClusterId(i, h)] > (1.0 - led.gamma) * wsz + 1e-9)
                led.gamma_ok = false;
            if (xsz > 0 && led.removals[i] > (1.0 - led.gamma) * xsz + 1e-9) led.gamma_ok = false;
        }
    }
    if (!led.feasible) return led;

    // build the template multiset: per removal, second from W_(i,2) and
    // second-last from W_(i,1); free middles go to the cluster with the most
    // residual capacity
    std::vector<int> assigned(2 * q, 0);
    for (int i = 0; i < q; ++i) {
        assigned[kClusterId(i, 1)] += led.removals[i];  // seconds
        assigned[kClusterId(i, 0)] += led.removals[i];  // second-lasts
    }
    std::map<std::vector<int>, int> multiset;
    for (int i = 0; i < q; ++i) {
        for (int r = 0; r < led.removals[i]; ++r) {
            std::vector<int> trace;
            trace.push_back(kClusterId(i, 0));  // X_(i,1) end
            trace.push_back(kClusterId(i, 1));  // second
            for (int j = 0; j < k - 3; ++j) {
                int best = -1, best_rc = -1;
                for (int c = 0; c < 2 * q; ++c) {
                    int rc = pool[c] - assigned[c];
                    if (rc > best_rc) {
                        best_rc = rc;
                        best = c;
                    }
                }
                assigned[best]++;
                trace.push_back(best);
            }
            trace.push_back(kClusterId(i, 0));  // second-last
            trace.push_back(kClusterId(i, 1));  // X_(i,2) end
            // positions: [x-end, w_1 .. w_{k-1}, y-end]; reorder middles so the
            // trace reads w_1 = second, free middles, w_{k-1} = second-last
            std::vector<int> ordered;
            ordered.push_back(trace[0]);
            ordered.push_back(trace[1]);
            for (int j = 0; j < k - 3; ++j) ordered.push_back(trace[2 + j]);
            ordered.push_back(trace[2 + (k - 3)]);
            ordered.push_back(trace.back());
            multiset[ordered]++;
        }
    }
    for (auto& [trace, count] : multiset) led.templates.emplace_back(trace, count);
    for (int c = 0; c < 2 * q; ++c) led.consumption[c] = pool[c];
    return led;
}

namespace {

// maximum bipartite matching between two small vertex lists under an edge
// predicate; returns match indices right-side -> left index or -1
template <typename EdgeFn>
std::vector<int> small_max_matching(int left, int right, EdgeFn edge) {
    std::vector<int> match_r(right, -1), match_l(left, -1);
    std::vector<char> visited(right, 0);
    std::function<bool(int)> augment = [&](int l) -> bool {
        for (int r = 0; r < right; ++r) {
            if (visited[r] || !edge(l, r)) continue;
            visited[r] = 1;
            if (match_r[r] == -1 || augment(match_r[r])) {
                match_r[r] = l;
                match_l[l] = r;
                return true;
            }
        }
        return false;
    };
    for (int l = 0; l < left; ++l) {
        std::fill(visited.begin(), visited.end(), 0);
        augment(l);
    }
    return match_r;
}

}  // namespace

TemplatePathsResult find_template_paths(const std::vector<std::pair<int, int>>& pairs,
                                        const std::vector<std::vector<int>>& slots,
                                        const Graph& g, const Graph& r4, double delta, double xi,
                                        int desired, std::uint64_t seed) {
    TemplatePathsResult result;
    const int hops = static_cast<int>(slots.size());  // k-1 slot sets
    if (hops < 1 || desired <= 0) return result;
    Rng rng(derive_seed(seed, 0xad));
    const int n = g.vertex_count();
    std::vector<char> used(n, 0);
    std::vector<char> pair_done(pairs.size(), 0);

    auto remaining_slot = [&](int j) {
        std::vector<int> s;
        for (int v : slots[j])
            if (!used[v]) s.push_back(v);
        return s;
    };

    const int max_rounds = 4;
    for (int round = 0; round < max_rounds && static_cast<int>(result.paths.size()) < desired;
         ++round) {
        std::vector<std::vector<int>> cur(hops);
        for (int j = 0; j < hops; ++j) {
            cur[j] = remaining_slot(j);
            rng.shuffle(cur[j]);
        }
        // chains through consecutive-slot maximum matchings in r4 (host edges
        // are also admitted; on dense hosts they carry the hop for free)
        std::vector<std::vector<int>> next_of(hops - 1);
        for (int j = 0; j + 1 < hops; ++j) {
            auto match_r = small_max_matching(
                static_cast<int>(cur[j].size()), static_cast<int>(cur[j + 1].size()),
                [&](int l, int r) {
                    return r4.has_edge(cur[j][l], cur[j + 1][r]) ||
                           g.has_edge(cur[j][l], cur[j + 1][r]);
                });
            next_of[j].assign(cur[j].size(), -1);
            int msize = 0;
            for (int r = 0; r < static_cast<int>(match_r.size()); ++r)
                if (match_r[r] != -1) {
                    next_of[j][match_r[r]] = r;
                    ++msize;
                }
            int smaller = static_cast<int>(std::min(cur[j].size(), cur[j + 1].size()));
            double theta = hops > 1 ? delta * xi * smaller / std::max(1, hops - 1) : 0.0;
            if (msize <= smaller - std::max(1.0, theta) && smaller > 0)
                result.matching_bound_ok = false;
        }
        std::vector<std::vector<int>> chains;  // full chains as vertex sequences
        for (int s0 = 0; s0 < static_cast<int>(cur[0].size()); ++s0) {
            std::vector<int> chain{cur[0][s0]};
            int pos = s0;
            bool full = true;
            for (int j = 0; j + 1 < hops; ++j) {
                int nxt = next_of[j][pos];
                if (nxt == -1) {
                    full = false;
                    break;
                }
                chain.push_back(cur[j + 1][nxt]);
                pos = nxt;
            }
            if (full) chains.push_back(std::move(chain));
        }
        // assign pairs to chains (ends must see x resp. y in g)
        std::vector<int> open_pairs;
        for (std::size_t p = 0; p < pairs.size(); ++p)
            if (!pair_done[p]) open_pairs.push_back(static_cast<int>(p));
        auto chain_of_pair = small_max_matching(
            static_cast<int>(open_pairs.size()), static_cast<int>(chains.size()),
            [&](int l, int r) {
                const auto& [x, y] = pairs[open_pairs[l]];
                return g.has_edge(x, chains[r].front()) && g.has_edge(y, chains[r].back());
            });
        std::vector<int> pair_to_chain(open_pairs.size(), -1);
        for (int r = 0; r < static_cast<int>(chain_of_pair.size()); ++r)
            if (chain_of_pair[r] != -1) pair_to_chain[chain_of_pair[r]] = r;
        for (std::size_t l = 0; l < open_pairs.size(); ++l) {
            if (static_cast<int>(result.paths.size()) >= desired) break;
            if (pair_to_chain[l] == -1) continue;
            int p = open_pairs[l];
            const auto& chain = chains[pair_to_chain[l]];
            std::vector<int> path{pairs[p].first};
            path.insert(path.end(), chain.begin(), chain.end());
            path.push_back(pairs[p].second);
            for (int v : chain) used[v] = 1;
            pair_done[p] = 1;
            result.pair_ids.push_back(p);
            result.paths.push_back(std::move(path));
        }
    }

    // last resort: per-pair randomized DFS through the remaining slot vertices
    if (static_cast<int>(result.paths.size()) < desired) {
        for (std::size_t p = 0; p < pairs.size() && static_cast<int>(result.paths.size()) < desired;
             ++p) {
            if (pair_done[p]) continue;
            const auto& [x, y] = pairs[p];
            std::vector<int> stack_path;
            long budget = 20000;
            std::function<bool(int, int)> dfs = [&](int j, int prev) -> bool {
                if (--budget < 0) return false;
                if (j == hops)
                    return g.has_edge(prev, y);
                std::vector<int> cands;
                for (int v : slots[j])
                    if (!used[v] && (j == 0 ? g.has_edge(x, v)
                                            : r4.has_edge(prev, v) || g.has_edge(prev, v)))
                        cands.push_back(v);
                rng.shuffle(cands);
                for (int v : cands) {
                    used[v] = 1;
                    stack_path.push_back(v);
                    if (dfs(j + 1, v)) return true;
                    used[v] = 0;
                    stack_path.pop_back();
                }
                return false;
            };
            if (dfs(0, -1)) {
                std::vector<int> path{x};
                path.insert(path.end(), stack_path.begin(), stack_path.end());
                path.push_back(y);
                pair_done[p] = 1;
                result.pair_ids.push_back(static_cast<int>(p));
                result.paths.push_back(std::move(path));
            }
        }
    }
    return result;
}

StageStatus stage_adjust_clusters(const Graph& g, const Graph& r4, Case2State& st,
                                  std::uint64_t seed, double xi, AdjustmentLedger* ledger_out) {
    const int q = st.partition.q;
    const int k = st.k;
    AdjustmentLedger led = compute_adjustment_ledger(st);
    if (ledger_out) *ledger_out = led;
    if (!led.feasible)
        return {false, "ledger infeasible: second/second-last supply short", 0};
    if (!led.gamma_ok) return {false, "ledger gamma bound violated", 0};

    Rng rng(derive_seed(seed, 0xf2));
    const int n = st.n;
    std::vector<char> used(n, 0);

    // remaining planned consumption per cluster; slack above it stays free
    std::vector<int> demand = led.consumption;
    int consumed_total = 0;

    // realize templates, largest first
    std::vector<std::pair<std::vector<int>, int>> templates = led.templates;
    std::sort(templates.begin(), templates.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });

    for (const auto& [trace, count] : templates) {
        const int home = kPairIndexOf(trace.front());
        // candidate pairs: everything still pending at this home index
        std::vector<std::pair<int, int>> cand_pairs;
        std::vector<int> cand_ids;
        for (int pid : st.z[home]) {
            cand_pairs.emplace_back(st.pending[pid].host_x, st.pending[pid].host_y);
            cand_ids.push_back(pid);
        }
        // slot allocation: demand plus a proportional share of the cluster's slack
        std::vector<int> mult(2 * q, 0);
        for (int j = 1; j < k; ++j) mult[trace[j]]++;
        std::vector<std::vector<int>> slots(k - 1);
        std::vector<std::vector<int>> drawn(2 * q);
        for (int c = 0; c < 2 * q; ++c) {
            if (mult[c] == 0) continue;
            int need = mult[c] * count;
            auto& w = st.w_sets[kPairIndexOf(c)][kSideOf(c)];
            std::vector<int> avail;
            for (int v : w)
                if (!used[v]) avail.push_back(v);
            int slack = static_cast<int>(avail.size()) - demand[c];
            int extra = demand[c] > 0 ? static_cast<int>(
                            static_cast<long long>(std::max(0, slack)) * need / demand[c])
                                      : 0;
            int take = std::min<int>(static_cast<int>(avail.size()), need + extra);
            rng.shuffle(avail);
            drawn[c].assign(avail.begin(), avail.begin() + take);
        }
        std::vector<int> cursor(2 * q, 0);
        for (int j = 1; j < k; ++j) {
            int c = trace[j];
            int share = static_cast<int>(drawn[c].size()) / mult[c];
            int from = cursor[c];
            int to = std::min<int>(from + share, static_cast<int>(drawn[c].size()));
            slots[j - 1].assign(drawn[c].begin() + from, drawn[c].begin() + to);
            cursor[c] = to;
        }

        auto found = find_template_paths(cand_pairs, slots, g, r4, st.partition.params.delta, xi,
                                         count, derive_seed(seed, 0xf3, consumed_total));
        if (static_cast<int>(found.paths.size()) < count)
            return {false,
                    "template realization short: found " + std::to_string(found.paths.size()) +
                        " of " + std::to_string(count) + " at home " + std::to_string(home),
                    consumed_total};
        // apply: record middles, consume vertices, retire pairs
        std::vector<char> retire(st.pending.size(), 0);
        for (std::size_t a = 0; a < found.paths.size(); ++a) {
            int pid = cand_ids[found.pair_ids[a]];
            const auto& path = found.paths[a];
            st.pending[pid].host_middle.assign(path.begin() + 1, path.end() - 1);
            for (std::size_t j = 1; j + 1 < path.size(); ++j) {
                used[path[j]] = 1;
                ++consumed_total;
            }
            retire[pid] = 1;
            consumed_total += 2;  // the pair's endpoints leave X
        }
        for (int c = 0; c < 2 * q; ++c)
            if (mult[c] > 0) demand[c] -= mult[c] * count;
        auto& zh = st.z[home];
        zh.erase(std::remove_if(zh.begin(), zh.end(), [&](int pid) { return retire[pid] != 0; }),
                 zh.end());
        // drop retired endpoints from X
        for (std::size_t pid = 0; pid < st.pending.size(); ++pid) {
            if (!retire[pid]) continue;
            auto& x0 = st.x_sets[home][0];
            auto& x1 = st.x_sets[home][1];
            x0.erase(std::remove(x0.begin(), x0.end(), st.pending[pid].host_x), x0.end());
            x1.erase(std::remove(x1.begin(), x1.end(), st.pending[pid].host_y), x1.end());
        }
    }

    for (int i = 0; i < q; ++i)
        for (int h = 0; h < 2; ++h) erase_values(st.w_sets[i][h], used);

    // exact balance per cluster
    for (int i = 0; i < q; ++i) {
        if (static_cast<int>(st.z[i].size()) != led.l_z[i])
            return {false, "post-adjust |Z| mismatch at pair " + std::to_string(i), consumed_total};
        for (int h = 0; h < 2; ++h) {
            if (static_cast<int>(st.w_sets[i][h].size()) != led.l_w[i])
                return {false, "post-adjust |W| mismatch at pair " + std::to_string(i),
                        consumed_total};
            if (2 * static_cast<int>(st.w_sets[i][h].size()) !=
                (k - 1) * static_cast<int>(st.x_sets[i][h].size()))
                return {false, "balance identity broken at pair " + std::to_string(i),
                        consumed_total};
        }
    }
    return {true, "", consumed_total};
}

namespace {

// exact backtracking search threading every remaining pair of one cluster pair
// through alternating free sets, consuming all of them; the per-pair path
// enumeration continues into the next pair, so the whole product space is
// explored (up to the node budget)
struct CyclePacker {
    const Graph& g;
    int k;
    std::vector<std::pair<int, int>> endpoints;  // (x,y) per pair
    std::vector<int> s1, s2;                     // free vertices, sides 1 resp. 2
    std::vector<char> used;                      // indexed into s1/s2 via offset
    std::vector<std::vector<int>> found;         // middles per pair, aligned with endpoints
    long budget = 0;
    Rng* rng = nullptr;

    bool assign(std::size_t pair_idx) {
        if (pair_idx == endpoints.size()) return true;
        auto [x, y] = endpoints[pair_idx];
        std::vector<int> path;
        std::function<bool(int, int)> dfs = [&](int pos, int prev) -> bool {
            if (--budget < 0) return false;
            if (pos == k) {
                if (!g.has_edge(prev, y)) return false;
                found[pair_idx] = path;
                return assign(pair_idx + 1);  // continue; false backtracks into us
            }
            auto& side = (pos % 2 == 1) ? s1 : s2;
            int offset = (pos % 2 == 1) ? 0 : static_cast<int>(s1.size());
            std::vector<int> cand;
            for (std::size_t idx = 0; idx < side.size(); ++idx)
                if (!used[offset + idx] && g.has_edge(pos == 1 ? x : prev, side[idx]))
                    cand.push_back(static_cast<int>(idx));
            rng->shuffle(cand);
            for (int idx : cand) {
                used[offset + idx] = 1;
                path.push_back(side[idx]);
                if (dfs(pos + 1, side[idx])) return true;
                used[offset + idx] = 0;
                path.pop_back();
                if (budget < 0) return false;
            }
            return false;
        };
        return dfs(1, x);
    }
};

}  // namespace

StageStatus stage_complete_cycles(const Graph& g, Case2State& st, std::uint64_t seed) {
    const int q = st.partition.q;
    const int k = st.k;
    if (k % 2 == 0) return {false, "k must be odd for cycle completion", 0};
    Rng order_rng(derive_seed(seed, 0xf4));
    int consumed_total = 0;

    for (int i = 0; i < q; ++i) {
        int nz = static_cast<int>(st.z[i].size());
        // S^1 = W_(i,2), S^2 = W_(i,1)
        auto& s1 = st.w_sets[i][1];
        auto& s2 = st.w_sets[i][0];
        if (nz == 0) {
            if (!s1.empty() || !s2.empty())
                return {false, "pair " + std::to_string(i) + " has free vertices but no pairs", 0};
            continue;
        }
        if (static_cast<int>(s1.size()) != ((k - 1) / 2) * nz ||
            static_cast<int>(s2.size()) != ((k - 1) / 2) * nz)
            return {false, "pair " + std::to_string(i) + " unbalanced before completion", 0};

        bool done = false;
        for (int attempt = 0; attempt < 6 && !done; ++attempt) {
            Rng attempt_rng(derive_seed(seed, 0xf5, i, attempt));
            CyclePacker packer{g, k, {}, s1, s2, {}, {}, 1500000, &attempt_rng};
            std::vector<int> order(st.z[i].begin(), st.z[i].end());
            // most constrained pair first: fewest endpoint neighbours inside
            auto endpoint_options = [&](int pid) {
                int cx = 0, cy = 0;
                for (int v : s1)
                    if (g.has_edge(st.pending[pid].host_x, v)) ++cx;
                for (int v : s2)
                    if (g.has_edge(st.pending[pid].host_y, v)) ++cy;
                return std::min(cx, cy);
            };
            std::vector<std::pair<int, int>> keyed;
            for (int pid : order) keyed.emplace_back(endpoint_options(pid), pid);
            std::sort(keyed.begin(), keyed.end());
            order.clear();
            for (auto [key, pid] : keyed) order.push_back(pid);
            for (int pid : order)
                packer.endpoints.emplace_back(st.pending[pid].host_x, st.pending[pid].host_y);
            packer.used.assign(s1.size() + s2.size(), 0);
            packer.found.resize(order.size());
            if (packer.assign(0)) {
                for (std::size_t a = 0; a < order.size(); ++a)
                    st.pending[order[a]].host_middle = packer.found[a];
                done = true;
            }
        }
        if (!done)
            return {false, "cycle packing failed at pair " + std::to_string(i), consumed_total};
        consumed_total += static_cast<int>(s1.size() + s2.size()) + 2 * nz;
        s1.clear();
        s2.clear();
        st.x_sets[i][0].clear();
        st.x_sets[i][1].clear();
    }
    (void)order_rng;
    return {true, "", consumed_total};
}

bool validate_special_paths(const Graph& g, const Case2State& st) {
    // each pending path must alternate the home pair's clusters and use host edges
    for (const auto& p : st.pending) {
        if (p.host_middle.empty()) return false;
        int prev = p.host_x;
        for (int v : p.host_middle) {
            if (!g.has_edge(prev, v)) return false;
            prev = v;
        }
        if (!g.has_edge(prev, p.host_y)) return false;
    }
    return true;
}

namespace {

StageRecord record(const std::string& name, const StageStatus& status) {
    return {name, status.ok, status.detail, status.consumed};
}

}  // namespace

std::string TrialReport::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    j["alpha"] = alpha;
    j["delta_max"] = delta_max;
    j["k"] = k;
    j["c"] = c;
    j["phase_split"] = phase_split;
    j["seed"] = seed;
    j["case"] = case_taken;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : stages)
        j["stages"].push_back({{"name", s.name},
                               {"ok", s.ok},
                               {"detail", s.detail},
                               {"consumed", s.consumed}});
    j["rho"] = rho;
    j["q"] = q;
    j["success"] = success;
    j["validated"] = validated;
    j["wall_ms"] = wall_ms;
    return j.dump();
}

EmbedOutcome embed_spanning_tree(const Tree& t, const Graph& host, const PerturbationPlan& plan,
                                 const PipelineConfig& cfg, std::uint64_t seed) {
    auto t0 = std::chrono::steady_clock::now();
    const int n = t.vertex_count();
    EmbedOutcome out;
    TrialReport& rep = out.report;
    rep.n = n;
    rep.alpha = cfg.alpha;
    rep.delta_max = cfg.delta_max;
    rep.k = cfg.k;
    rep.c = cfg.c;
    rep.phase_split = cfg.phase_split;
    rep.seed = seed;

    auto finish = [&](std::optional<Embedding> emb) {
        if (emb) {
            Graph validation = host;
            for (int ph = 0; ph < 4; ++ph)
                validation = graph_union(validation, plan.sample_phase(ph, n));
            auto verdict = verify_embedding(Forest::from_tree(t), validation, *emb);
            bool spanning = std::all_of(emb->used.begin(), emb->used.end(),
                                        [](char u) { return u != 0; });
            rep.validated = verdict.ok && spanning;
            rep.success = rep.validated;
            if (rep.success) out.embedding = std::move(emb);
            if (!verdict.ok) rep.stages.push_back({"validate", false, verdict.violation, 0});
            if (!spanning) rep.stages.push_back({"validate", false, "embedding not spanning", 0});
        }
        rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                t0)
                          .count();
        return std::move(out);
    };

    if (host.vertex_count() != n) {
        rep.stages.push_back({"precheck", false, "host and tree sizes differ", 0});
        return finish(std::nullopt);
    }
    if (n == 1) {
        rep.case_taken = "case1";
        Embedding emb(1, 1);
        emb.place(0, 0);
        rep.stages.push_back({"trivial", true, "", 1});
        return finish(std::move(emb));
    }
    if (min_degree(host) + 1e-9 < cfg.alpha * n) {
        rep.stages.push_back({"precheck", false, "host min degree below alpha*n", 0});
        return finish(std::nullopt);
    }
    if (t.max_degree() > cfg.delta_max) {
        rep.stages.push_back({"precheck", false, "tree max degree above bound", 0});
        return finish(std::nullopt);
    }

    std::int64_t retry_budget = static_cast<std::int64_t>(cfg.retry_factor * n);
    int leaves = count_leaves(t);
    if (leaves >= cfg.lambda * n) {
        rep.case_taken = "case1";
        auto res = complete_case1(t, host, plan, cfg.lambda, retry_budget, derive_seed(seed, 0xc1));
        if (!res.embedding) {
            rep.stages.push_back({res.failed_stage, false,
                                  res.failed_stage == "almost_spanning"
                                      ? "stuck subtree " + std::to_string(res.stuck_subtree_size)
                                      : "hall condition failed",
                                  0});
            return finish(std::nullopt);
        }
        rep.stages.push_back({"case1", true, "", n});
        return finish(std::move(*res.embedding));
    }

    rep.case_taken = "case2";
    if (cfg.k < 9 || cfg.k % 2 == 0) {
        rep.stages.push_back({"precheck", false, "k must be odd and >= 9", 0});
        return finish(std::nullopt);
    }

    int target_cluster = cfg.target_cluster_size > 0 ? cfg.target_cluster_size : std::max(8, n / 4);
    auto part = build_partition(host, cfg.alpha, target_cluster, cfg.reg, derive_seed(seed, 0xc2),
                                cfg.alpha_prime, cfg.parallel_cert);
    if (!part.partition) {
        rep.stages.push_back({"partition", false, part.failed_step, 0});
        return finish(std::nullopt);
    }
    rep.rho = part.partition->rho;
    rep.q = part.partition->q;
    rep.stages.push_back({"partition", true, "q=" + std::to_string(part.partition->q), 0});

    auto decomp_all = extract_bare_paths(t, cfg.k);
    int p_target = n / (2 * (cfg.k - 1));
    if (p_target < 1 || static_cast<int>(decomp_all.paths.size()) < p_target) {
        rep.stages.push_back({"bare_paths", false,
                              "have " + std::to_string(decomp_all.paths.size()) + ", need " +
                                  std::to_string(p_target),
                              0});
        return finish(std::nullopt);
    }
    auto decomp = take_paths(t, decomp_all, p_target);
    rep.stages.push_back({"bare_paths", true, std::to_string(p_target) + " paths", 0});

    Case2State st;
    st.k = cfg.k;
    Graph embed_graph = graph_union(host, plan.sample_phase(1, n));
    auto s1 = stage_embed_forest(t, decomp, embed_graph, *part.partition, st,
                                 derive_seed(seed, 0xc3), retry_budget);
    rep.stages.push_back(record("embed_forest", s1));
    if (!s1.ok) return finish(std::nullopt);

    Graph r3 = plan.sample_phase(2, n);
    auto s2 = stage_fix_endpoints(host, r3, st, derive_seed(seed, 0xc4));
    rep.stages.push_back(record("fix_endpoints", s2));
    if (!s2.ok) return finish(std::nullopt);

    Graph r4 = plan.sample_phase(3, n);
    AdjustmentLedger ledger;
    auto s3 = stage_adjust_clusters(host, r4, st, derive_seed(seed, 0xc5), cfg.xi, &ledger);
    rep.stages.push_back(record("adjust_clusters", s3));
    if (!s3.ok) return finish(std::nullopt);

    auto s4 = stage_complete_cycles(host, st, derive_seed(seed, 0xc6));
    rep.stages.push_back(record("complete_cycles", s4));
    if (!s4.ok) return finish(std::nullopt);

    // assemble: forest map plus, per bare path, the chain
    // bridge_x, host_x, middles, host_y, bridge_y in tree order u -> v
    Embedding emb = st.forest_map;
    bool assembly_ok = true;
    for (const auto& p : st.pending) {
        std::vector<int> chain;
        chain.push_back(p.bridge_x);
        chain.push_back(p.host_x);
        chain.insert(chain.end(), p.host_middle.begin(), p.host_middle.end());
        chain.push_back(p.host_y);
        chain.push_back(p.bridge_y);
        if (chain.size() != p.tree_interior.size()) {
            assembly_ok = false;
            break;
        }
        for (std::size_t j = 0; j < chain.size(); ++j)
            if (!emb.place(p.tree_interior[j], chain[j])) {
                assembly_ok = false;
                break;
            }
        if (!assembly_ok) break;
    }
    if (!assembly_ok) {
        rep.stages.push_back({"assemble", false, "chain length or occupancy mismatch", 0});
        return finish(std::nullopt);
    }
    rep.stages.push_back({"assemble", true, "", 0});
    return finish(std::move(emb));
}

}  // namespace perturb
