#include "doctest.h"
#include "perturb/harness.hpp"
#include "perturb/pipeline.hpp"
#include "perturb/rng.hpp"

#include <algorithm>
#include <functional>
#include <set>

using namespace perturb;

namespace {

Tree spanning_star(int n) {
    std::vector<int> parent(n, 0);
    parent[0] = -1;
    return Tree(std::move(parent));
}

PipelineConfig easy_config() {
    PipelineConfig cfg;
    cfg.alpha = 0.35;
    cfg.delta_max = 3;
    cfg.lambda = 0.15;
    cfg.k = 9;
    cfg.c = 60.0;
    cfg.reg = RegularityParams{0.25, 0.15, 400};
    return cfg;
}

// brute force: is there an x..y path of exactly k edges alternating s1/s2,
// vertex-disjoint inside, using host edges?
bool path_exists_oracle(const Graph& g, int x, int y, int k, const std::vector<int>& s1,
                        const std::vector<int>& s2) {
    std::set<int> used;
    std::function<bool(int, int)> dfs = [&](int pos, int prev) -> bool {
        if (pos == k) return g.has_edge(prev, y);
        const auto& side = (pos % 2 == 1) ? s1 : s2;
        for (int v : side) {
            if (used.count(v)) continue;
            if (!g.has_edge(pos == 1 ? x : prev, v)) continue;
            used.insert(v);
            if (dfs(pos + 1, v)) return true;
            used.erase(v);
        }
        return false;
    };
    return dfs(1, x);
}

}  // namespace

TEST_CASE("dispatch: many leaves takes case 1, a path takes case 2") {
    int n = 80;
    Graph host = generate_gnp(n, 1.0, 1);
    PerturbationPlan plan = PerturbationPlan::from_c(20.0, {0.25, 0.25, 0.25, 0.25}, n, 2);
    PipelineConfig cfg = easy_config();
    cfg.delta_max = n;  // the star needs unbounded degree
    auto star = embed_spanning_tree(spanning_star(n), host, plan, cfg, 3);
    CHECK(star.report.case_taken == "case1");
    CHECK(star.report.success);

    cfg = easy_config();
    cfg.delta_max = 3;
    Tree path = generate_bounded_tree(n, 2, TreeShape::path, 1);
    auto res = embed_spanning_tree(path, host, plan, cfg, 4);
    CHECK(res.report.case_taken == "case2");
}

TEST_CASE("complete host: case 2 succeeds even with c = 0") {
    int n = 120;
    Graph host = generate_gnp(n, 1.0, 1);
    PerturbationPlan plan = PerturbationPlan::from_c(0.0, {0.25, 0.25, 0.25, 0.25}, n, 2);
    PipelineConfig cfg = easy_config();
    Tree path = generate_bounded_tree(n, 2, TreeShape::path, 1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto res = embed_spanning_tree(path, host, plan, cfg, seed);
        CHECK(res.report.case_taken == "case2");
        CHECK(res.report.success);
        REQUIRE(res.embedding.has_value());
        // spanning and edge-preserving, re-checked here
        auto verdict = verify_embedding(Forest::from_tree(path), host, *res.embedding);
        CHECK(verdict.ok);
    }
}

TEST_CASE("stage accounting: consumption plus free vertices covers [n] exactly") {
    int n = 120;
    Graph host = generate_gnp(n, 1.0, 1);
    PerturbationPlan plan = PerturbationPlan::from_c(0.0, {0.25, 0.25, 0.25, 0.25}, n, 2);
    PipelineConfig cfg = easy_config();
    Tree path = generate_bounded_tree(n, 2, TreeShape::path, 1);
    auto res = embed_spanning_tree(path, host, plan, cfg, 11);
    REQUIRE(res.report.success);
    // every host vertex is used exactly once by the final embedding
    std::vector<int> count(n, 0);
    for (int v = 0; v < n; ++v) {
        int h = res.embedding->map[v];
        REQUIRE(h >= 0);
        count[h]++;
    }
    CHECK(std::all_of(count.begin(), count.end(), [](int c) { return c == 1; }));
    // preimage degree sequence matches the tree
    CHECK(res.report.validated);
}

TEST_CASE("adjustment ledger arithmetic example") {
    // |Z_i| = 10, |W_(i,1)| = 30, |W_(i,2)| = 33, k = 7
    Case2State st;
    st.n = 200;
    st.k = 7;
    st.partition.q = 1;
    st.partition.pairs.resize(1);
    st.x_sets.assign(1, {});
    st.w_sets.assign(1, {});
    st.z.assign(1, {});
    st.pending.resize(10);
    for (int i = 0; i < 10; ++i) {
        st.z[0].push_back(i);
        st.x_sets[0][0].push_back(i);
        st.x_sets[0][1].push_back(100 + i);
    }
    for (int i = 0; i < 30; ++i) st.w_sets[0][0].push_back(20 + i);
    for (int i = 0; i < 33; ++i) st.w_sets[0][1].push_back(120 + i);
    auto led = compute_adjustment_ledger(st);
    CHECK(led.m[0] == doctest::Approx(10.0));
    CHECK(led.l_z[0] == 5);
    CHECK(led.l_w[0] == 15);
    CHECK(led.removals[0] == 5);
}

TEST_CASE("ledger arithmetic on balanced clusters") {
    // |Z| = 4, k = 5, |W| = 8 per side: m = 4, half the pairs stay
    Case2State st;
    st.n = 100;
    st.k = 5;
    st.partition.q = 1;
    st.partition.pairs.resize(1);
    st.partition.params = RegularityParams{0.25, 0.15, 200};
    st.x_sets.assign(1, {});
    st.w_sets.assign(1, {});
    st.z.assign(1, {});
    st.pending.resize(4);
    for (int i = 0; i < 4; ++i) {
        st.z[0].push_back(i);
        st.pending[i].host_x = i;
        st.pending[i].host_y = 50 + i;
        st.x_sets[0][0].push_back(i);
        st.x_sets[0][1].push_back(50 + i);
    }
    for (int i = 0; i < 8; ++i) st.w_sets[0][0].push_back(10 + i);
    for (int i = 0; i < 8; ++i) st.w_sets[0][1].push_back(60 + i);
    auto led = compute_adjustment_ledger(st);
    CHECK(led.removals[0] == 2);  // floor(4/2) leaves 2, so 2 are removed
    // with |Z|=4: m = min(4, 4, 4) = 4, l_z = 2, l_w = 4
    CHECK(led.l_z[0] == 2);
    CHECK(led.l_w[0] == 4);
}

TEST_CASE("find_template_paths on complete clusters finds everything") {
    // host: X = {0,1,2}, Y = {10,11,12}, two slots of 5, complete edges
    std::vector<std::pair<int, int>> edges;
    std::vector<int> s1{20, 21, 22, 23, 24}, s2{30, 31, 32, 33, 34};
    for (int x : {0, 1, 2})
        for (int v : s1) edges.emplace_back(x, v);
    for (int y : {10, 11, 12})
        for (int v : s2) edges.emplace_back(y, v);
    for (int a : s1)
        for (int b : s2) edges.emplace_back(a, b);
    Graph g = Graph::from_edges(40, edges);
    Graph r4 = generate_gnp(40, 0.0, 1);
    std::vector<std::pair<int, int>> pairs{{0, 10}, {1, 11}, {2, 12}};
    auto res = find_template_paths(pairs, {s1, s2}, g, r4, 0.3, 0.1, 3, 7);
    CHECK(res.paths.size() == 3);
    std::set<int> used;
    for (const auto& p : res.paths) {
        CHECK(p.size() == 4);  // x, w1, w2, y
        for (std::size_t i = 0; i + 1 < p.size(); ++i) CHECK(g.has_edge(p[i], p[i + 1]));
        for (int v : p) CHECK(used.insert(v).second);
    }
}

TEST_CASE("complete tripartite blow-up: two disjoint 3-cycles, one per pair") {
    // k = 3, nZ = 2: S^1 = {4,5}, S^2 = {6,7}; complete between consecutive sets
    Case2State st;
    st.n = 8;
    st.k = 3;
    st.partition.q = 1;
    st.partition.pairs.resize(1);
    st.x_sets.assign(1, {});
    st.w_sets.assign(1, {});
    st.z.assign(1, {0, 1});
    st.pending.resize(2);
    st.pending[0].host_x = 0;
    st.pending[0].host_y = 2;
    st.pending[1].host_x = 1;
    st.pending[1].host_y = 3;
    st.x_sets[0][0] = {0, 1};
    st.x_sets[0][1] = {2, 3};
    st.w_sets[0][1] = {4, 5};  // S^1 = W_(i,2)
    st.w_sets[0][0] = {6, 7};  // S^2 = W_(i,1)
    std::vector<std::pair<int, int>> edges;
    for (int x : {0, 1})
        for (int v : {4, 5}) edges.emplace_back(x, v);
    for (int v : {4, 5})
        for (int w : {6, 7}) edges.emplace_back(v, w);
    for (int w : {6, 7})
        for (int y : {2, 3}) edges.emplace_back(w, y);
    Graph g = Graph::from_edges(8, edges);
    auto status = stage_complete_cycles(g, st, 5);
    CHECK(status.ok);
    std::set<int> used;
    for (int pid : {0, 1}) {
        const auto& p = st.pending[pid];
        CHECK(p.host_middle.size() == 2);
        CHECK(g.has_edge(p.host_x, p.host_middle[0]));
        CHECK(g.has_edge(p.host_middle[0], p.host_middle[1]));
        CHECK(g.has_edge(p.host_middle[1], p.host_y));
        for (int v : p.host_middle) CHECK(used.insert(v).second);
    }
}

TEST_CASE("single special pair: packing agrees with a brute-force path oracle") {
    Rng rng(404);
    int agreements = 0;
    for (int rep = 0; rep < 60; ++rep) {
        // nZ = 1, k = 5: S1 and S2 of size 2 each, random edges
        std::vector<int> s1{4, 5}, s2{6, 7};
        std::vector<std::pair<int, int>> edges;
        auto maybe = [&](int a, int b) {
            if (rng.next_bernoulli(0.55)) edges.emplace_back(a, b);
        };
        for (int v : s1) maybe(0, v);
        for (int v : s1)
            for (int w : s2) maybe(v, w);
        for (int w : s2) maybe(w, 1);
        Graph g = Graph::from_edges(8, edges);
        bool oracle = path_exists_oracle(g, 0, 1, 5, s1, s2);

        Case2State st;
        st.n = 8;
        st.k = 5;
        st.partition.q = 1;
        st.partition.pairs.resize(1);
        st.x_sets.assign(1, {});
        st.w_sets.assign(1, {});
        st.z.assign(1, {0});
        st.pending.resize(1);
        st.pending[0].host_x = 0;
        st.pending[0].host_y = 1;
        st.x_sets[0][0] = {0};
        st.x_sets[0][1] = {1};
        st.w_sets[0][1] = s1;
        st.w_sets[0][0] = s2;
        auto status = stage_complete_cycles(g, st, rep);
        CHECK(status.ok == oracle);
        if (status.ok == oracle) ++agreements;
        if (status.ok) {
            const auto& p = st.pending[0];
            int prev = p.host_x;
            for (int v : p.host_middle) {
                CHECK(g.has_edge(prev, v));
                prev = v;
            }
            CHECK(g.has_edge(prev, p.host_y));
        }
    }
    CHECK(agreements == 60);
}

TEST_CASE("random dense host end to end, few-leaves regime") {
    const int n = 300;
    int wins = 0;
    const int reps = 10;
    for (int rep = 0; rep < reps; ++rep) {
        Graph host = generate_gnp(n, 0.5, derive_seed(6000, rep));
        if (min_degree(host) < 0.35 * n) continue;
        Tree t = generate_bounded_tree(n, 3, TreeShape::subdivided, derive_seed(6100, rep));
        PerturbationPlan plan =
            PerturbationPlan::from_c(60.0, {0.25, 0.25, 0.25, 0.25}, n, derive_seed(6200, rep));
        PipelineConfig cfg = easy_config();
        auto res = embed_spanning_tree(t, host, plan, cfg, derive_seed(6300, rep));
        CHECK(res.report.case_taken == "case2");
        if (res.report.success) ++wins;
    }
    CHECK(wins >= reps / 2);  // calibrated acceptance uses the frozen c*
}

TEST_CASE("pipeline is deterministic per seed") {
    const int n = 200;
    Graph host = generate_gnp(n, 0.5, 909);
    Tree t = generate_bounded_tree(n, 3, TreeShape::subdivided, 910);
    PerturbationPlan plan = PerturbationPlan::from_c(60.0, {0.25, 0.25, 0.25, 0.25}, n, 911);
    PipelineConfig cfg = easy_config();
    auto a = embed_spanning_tree(t, host, plan, cfg, 912);
    auto b = embed_spanning_tree(t, host, plan, cfg, 912);
    CHECK(a.report.success == b.report.success);
    REQUIRE(a.report.stages.size() == b.report.stages.size());
    for (std::size_t i = 0; i < a.report.stages.size(); ++i) {
        CHECK(a.report.stages[i].name == b.report.stages[i].name);
        CHECK(a.report.stages[i].ok == b.report.stages[i].ok);
        CHECK(a.report.stages[i].consumed == b.report.stages[i].consumed);
    }
    CHECK(a.embedding.has_value() == b.embedding.has_value());
    if (a.embedding && b.embedding) CHECK(a.embedding->map == b.embedding->map);
}
