#include "doctest.h"
#include "perturb/rng.hpp"
#include "perturb/star_matching.hpp"

#include <functional>
#include <numeric>

using namespace perturb;

namespace {

BipartiteGraph complete_bg(int a, int b) {
    BipartiteGraph g;
    g.a_size = a;
    g.b_size = b;
    g.adj.assign(a, {});
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j) g.adj[i].push_back(j);
    return g;
}

BipartiteGraph random_bg(int a, int b, double p, Rng& rng) {
    BipartiteGraph g;
    g.a_size = a;
    g.b_size = b;
    g.adj.assign(a, {});
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j)
            if (rng.next_bernoulli(p)) g.adj[i].push_back(j);
    return g;
}

// all demand vectors with entries in {1,2} summing to total
std::vector<std::vector<int>> demands_for(int a, int total) {
    std::vector<std::vector<int>> out;
    int twos = total - a;
    if (twos < 0 || twos > a) return out;
    std::vector<int> d(a, 1);
    std::vector<int> idx(a);
    std::iota(idx.begin(), idx.end(), 0);
    std::function<void(int, int)> choose = [&](int from, int left) {
        if (left == 0) {
            out.push_back(d);
            return;
        }
        for (int i = from; i <= a - left; ++i) {
            d[i] = 2;
            choose(i + 1, left - 1);
            d[i] = 1;
        }
    };
    choose(0, twos);
    return out;
}

}  // namespace

TEST_CASE("complete bipartite always satisfies Hall") {
    auto g = complete_bg(3, 5);
    StarDemand d{{2, 2, 1}};
    CHECK(check_hall_condition(g, d, HallMode::exhaustive).ok);
    CHECK(check_hall_condition(g, d, HallMode::matching).ok);
    auto packing = find_star_packing(g, d);
    REQUIRE(packing.packing.has_value());
    CHECK(validate_star_packing(g, d, *packing.packing));
}

TEST_CASE("demand exceeding a single neighbourhood fails with witness {a}") {
    BipartiteGraph g;
    g.a_size = 1;
    g.b_size = 2;
    g.adj = {{0}};  // a sees only b0
    StarDemand d{{2}};
    auto res = check_hall_condition(g, d, HallMode::exhaustive);
    CHECK(!res.ok);
    CHECK(res.witness == std::vector<int>{0});
    auto res2 = check_hall_condition(g, d, HallMode::matching);
    CHECK(!res2.ok);
    CHECK(res2.witness == std::vector<int>{0});
    auto packing = find_star_packing(g, d);
    CHECK(!packing.packing.has_value());
    CHECK(packing.witness == std::vector<int>{0});
}

TEST_CASE("two-center example splits B") {
    auto g = complete_bg(2, 3);
    StarDemand d{{1, 2}};
    auto packing = find_star_packing(g, d);
    REQUIRE(packing.packing.has_value());
    CHECK(packing.packing->stars[0].size() == 1);
    CHECK(packing.packing->stars[1].size() == 2);
    CHECK(validate_star_packing(g, d, *packing.packing));
}

TEST_CASE("exhaustive and matching Hall modes agree on random instances") {
    Rng rng(314);
    int checked = 0;
    for (int rep = 0; rep < 10000; ++rep) {
        int a = 1 + static_cast<int>(rng.next_below(4));
        int b = a + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(2 * a - a + 1)));
        auto demands = demands_for(a, b);
        if (demands.empty()) continue;
        auto g = random_bg(a, b, 0.4, rng);
        const auto& dv = demands[rng.next_below(demands.size())];
        StarDemand d{dv};
        auto ex = check_hall_condition(g, d, HallMode::exhaustive);
        auto ma = check_hall_condition(g, d, HallMode::matching);
        CHECK(ex.ok == ma.ok);
        auto packing = find_star_packing(g, d);
        CHECK(packing.packing.has_value() == ex.ok);
        if (packing.packing) CHECK(validate_star_packing(g, d, *packing.packing));
        ++checked;
    }
    CHECK(checked > 5000);
}

TEST_CASE("infeasible witnesses really violate Hall") {
    Rng rng(271);
    int found = 0;
    for (int rep = 0; rep < 3000 && found < 200; ++rep) {
        auto g = random_bg(4, 6, 0.25, rng);
        auto demands = demands_for(4, 6);
        StarDemand d{demands[rng.next_below(demands.size())]};
        auto packing = find_star_packing(g, d);
        if (packing.packing) continue;
        ++found;
        REQUIRE(!packing.witness.empty());
        // recompute |N(S)| and the demand sum from scratch
        std::vector<char> nb(6, 0);
        int need = 0;
        for (int a : packing.witness) {
            need += d.demand[a];
            for (int b : g.adj[a]) nb[b] = 1;
        }
        int have = 0;
        for (char c : nb) have += c;
        CHECK(have < need);
    }
    CHECK(found >= 50);
}

TEST_CASE("case 1 on a complete host embeds a star") {
    int n = 40;
    Tree t = [] {
        std::vector<int> parent(40, 0);
        parent[0] = -1;
        return Tree(std::move(parent));
    }();
    Graph host = generate_gnp(n, 1.0, 1);
    PerturbationPlan plan = PerturbationPlan::from_c(30.0, {0.25, 0.25, 0.25, 0.25}, n, 5);
    auto res = complete_case1(t, host, plan, 0.1, 10 * n, 77);
    REQUIRE(res.embedding.has_value());
    auto verdict = verify_embedding(Forest::from_tree(t), graph_union(host, plan.union_of_phases(n)),
                                    *res.embedding);
    CHECK(verdict.ok);
}

TEST_CASE("case 1 success rate on dense random hosts") {
    int n = 200;
    int wins = 0;
    const int reps = 25;
    for (int rep = 0; rep < reps; ++rep) {
        Graph host = generate_gnp(n, 0.5, derive_seed(1000, rep));
        Tree t = generate_bounded_tree(n, 3, TreeShape::caterpillar, derive_seed(2000, rep));
        PerturbationPlan plan =
            PerturbationPlan::from_c(40.0, {0.25, 0.25, 0.25, 0.25}, n, derive_seed(3000, rep));
        auto res = complete_case1(t, host, plan, 0.15, 10 * n, derive_seed(4000, rep));
        if (!res.embedding) continue;
        Graph validation = graph_union(host, plan.union_of_phases(n));
        if (verify_embedding(Forest::from_tree(t), validation, *res.embedding).ok) ++wins;
    }
    CHECK(wins >= reps * 7 / 10);
}
