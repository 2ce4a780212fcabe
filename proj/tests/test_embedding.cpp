#include "doctest.h"
#include "perturb/embedding.hpp"
#include "perturb/rng.hpp"
#include "perturb/tree.hpp"

using namespace perturb;

namespace {

Forest forest_of(const Tree& t) { return Forest::from_tree(t); }

}  // namespace

TEST_CASE("any forest embeds into a complete host") {
    Tree t = generate_bounded_tree(30, 3, TreeShape::uniform_attachment, 2);
    Graph host = generate_gnp(40, 1.0, 1);
    auto res = embed_forest_greedy(forest_of(t), host, VertexSet::full(40), 7, 1000);
    REQUIRE(res.embedding.has_value());
    CHECK(verify_embedding(forest_of(t), host, *res.embedding).ok);
}

TEST_CASE("path on 3 into a triangle") {
    Tree t = generate_bounded_tree(3, 2, TreeShape::path, 1);
    Graph triangle = Graph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    auto res = embed_forest_greedy(forest_of(t), triangle, VertexSet::full(3), 3, 100);
    REQUIRE(res.embedding.has_value());
    CHECK(verify_embedding(forest_of(t), triangle, *res.embedding).ok);
}

TEST_CASE("verifier rejects collisions and non-edges") {
    Tree t = generate_bounded_tree(3, 2, TreeShape::path, 1);
    Graph host = Graph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
    Embedding good(3, 4);
    good.place(0, 0);
    good.place(1, 1);
    good.place(2, 2);
    CHECK(verify_embedding(forest_of(t), host, good).ok);

    Embedding collision(3, 4);
    collision.map = {0, 1, 1};
    auto v1 = verify_embedding(forest_of(t), host, collision);
    CHECK(!v1.ok);
    CHECK(v1.violation.find("collision") != std::string::npos);

    Embedding nonedge(3, 4);
    nonedge.map = {0, 1, 3};  // edge (1,2) of the path lands on host pair (1,3)
    auto v2 = verify_embedding(forest_of(t), host, nonedge);
    CHECK(!v2.ok);
    CHECK(v2.violation.find("non-edge") != std::string::npos);

    Embedding partial(3, 4);
    partial.place(0, 0);
    CHECK(!verify_embedding(forest_of(t), host, partial).ok);
}

TEST_CASE("embedder stays inside the allowed set") {
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Graph host = generate_gnp(60, 0.6, rng.next_u64());
        Tree t = generate_bounded_tree(25, 3, TreeShape::uniform_attachment, rng.next_u64());
        std::vector<int> allowed_list;
        for (int v = 0; v < 60; ++v)
            if (v % 3 != 0) allowed_list.push_back(v);
        VertexSet allowed(allowed_list);
        auto res = embed_forest_greedy(forest_of(t), host, allowed, rng.next_u64(), 5000);
        if (!res.embedding) continue;
        for (int v = 0; v < 25; ++v) CHECK(allowed.contains(res.embedding->map[v]));
    }
}

TEST_CASE("determinism per seed") {
    Graph host = generate_gnp(80, 0.3, 11);
    Tree t = generate_bounded_tree(40, 3, TreeShape::uniform_attachment, 12);
    auto a = embed_forest_greedy(forest_of(t), host, VertexSet::full(80), 99, 4000);
    auto b = embed_forest_greedy(forest_of(t), host, VertexSet::full(80), 99, 4000);
    REQUIRE(a.embedding.has_value() == b.embedding.has_value());
    if (a.embedding) CHECK(a.embedding->map == b.embedding->map);
}

TEST_CASE("large almost-spanning forests embed into sparse random graphs") {
    // 0.8n-vertex random tree with max degree 3 into G(n, 20/n)
    const int n = 1000;
    int wins = 0;
    const int reps = 50;
    for (int rep = 0; rep < reps; ++rep) {
        Graph host = generate_gnp(n, 20.0 / n, derive_seed(500, rep));
        Tree t = generate_bounded_tree(800, 3, TreeShape::uniform_attachment, derive_seed(600, rep));
        auto res = embed_forest_greedy(forest_of(t), host, VertexSet::full(n), derive_seed(700, rep),
                                       10 * n);
        if (!res.embedding) continue;
        if (verify_embedding(forest_of(t), host, *res.embedding).ok) ++wins;
    }
    CHECK(wins >= 45);  // >= 0.9 success
}

TEST_CASE("failure reports a stuck subtree") {
    // forest larger than the allowed set cannot embed
    Tree t = generate_bounded_tree(10, 3, TreeShape::uniform_attachment, 3);
    Graph host = generate_gnp(10, 1.0, 1);
    VertexSet allowed({0, 1, 2, 3, 4});
    auto res = embed_forest_greedy(forest_of(t), host, allowed, 4, 1000);
    CHECK(!res.embedding.has_value());
    CHECK(res.stuck_subtree_size > 0);
}
