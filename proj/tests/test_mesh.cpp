#include "adr/mesh.hpp"

#include <doctest.h>

#include <random>

using namespace adr;

namespace {

std::set<int> all_leaves(const Mesh& m) {
    return {m.leaves.begin(), m.leaves.end()};
}

/// Leaf multiset as sorted corner coordinates, for isomorphism checks.
std::multiset<std::array<double, 6>> leaf_signature(const Mesh& m) {
    std::multiset<std::array<double, 6>> sig;
    for (int t : m.leaves) {
        std::array<std::pair<double, double>, 3> c;
        for (int i = 0; i < 3; ++i)
            c[i] = {m.vertex(t, i).x(), m.vertex(t, i).y()};
        std::sort(c.begin(), c.end());
        sig.insert({c[0].first, c[0].second, c[1].first, c[1].second,
                    c[2].first, c[2].second});
    }
    return sig;
}

double min_leaf_angle(const Mesh& m) {
    double a = 10.0;
    for (int t : m.leaves) a = std::min(a, m.min_angle(t));
    return a;
}

} // namespace

TEST_CASE("structured mesh counts and Euler relation") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 2, 2);
    CHECK(m->leaf_count() == 8);

    auto m1 = build_structured(Rect{0, 0, 1, 1}, 1, 1);
    CHECK(m1->leaf_count() == 2);
    CHECK(m1->vertices.size() == 4);
    CHECK(m1->edges.size() == 5);

    auto m2 = build_structured(Rect{0, 0, 3, 2}, 6, 4);
    CHECK(m2->leaf_count() == 48);
    int v = static_cast<int>(m2->vertices.size());
    int e = static_cast<int>(m2->edges.size());
    int f = m2->leaf_count();
    CHECK(v - e + f == 1);
    CHECK(m2->total_leaf_area() == doctest::Approx(6.0).epsilon(1e-12));

    CHECK_THROWS_AS(build_structured(Rect{0, 0, 1, 1}, 0, 2),
                    std::invalid_argument);
}

TEST_CASE("edge geometry") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 1, 1);
    int horizontal = -1, diagonal = -1, boundary_edges = 0;
    for (size_t i = 0; i < m->edges.size(); ++i) {
        const Edge& e = m->edges[i];
        Vec2 d = m->vertices[e.v[1]].x - m->vertices[e.v[0]].x;
        if (std::abs(d.y()) < 1e-14 && e.is_boundary()) horizontal = int(i);
        if (!e.is_boundary()) diagonal = int(i);
        if (e.is_boundary()) ++boundary_edges;
    }
    CHECK(boundary_edges == 4);
    auto hg = edge_geometry(*m, horizontal);
    CHECK(hg.length == doctest::Approx(1.0));
    CHECK(std::abs(hg.normal.y()) == doctest::Approx(1.0));
    CHECK(hg.right == -1);
    auto dg = edge_geometry(*m, diagonal);
    CHECK(dg.length == doctest::Approx(std::sqrt(2.0)));
    CHECK(dg.normal.norm() == doctest::Approx(1.0));
    CHECK(dg.left < dg.right);
    // Normal points from the lower-id leaf toward the higher-id leaf.
    Vec2 c_l = m->centroid(dg.left), c_r = m->centroid(dg.right);
    CHECK(dg.normal.dot(c_r - c_l) > 0.0);
    CHECK_THROWS_AS(edge_geometry(*m, 99), std::invalid_argument);
}

TEST_CASE("refine basics") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 1, 1);

    SUBCASE("empty marking is identity") {
        auto r = refine(*m, {});
        CHECK(r->leaf_count() == 2);
        CHECK(leaf_signature(*r) == leaf_signature(*m));
    }
    SUBCASE("mark both triangles") {
        auto r = refine(*m, all_leaves(*m));
        CHECK(r->leaf_count() == 4);
        CHECK(r->is_conforming());
        CHECK(r->total_leaf_area() == doctest::Approx(1.0).epsilon(1e-13));
    }
    SUBCASE("mark one triangle closes the shared refinement edge") {
        auto r = refine(*m, {0});
        std::string why;
        CHECK(r->is_conforming(&why));
        // Both share the diagonal as refinement edge, so the neighbor is
        // split with the same midpoint: 4 leaves, no hanging nodes.
        CHECK(r->leaf_count() == 4);
    }
    SUBCASE("non-leaf id throws") {
        auto r = refine(*m, all_leaves(*m));
        CHECK_THROWS_AS(refine(*r, {0}), std::invalid_argument);
    }
}

TEST_CASE("closure cascades keep conformity") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 2, 2);
    // Repeatedly refine a single corner element to force closure chains.
    MeshPtr cur = m;
    for (int pass = 0; pass < 6; ++pass) {
        int pick = cur->leaves.front();
        cur = refine(*cur, {pick});
        std::string why;
        REQUIRE_MESSAGE(cur->is_conforming(&why), why);
    }
    CHECK(cur->total_leaf_area() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coarsen basics") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 1, 1);

    SUBCASE("level-0 floor") {
        auto c = coarsen(*m, all_leaves(*m));
        CHECK(leaf_signature(*c) == leaf_signature(*m));
    }
    SUBCASE("refine-then-coarsen round trip") {
        auto r = refine(*m, all_leaves(*m));
        auto c = coarsen(*r, all_leaves(*r));
        CHECK(c->leaf_count() == 2);
        CHECK(leaf_signature(*c) == leaf_signature(*m));
    }
    SUBCASE("one marked child keeps the pair") {
        auto r = refine(*m, all_leaves(*m));
        std::set<int> partial = {r->leaves[0]};
        auto c = coarsen(*r, partial);
        CHECK(c->leaf_count() == 4);
    }
    SUBCASE("coarsening never hangs a vertex") {
        auto r1 = refine(*m, all_leaves(*m));
        auto r2 = refine(*r1, {r1->leaves[0]});
        // Mark everything: only merges that keep conformity may fire.
        auto c = coarsen(*r2, all_leaves(*r2));
        std::string why;
        CHECK_MESSAGE(c->is_conforming(&why), why);
        CHECK(c->total_leaf_area() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("union mesh") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 2, 2);

    SUBCASE("idempotence") {
        auto u = union_mesh(*m, *m);
        CHECK(leaf_signature(*u.mesh) == leaf_signature(*m));
        for (int li = 0; li < u.mesh->leaf_count(); ++li) {
            CHECK(u.leaf_in_a[li] == u.mesh->leaves[li]);
            CHECK(u.leaf_in_b[li] == u.mesh->leaves[li]);
        }
    }
    SUBCASE("disjoint refinements merge") {
        int t0 = m->leaves[0], t1 = m->leaves[5];
        auto a = refine(*m, {t0});
        auto b = refine(*m, {t1});
        auto u = union_mesh(*a, *b);
        CHECK(u.mesh->is_conforming());
        auto sig = leaf_signature(*u.mesh);
        auto sig_a = leaf_signature(*a), sig_b = leaf_signature(*b);
        // Every leaf of the union is a leaf of a or of b.
        for (const auto& s : sig) {
            bool in_a = sig_a.count(s) > 0, in_b = sig_b.count(s) > 0;
            CHECK((in_a || in_b));
        }
        CHECK(u.mesh->leaf_count() > a->leaf_count());
    }
    SUBCASE("refinement dominance") {
        auto fine = refine(*m, all_leaves(*m));
        auto u = union_mesh(*fine, *m);
        CHECK(leaf_signature(*u.mesh) == leaf_signature(*fine));
        auto u2 = union_mesh(*m, *fine);
        CHECK(leaf_signature(*u2.mesh) == leaf_signature(*fine));
    }
    SUBCASE("commutative and associative on leaf sets") {
        std::mt19937 rng(7);
        auto pick = [&](const Mesh& mm) {
            std::set<int> s;
            std::uniform_int_distribution<int> d(0, mm.leaf_count() - 1);
            for (int i = 0; i < 3; ++i) s.insert(mm.leaves[d(rng)]);
            return s;
        };
        auto a = refine(*m, pick(*m));
        auto b = refine(*m, pick(*m));
        auto c1 = refine(*m, pick(*m));
        auto c = refine(*c1, pick(*c1));
        auto ab = union_mesh(*a, *b);
        auto ba = union_mesh(*b, *a);
        CHECK(leaf_signature(*ab.mesh) == leaf_signature(*ba.mesh));
        auto ab_c = union_mesh(*ab.mesh, *c);
        auto bc = union_mesh(*b, *c);
        auto a_bc = union_mesh(*a, *bc.mesh);
        CHECK(leaf_signature(*ab_c.mesh) == leaf_signature(*a_bc.mesh));
    }
    SUBCASE("incompatible roots throw") {
        auto other = build_structured(Rect{0, 0, 1, 1}, 3, 3);
        CHECK_THROWS_AS(union_mesh(*m, *other), std::invalid_argument);
    }
}

TEST_CASE("random refine/coarsen churn preserves invariants") {
    auto m = build_structured(Rect{0, 0, 3, 2}, 3, 2);
    const double area0 = m->domain.area();
    const double angle0 = min_leaf_angle(*m);
    std::mt19937 rng(42);
    MeshPtr cur = m;
    for (int round = 0; round < 12; ++round) {
        std::set<int> marks;
        std::uniform_int_distribution<int> d(0, cur->leaf_count() - 1);
        for (int i = 0; i < cur->leaf_count() / 3 + 1; ++i)
            marks.insert(cur->leaves[d(rng)]);
        cur = (round % 3 == 2) ? coarsen(*cur, marks) : refine(*cur, marks);
        std::string why;
        REQUIRE_MESSAGE(cur->is_conforming(&why), why);
        REQUIRE(std::abs(cur->total_leaf_area() - area0) <= 1e-12 * area0);
    }
    // Newest-vertex bisection keeps angles bounded away from zero.
    CHECK(min_leaf_angle(*cur) >= 0.5 * angle0 - 1e-12);
    CHECK(cur->leaf_count() > m->leaf_count());
}

TEST_CASE("locate finds the containing leaf") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 4, 4);
    auto r = refine(*m, {m->leaves[0], m->leaves[7]});
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> d(0.001, 0.999);
    for (int i = 0; i < 50; ++i) {
        Vec2 p(d(rng), d(rng));
        int t = r->locate(p);
        CHECK(r->leaf_index(t) >= 0);
        double s = 2 * r->area(t);
        Vec2 a = r->vertex(t, 0), b = r->vertex(t, 1), c = r->vertex(t, 2);
        CHECK(cross2(b - p, c - p) / s >= -1e-9);
        CHECK(cross2(c - p, a - p) / s >= -1e-9);
        CHECK(cross2(a - p, b - p) / s >= -1e-9);
    }
    CHECK_THROWS_AS(r->locate(Vec2(2.0, 2.0)), std::invalid_argument);
}

TEST_CASE("mesh serialization round trip") {
    auto m = build_structured(Rect{0, 0, 1, 1}, 2, 2);
    auto r = refine(*m, {m->leaves[1], m->leaves[4]});
    std::stringstream ss;
    save_mesh(*r, ss);
    auto back = load_mesh(ss);
    CHECK(leaf_signature(*back) == leaf_signature(*r));
    CHECK(back->n_roots == r->n_roots);
    CHECK(back->edges.size() == r->edges.size());
}
