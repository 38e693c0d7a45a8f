#include "adr/solver.hpp"

#include "adr/problems.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace adr;
using testutil::simple_problem;

namespace {
MeshPtr unit_mesh(int n) { return build_structured(Rect{0, 0, 1, 1}, n, n); }
} // namespace

TEST_CASE("linear_solve") {
    SUBCASE("identity") {
        SparseMatrix a(5, 5);
        a.setIdentity();
        Eigen::VectorXd rhs(5);
        rhs << 1, -2, 3, 0.5, 4;
        CHECK((linear_solve(a, rhs) - rhs).norm() == 0.0);
    }
    SUBCASE("block-diagonal mass: per-block equals global") {
        auto prob = simple_problem(1.0, Vec2(0, 0));
        auto space = std::make_shared<DGSpace>(unit_mesh(2), 2);
        AssemblyContext ctx(space, prob);
        SparseMatrix m = assemble_mass(ctx);
        std::mt19937 rng(2);
        std::normal_distribution<double> d;
        Eigen::VectorXd rhs(space->dof());
        for (int i = 0; i < rhs.size(); ++i) rhs[i] = d(rng);
        Eigen::VectorXd global = linear_solve(m, rhs);
        Eigen::MatrixXd dm(m);
        for (int li = 0; li < space->mesh().leaf_count(); ++li) {
            int b = space->block_start(li), n = space->nloc();
            Eigen::VectorXd local =
                dm.block(b, b, n, n).ldlt().solve(rhs.segment(b, n));
            CHECK((global.segment(b, n) - local).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
    SUBCASE("random SPD-perturbed system verified by residual") {
        const int n = 300;
        std::mt19937 rng(3);
        std::normal_distribution<double> d;
        std::vector<Eigen::Triplet<double>> trip;
        for (int i = 0; i < n; ++i) {
            trip.emplace_back(i, i, 10.0 + std::abs(d(rng)));
            if (i + 1 < n) {
                double v = d(rng);
                trip.emplace_back(i, i + 1, v);
                trip.emplace_back(i + 1, i, v * 0.5);
            }
        }
        SparseMatrix a(n, n);
        a.setFromTriplets(trip.begin(), trip.end());
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) rhs[i] = d(rng);
        Eigen::VectorXd x = linear_solve(a, rhs);
        CHECK((a * x - rhs).norm() <= 1e-10 * (10.0 * x.norm() + rhs.norm()));
    }
    SUBCASE("singular system throws") {
        SparseMatrix a(3, 3); // zero matrix
        Eigen::VectorXd rhs = Eigen::VectorXd::Ones(3);
        CHECK_THROWS_AS(linear_solve(a, rhs), std::runtime_error);
    }
}

TEST_CASE("backward Euler step basics") {
    SUBCASE("zero fixed point in one iteration") {
        auto prob = simple_problem(1.0, Vec2(0, 0));
        auto space = std::make_shared<DGSpace>(unit_mesh(2), 1);
        AssemblyContext ctx(space, prob, 0.1);
        StepOperators ops = make_step_operators(ctx);
        std::vector<DGFunction> u0 = {DGFunction(space)};
        StepResult res = backward_euler_step(u0, 0.1, ctx, ops);
        CHECK(res.converged);
        CHECK(res.iterations == 1);
        CHECK(res.u_new[0].coeff().cwiseAbs().maxCoeff() <= 1e-14);
    }
    SUBCASE("affine residual converges in exactly one iteration") {
        auto prob = simple_problem(1e-2, Vec2(1, 1),
                                   [](const Vec2& x, double) { return x.x(); });
        prob.reaction = [](const Vec2&, const Eigen::VectorXd& u, int) {
            return u[0];
        };
        prob.reaction_jac = [](const Vec2&, const Eigen::VectorXd&, int, int) {
            return 1.0;
        };
        auto space = std::make_shared<DGSpace>(unit_mesh(2), 2);
        AssemblyContext ctx(space, prob, 0.1);
        StepOperators ops = make_step_operators(ctx);
        std::vector<DGFunction> u0 = {
            l2_project([](const Vec2& x) { return x.x() * x.y(); }, space)};
        StepResult res = backward_euler_step(u0, 0.1, ctx, ops);
        CHECK(res.converged);
        CHECK(res.iterations == 1);
    }
    SUBCASE("quartic reaction contracts quadratically") {
        ProblemSpec prob = example1(1e-2);
        auto mesh = uniform_refine(*build_structured(prob.domain, 2, 2,
                                                     prob.boundary),
                                   4); // 128 elements
        auto space = std::make_shared<DGSpace>(mesh, 2);
        AssemblyContext ctx(space, prob, 0.25);
        StepOperators ops = make_step_operators(ctx);
        // A large step from zero data forces several Newton iterations.
        std::vector<DGFunction> u0 = {DGFunction(space)};
        NewtonSettings ns;
        ns.abs_tol_scale = 1e-13;
        StepResult res = backward_euler_step(u0, 0.25, ctx, ops, ns);
        CHECK(res.converged);
        const auto& r = res.history.residual_norms;
        REQUIRE(r.size() >= 3);
        int checked = 0;
        for (size_t s = 0; s + 1 < r.size(); ++s) {
            if (r[s] < 1e-2 && r[s] > 1e-7) {
                CHECK(r[s + 1] <= 50.0 * r[s] * r[s]);
                ++checked;
            }
        }
        CHECK(checked >= 1);
    }
    SUBCASE("damping never accepts an increased residual") {
        ProblemSpec prob = example3(); // stiff non-monotone reaction
        auto mesh = uniform_refine(*build_structured(prob.domain, 2, 2,
                                                     prob.boundary),
                                   2);
        auto space = std::make_shared<DGSpace>(mesh, 2);
        AssemblyContext ctx(space, prob, 0.25);
        StepOperators ops = make_step_operators(ctx);
        std::vector<DGFunction> u0 = {l2_project(prob.initial[0], space)};
        StepResult res = backward_euler_step(u0, 0.25, ctx, ops);
        const auto& r = res.history.residual_norms;
        for (size_t s = 0; s + 1 < r.size(); ++s)
            CHECK(r[s + 1] <= r[s] * (1 + 1e-12));
    }
}

TEST_CASE("backward Euler is first order at fixed final time") {
    // u(x,t) = e^{-t} x y is harmonic in space and exact in V_h (k=2), so
    // the only error is the time discretization.
    auto prob = simple_problem(0.5, Vec2(0, 0));
    prob.reaction = [](const Vec2&, const Eigen::VectorXd& u, int) {
        return u[0];
    };
    prob.reaction_jac = [](const Vec2&, const Eigen::VectorXd&, int, int) {
        return 1.0;
    };
    prob.dirichlet = {[](const Vec2& x, double t) {
        return std::exp(-t) * x.x() * x.y();
    }};
    auto exact = [](const Vec2& x, double t) {
        return std::exp(-t) * x.x() * x.y();
    };
    auto space = std::make_shared<DGSpace>(unit_mesh(2), 2);
    auto run = [&](double tau) {
        std::vector<DGFunction> u = {l2_project(
            [&](const Vec2& x) { return exact(x, 0.0); }, space)};
        double t = 0.0;
        while (t < 1.0 - 1e-12) {
            AssemblyContext ctx(space, prob, t + tau);
            StepOperators ops = make_step_operators(ctx);
            StepResult res = backward_euler_step(u, tau, ctx, ops);
            REQUIRE(res.converged);
            u = res.u_new;
            t += tau;
        }
        return l2_error([&](const Vec2& x) { return exact(x, 1.0); }, u[0]);
    };
    double e1 = run(0.1);
    double e2 = run(0.05);
    CHECK(e1 / e2 >= 1.8);
    CHECK(e1 / e2 <= 2.2);
}

TEST_CASE("coupled monolithic step equals the fixed-point limit") {
    ProblemSpec prob = example2();
    auto mesh = build_structured(prob.domain, 3, 3, prob.boundary);
    auto space = std::make_shared<DGSpace>(mesh, 1);
    const double tau = 0.05;
    AssemblyContext ctx(space, prob, tau);
    StepOperators ops = make_step_operators(ctx);
    std::vector<DGFunction> u0 = {l2_project(prob.initial[0], space),
                                  l2_project(prob.initial[1], space)};
    StepResult mono = backward_euler_step(u0, tau, ctx, ops);
    REQUIRE(mono.converged);

    // Decoupled Gauss-Seidel sweep: each single-component solve freezes the
    // other component inside the reaction.
    std::vector<DGFunction> iter = u0;
    for (int sweep = 0; sweep < 60; ++sweep) {
        std::vector<DGFunction> next = iter;
        for (int c = 0; c < 2; ++c) {
            ProblemSpec sub = prob;
            sub.n_components = 1;
            sub.diffusion = {prob.diffusion[c]};
            sub.velocity = {prob.velocity[c]};
            sub.velocity_div = {prob.velocity_div[c]};
            sub.source = {prob.source[c]};
            sub.dirichlet = {prob.dirichlet[c]};
            sub.initial = {prob.initial[c]};
            DGFunction frozen = c == 0 ? next[1] : next[0];
            const Mesh* mp = &space->mesh();
            sub.reaction = [frozen, mp](const Vec2& x, const Eigen::VectorXd& u,
                                        int) {
                return u[0] * frozen.eval(mp->locate(x), x);
            };
            sub.reaction_jac = [frozen, mp](const Vec2& x,
                                            const Eigen::VectorXd&, int, int) {
                return frozen.eval(mp->locate(x), x);
            };
            AssemblyContext cctx(space, sub, tau);
            StepOperators cops = make_step_operators(cctx);
            StepResult r = backward_euler_step({u0[c]}, tau, cctx, cops);
            REQUIRE(r.converged);
            next[c] = r.u_new[0];
        }
        double delta = (next[0].coeff() - iter[0].coeff()).norm() +
                       (next[1].coeff() - iter[1].coeff()).norm();
        iter = next;
        if (delta < 1e-13) break;
    }
    double diff = (mono.u_new[0].coeff() - iter[0].coeff()).norm() +
                  (mono.u_new[1].coeff() - iter[1].coeff()).norm();
    CHECK(diff <= 1e-8);
}

TEST_CASE("darcy solve") {
    Rect dom{0, 0, 3, 2};

    SUBCASE("uniform permeability gives a linear pressure") {
        const double k = 2e-3, mu = 0.1;
        auto mesh = build_structured(dom, 6, 4);
        DarcyResult res =
            darcy_solve([k](const Vec2&) { return k; }, mu, mesh, 1);
        for (Vec2 p : {Vec2(0.4, 0.3), Vec2(1.5, 1.0), Vec2(2.7, 1.7)}) {
            CHECK(res.pressure(p) == doctest::Approx(1.0 - p.x() / 3.0)
                                         .epsilon(1e-8));
            Vec2 beta = res.velocity(p);
            CHECK(beta.x() == doctest::Approx(k / (3.0 * mu)).epsilon(1e-8));
            CHECK(std::abs(beta.y()) <= 1e-10);
        }
    }
    SUBCASE("scaling k scales the velocity, not the pressure") {
        auto mesh = build_structured(dom, 6, 4);
        auto k1 = [](const Vec2& x) { return 1e-3 * (1.0 + 0.5 * x.y()); };
        auto k2 = [k1](const Vec2& x) { return 2.0 * k1(x); };
        DarcyResult r1 = darcy_solve(k1, 0.1, mesh, 1);
        DarcyResult r2 = darcy_solve(k2, 0.1, mesh, 1);
        Vec2 p(1.3, 0.9);
        CHECK(r1.pressure(p) == doctest::Approx(r2.pressure(p)).epsilon(1e-10));
        Vec2 b1 = r1.velocity(p), b2 = r2.velocity(p);
        CHECK((b2 - 2.0 * b1).norm() <= 1e-10 * b1.norm());
    }
    SUBCASE("three-streak field: flux balance and canalization") {
        PermeabilityField perm = PermeabilityField::three_streaks();
        auto mesh = build_structured(dom, 30, 20);
        DarcyResult res =
            darcy_solve([perm](const Vec2& x) { return perm(x); }, 0.1, mesh, 1);
        const Mesh& pm = res.pressure.space().mesh();
        const auto& er = quadrature(RuleKind::Edge, 6);

        double total_inflow = 0.0;
        for (const Edge& e : pm.edges) {
            if (!e.is_boundary()) continue;
            Vec2 pa = pm.vertices[e.v[0]].x, pb = pm.vertices[e.v[1]].x;
            if (std::abs(pa.x()) > 1e-12 || std::abs(pb.x()) > 1e-12) continue;
            for (int q = 0; q < er.size(); ++q) {
                Vec2 x = pa + er.points[q].x() * (pb - pa);
                total_inflow += er.weights[q] * e.length *
                                std::abs(res.velocity(x).dot(e.normal));
            }
        }
        REQUIRE(total_inflow > 0.0);

        double imbalance = 0.0;
        for (int li = 0; li < pm.leaf_count(); ++li) {
            double net = 0.0;
            for (int eid : pm.leaf_edges()[li]) {
                const Edge& e = pm.edges[eid];
                double sign = e.left == pm.leaves[li] ? 1.0 : -1.0;
                Vec2 pa = pm.vertices[e.v[0]].x, pb = pm.vertices[e.v[1]].x;
                for (int q = 0; q < er.size(); ++q) {
                    Vec2 x = pa + er.points[q].x() * (pb - pa);
                    net += sign * er.weights[q] * e.length *
                           res.velocity(x).dot(e.normal);
                }
            }
            imbalance += std::abs(net);
        }
        CHECK(imbalance <= 1e-6 * total_inflow);

        // Flow canalizes into the streaks.
        double v_streak = res.velocity(Vec2(1.5, 0.5)).norm();
        double v_background = res.velocity(Vec2(1.5, 0.75)).norm();
        CHECK(v_streak > 5.0 * v_background);
    }
    SUBCASE("invalid inputs throw") {
        auto mesh = build_structured(dom, 2, 2);
        CHECK_THROWS_AS(
            darcy_solve([](const Vec2&) { return 1.0; }, 0.0, mesh, 1),
            std::invalid_argument);
        CHECK_THROWS(darcy_solve([](const Vec2&) { return -1.0; }, 0.1, mesh, 1));
    }
}
