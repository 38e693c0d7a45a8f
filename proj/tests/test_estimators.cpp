#include "adr/estimators.hpp"

#include "adr/adaptivity.hpp"
#include "adr/problems.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <random>

using namespace adr;
using testutil::simple_problem;

namespace {
MeshPtr unit_mesh(int n) { return build_structured(Rect{0, 0, 1, 1}, n, n); }

/// Linear problem whose exact solution is a degree <= k polynomial, with
/// matching discrete data; every estimator component must vanish on it.
struct PolySetup {
    ProblemSpec prob;
    SpacePtr space;
    std::vector<DGFunction> u;
    std::function<double(const Vec2&)> poly;
};

PolySetup poly_setup(int k, int n) {
    PolySetup s;
    auto poly = [](const Vec2& x) {
        return 2.0 + x.x() - 3.0 * x.y() + 0.5 * x.x() * x.y();
    };
    s.poly = poly;
    const double eps = 0.4;
    const Vec2 beta(1.0, 2.0);
    s.prob = simple_problem(eps, beta);
    s.prob.source = {[poly, eps, beta](const Vec2& x, double) {
        // -eps lap + beta.grad of the polynomial (lap = 0 here except the
        // bilinear term, whose laplacian vanishes too).
        Vec2 grad(1.0 + 0.5 * x.y(), -3.0 + 0.5 * x.x());
        return beta.dot(grad);
    }};
    s.prob.dirichlet = {[poly](const Vec2& x, double) { return poly(x); }};
    s.prob.has_exact = true;
    s.prob.exact = {[poly](const Vec2& x, double) { return poly(x); }};
    s.prob.exact_grad = {[](const Vec2& x, double) {
        return Vec2(1.0 + 0.5 * x.y(), -3.0 + 0.5 * x.x());
    }};
    s.prob.exact_dt = {[](const Vec2&, double) { return 0.0; }};
    s.space = std::make_shared<DGSpace>(unit_mesh(n), k);
    s.u = {l2_project(poly, s.space)};
    return s;
}
} // namespace

TEST_CASE("weights") {
    CHECK(weight_rho(0.5, 1e-2, 0.0) == doctest::Approx(5.0));
    CHECK(weight_rho(0.5, 1e-2, 100.0) == doctest::Approx(0.1));
    CHECK(weight_rho_T(1e-4, 0.0) == doctest::Approx(100.0));
    CHECK(weight_rho_T(1e-4, 4.0) == doctest::Approx(0.5));
}

TEST_CASE("energy norm") {
    SUBCASE("zero function") {
        auto prob = simple_problem(1.0, Vec2(0, 0));
        auto space = std::make_shared<DGSpace>(unit_mesh(2), 1);
        AssemblyContext ctx(space, prob);
        CHECK(energy_norm(DGFunction(space), ctx, 0) == 0.0);
    }
    SUBCASE("continuous field reduces to the broken H1 seminorm") {
        auto prob = simple_problem(1.0, Vec2(0, 0));
        auto space = std::make_shared<DGSpace>(unit_mesh(2), 2);
        AssemblyContext ctx(space, prob);
        auto v = l2_project([](const Vec2& x) { return x.x() * x.x(); }, space);
        // int |grad x^2|^2 = int 4x^2 = 4/3.
        CHECK(energy_norm(v, ctx, 0) ==
              doctest::Approx(std::sqrt(4.0 / 3.0)).epsilon(1e-10));
    }
    SUBCASE("interpolant of x1 with kappa = 1") {
        auto prob = simple_problem(1.0, Vec2(0, 0));
        prob.kappa = 1.0;
        auto space = std::make_shared<DGSpace>(unit_mesh(2), 1);
        AssemblyContext ctx(space, prob);
        auto v = l2_project([](const Vec2& x) { return x.x(); }, space);
        CHECK(energy_norm(v, ctx, 0) * energy_norm(v, ctx, 0) ==
              doctest::Approx(4.0 / 3.0).epsilon(1e-10));
    }
}

TEST_CASE("jump seminorm part") {
    SUBCASE("continuous field vanishes") {
        auto prob = simple_problem(0.1, Vec2(0, 0));
        auto space = std::make_shared<DGSpace>(unit_mesh(2), 2);
        AssemblyContext ctx(space, prob);
        auto v = l2_project([](const Vec2& x) { return x.x() * x.y(); }, space);
        CHECK(jump_seminorm_part(v, ctx, 0) <= 1e-20);
    }
    SUBCASE("single unit edge with constant jump") {
        // (0,2)x(0,1) split into two cells: one interior vertical edge of
        // length 1 carries the only jump of the indicator field.
        auto prob = simple_problem(0.1, Vec2(0, 0));
        prob.domain = {0, 0, 2, 1};
        auto mesh = build_structured(prob.domain, 2, 1);
        auto space = std::make_shared<DGSpace>(mesh, 1);
        AssemblyContext ctx(space, prob);
        auto v = l2_project(
            [](const Vec2& x) { return x.x() > 1.0 ? 1.0 : 0.0; }, space);
        // kappa h + h/eps = 0 + 1/0.1 = 10 times ||[v]||^2 = 1.
        CHECK(jump_seminorm_part(v, ctx, 0) == doctest::Approx(10.0).epsilon(1e-9));

        auto prob2 = prob;
        prob2.diffusion = {[](const Vec2&) { return Mat2(0.2 * Mat2::Identity()); }};
        AssemblyContext ctx2(space, prob2);
        CHECK(jump_seminorm_part(v, ctx2, 0) ==
              doctest::Approx(5.0).epsilon(1e-9));
    }
}

TEST_CASE("stationary indicator zero properties") {
    PolySetup s = poly_setup(2, 2);
    AssemblyContext ctx(s.space, s.prob);
    DiscreteData data = project_data(ctx, 0);
    StationaryReport rep = stationary_indicator(s.u, 0, ctx, data);
    CHECK(rep.eta <= 1e-10);
    CHECK(rep.theta <= 1e-10); // polynomial data projects exactly
}

TEST_CASE("stationary indicator detects non-smoothness") {
    ProblemSpec prob = example1(1e-2);
    ProblemSpec st = stationary_snapshot(prob, 0.25);
    auto mesh = uniform_refine(*build_structured(st.domain, 2, 2, st.boundary), 2);
    auto space = std::make_shared<DGSpace>(mesh, 2);
    AssemblyContext ctx(space, st, 0.0);
    StepOperators ops = make_step_operators(ctx);
    StepResult sol = solve_stationary(ctx, ops);
    REQUIRE(sol.converged);
    DiscreteData data = project_data(ctx, 0);
    StationaryReport rep = stationary_indicator(sol.u_new, 0, ctx, data);
    CHECK(rep.eta > 0.0);
    double err = stationary_dg_error(sol.u_new, 0, ctx, 0.0);
    CHECK(err > 0.0);
    // Reliability-style sanity at one level (full sweep in the studies).
    CHECK(err <= 10.0 * (rep.eta + rep.theta));
}

TEST_CASE("elliptic source") {
    auto prob = simple_problem(1.0, Vec2(0, 0));
    auto space = std::make_shared<DGSpace>(unit_mesh(2), 2);
    std::mt19937 rng(3);
    std::normal_distribution<double> d;
    DGFunction u(space);
    for (int i = 0; i < u.coeff().size(); ++i) u.coeff()[i] = d(rng);

    SUBCASE("steady state with zero source") {
        auto zero = [](const Vec2&, double) { return 0.0; };
        DGFunction a = elliptic_source(u, u, zero, 0.1, 0.1);
        CHECK(a.coeff().cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("difference quotient") {
        DGFunction w(space);
        for (int i = 0; i < w.coeff().size(); ++i) w.coeff()[i] = d(rng);
        DGFunction u2(space);
        const double tau = 0.05;
        u2.coeff() = u.coeff() + tau * w.coeff();
        auto zero = [](const Vec2&, double) { return 0.0; };
        DGFunction a = elliptic_source(u, u2, zero, tau, tau);
        CHECK((a.coeff() + w.coeff()).cwiseAbs().maxCoeff() <= 1e-11);
    }
    SUBCASE("same-mesh projection is exact for polynomial sources") {
        auto f = [](const Vec2& x, double) { return 1.0 + x.x() - x.y(); };
        DGFunction u2(space);
        for (int i = 0; i < u2.coeff().size(); ++i) u2.coeff()[i] = d(rng);
        const double tau = 0.2;
        DGFunction a = elliptic_source(u, u2, f, tau, tau);
        DGFunction fp = l2_project([f](const Vec2& x) { return f(x, 0.0); }, space);
        Eigen::VectorXd expected =
            fp.coeff() - (u2.coeff() - u.coeff()) / tau;
        CHECK((a.coeff() - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("step estimate zero properties") {
    PolySetup s = poly_setup(2, 2);
    AssemblyContext ctx(s.space, s.prob, 0.1);

    SUBCASE("unchanged nested mesh with polynomial source: S2 = 0") {
        DGFunction a = elliptic_source(s.u[0], s.u[0], s.prob.source[0], 0.1, 0.1);
        StepEstimate est =
            estimate_step(s.u, s.u, {a}, {a}, 0.0, 0.1, ctx);
        CHECK(est.s2[0] <= 1e-22);
        // Continuous field: no jumps anywhere.
        CHECK(est.s3[0] <= 1e-20);
        CHECK(est.s4[0] <= 1e-20);
        // Static data: temporal indicator vanishes identically.
        CHECK(est.t1_int[0] == 0.0);
        CHECK(est.t2_sq_int[0] <= 1e-22);
        CHECK(est.eta_T_tilde_sq[0] <= 1e-22);
        // The interior residual of the exact polynomial solution vanishes:
        // A = P f - 0 and f - beta.grad u = 0 pointwise.
        CHECK(est.s1[0] <= 1e-18);
    }
}

TEST_CASE("temporal indicator orders") {
    // Halving every step size reduces the accumulated squared indicator by
    // about 4 (first-order consistency of backward Euler data transfer).
    ProblemSpec prob = example1(1e-2);
    auto mesh = uniform_refine(*build_structured(prob.domain, 2, 2, prob.boundary), 4);
    auto run_sum = [&](double tau) {
        AdaptiveResult res = adaptive_run(prob, Tolerances::none(), mesh, tau,
                                          prob.final_time, 1, {}, {}, false);
        REQUIRE_FALSE(res.aborted);
        return res.trace.run[0].t_tilde_sum;
    };
    double s1 = run_sum(0.05);
    double s2 = run_sum(0.025);
    double ratio = s1 / s2;
    CHECK(ratio >= 3.2);
    CHECK(ratio <= 4.8);
}

TEST_CASE("run accumulation arithmetic") {
    RunEstimate run;
    run.set_initial(0.0, 0.0, 0.0, 0.1);

    SUBCASE("zero steps stay zero") {
        CHECK(run.eta_S_sq() == 0.0);
        CHECK(run.eta_T_sq() == 0.0);
    }
    SUBCASE("single step trapezoid") {
        StepEstimate est;
        est.s1 = {4.0}; // a^2 with a = 2
        est.s2 = {0.0};
        est.s3 = {0.0};
        est.s4 = {0.0};
        est.t1_int = {0.0};
        est.t2_int = {0.0};
        est.t2_sq_int = {0.0};
        est.eta_T_tilde_sq = {0.0};
        est.rho_T = 0.1;
        run.prev_s1 = 4.0; // eta_{S1,0} = a as well
        const double tau = 0.3;
        run.add_step(tau, est, 0);
        CHECK(run.eta_S_sq() == doctest::Approx(tau * 8.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("min-term selects the smaller aggregate") {
        // sum tau eta4 = 3, rho_T = 0.1, sum tau eta4^2 = 5:
        // min{9, 0.01 * 5} = 0.05.
        run.s4_lin = 3.0;
        run.s4_quad = 5.0;
        run.rho_T = 0.1;
        CHECK(run.eta_S_sq() == doctest::Approx(0.05).epsilon(1e-15));
    }
}

TEST_CASE("true error norm") {
    SUBCASE("exact polynomial trajectory has zero error") {
        PolySetup s = poly_setup(2, 2);
        AssemblyContext ctx(s.space, s.prob, 0.5);
        TrueErrorAccum acc;
        acc.add_endpoint(s.u, 0.0, ctx);
        acc.add_interval(s.u, s.u, 0.0, 0.5, ctx);
        acc.add_endpoint(s.u, 0.5, ctx);
        CHECK(acc.norm() <= 1e-10);
    }
    SUBCASE("constant error field") {
        const double c = 0.75, T = 2.0;
        PolySetup s = poly_setup(2, 2);
        ProblemSpec prob = s.prob;
        for (auto& e : prob.exact)
            e = [c, orig = e](const Vec2& x, double t) { return orig(x, t) + c; };
        AssemblyContext ctx(s.space, prob, T);
        TrueErrorAccum acc;
        acc.add_endpoint(s.u, 0.0, ctx);
        acc.add_interval(s.u, s.u, 0.0, T, ctx);
        acc.add_endpoint(s.u, T, ctx);
        // kappa = 0: norm^2 = Linf(L2)^2 = c^2 |Omega|; gradients and jumps
        // of the constant error vanish.
        CHECK(acc.norm() == doctest::Approx(c).epsilon(1e-10));
    }
}

TEST_CASE("effectivity") {
    CHECK(effectivity(7.0, 1.0) == 7.0);
    CHECK_THROWS_AS(effectivity(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("absolute homogeneity of norms and estimators") {
    // Linear problem: scaling (u, f, g) by c scales every component by |c|.
    PolySetup s = poly_setup(2, 2);
    const double c = -2.5;
    ProblemSpec scaled = s.prob;
    scaled.source = {[orig = s.prob.source[0], c](const Vec2& x, double t) {
        return c * orig(x, t);
    }};
    scaled.dirichlet = {[orig = s.prob.dirichlet[0], c](const Vec2& x, double t) {
        return c * orig(x, t);
    }};
    std::vector<DGFunction> cu = {DGFunction(s.space)};
    cu[0].coeff() = c * s.u[0].coeff();

    AssemblyContext ctx(s.space, s.prob, 0.0);
    AssemblyContext ctx_scaled(s.space, scaled, 0.0);

    double n1 = energy_norm(s.u[0], ctx, 0);
    double n2 = energy_norm(cu[0], ctx_scaled, 0);
    CHECK(n2 == doctest::Approx(std::abs(c) * n1).epsilon(1e-12));

    double j1 = jump_seminorm_part(s.u[0], ctx, 0);
    double j2 = jump_seminorm_part(cu[0], ctx_scaled, 0);
    CHECK(j2 == doctest::Approx(c * c * j1).epsilon(1e-12));

    DiscreteData d1 = project_data(ctx, 0);
    DiscreteData d2 = project_data(ctx_scaled, 0);
    StationaryReport r1 = stationary_indicator(s.u, 0, ctx, d1);
    StationaryReport r2 = stationary_indicator(cu, 0, ctx_scaled, d2);
    CHECK(r2.eta == doctest::Approx(std::abs(c) * r1.eta).epsilon(1e-12));

    // Fully-discrete step components scale likewise.
    std::mt19937 rng(9);
    std::normal_distribution<double> nd;
    DGFunction u2(s.space);
    for (int i = 0; i < u2.coeff().size(); ++i)
        u2.coeff()[i] = s.u[0].coeff()[i] + 0.05 * nd(rng);
    DGFunction cu2(s.space);
    cu2.coeff() = c * u2.coeff();
    const double tau = 0.1;
    DGFunction a1p = elliptic_source(s.u[0], s.u[0], s.prob.source[0], 0.0, tau);
    DGFunction a1c = elliptic_source(s.u[0], u2, s.prob.source[0], tau, tau);
    DGFunction a2p = elliptic_source(cu[0], cu[0], scaled.source[0], 0.0, tau);
    DGFunction a2c = elliptic_source(cu[0], cu2, scaled.source[0], tau, tau);
    AssemblyContext cx1(s.space, s.prob, tau);
    AssemblyContext cx2(s.space, scaled, tau);
    StepEstimate e1 = estimate_step(s.u, {u2}, {a1p}, {a1c}, 0.0, tau, cx1);
    StepEstimate e2 = estimate_step(cu, {cu2}, {a2p}, {a2c}, 0.0, tau, cx2);
    CHECK(e2.s1[0] == doctest::Approx(c * c * e1.s1[0]).epsilon(1e-11));
    CHECK(e2.s2[0] == doctest::Approx(c * c * e1.s2[0]).epsilon(1e-11));
    CHECK(e2.s3[0] == doctest::Approx(c * c * e1.s3[0]).epsilon(1e-11));
    CHECK(e2.s4[0] == doctest::Approx(c * c * e1.s4[0]).epsilon(1e-11));
}

TEST_CASE("jump indicators decay under refinement of a fixed field") {
    auto prob = simple_problem(1.0, Vec2(0, 0));
    auto f = [](const Vec2& x) {
        return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y());
    };
    std::vector<double> s3;
    MeshPtr mesh = unit_mesh(2);
    for (int level = 0; level < 3; ++level) {
        auto space = std::make_shared<DGSpace>(mesh, 1);
        AssemblyContext ctx(space, prob, 0.0);
        auto u = l2_project(f, space);
        DGFunction a(space);
        StepEstimate est = estimate_step({u}, {u}, {a}, {a}, 0.0, 0.0, ctx);
        s3.push_back(est.s3[0]);
        mesh = uniform_refine(*mesh, 2);
    }
    for (size_t i = 1; i < s3.size(); ++i) CHECK(s3[i] <= 0.5 * s3[i - 1]);
}
