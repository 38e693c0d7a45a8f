#include "adr/adaptivity.hpp"
#include "adr/estimators.hpp"
#include "adr/io.hpp"
#include "adr/problems.hpp"

#include <doctest.h>

using namespace adr;

namespace {

struct StationaryLevel {
    double eta, theta, err;
    int dofs;
};

/// Solve the frozen example-1 snapshot on `levels` uniform meshes.
std::vector<StationaryLevel> stationary_sweep(double eps, int levels, int k) {
    ProblemSpec st = stationary_snapshot(example1(eps), 0.25);
    std::vector<StationaryLevel> out;
    MeshPtr mesh = build_structured(st.domain, 2, 2, st.boundary);
    for (int level = 0; level < levels; ++level) {
        auto space = std::make_shared<DGSpace>(mesh, k);
        AssemblyContext ctx(space, st, 0.0);
        StepOperators ops = make_step_operators(ctx);
        StepResult sol = solve_stationary(ctx, ops);
        REQUIRE(sol.converged);
        DiscreteData data = project_data(ctx, 0);
        StationaryReport rep = stationary_indicator(sol.u_new, 0, ctx, data);
        double err = stationary_dg_error(sol.u_new, 0, ctx, 0.0);
        out.push_back({rep.eta, rep.theta, err, space->dof()});
        mesh = uniform_refine(*mesh, 2);
    }
    return out;
}

} // namespace

TEST_CASE("stationary reliability and efficiency bands") {
    for (double eps : {1e-2, 1e-4}) {
        CAPTURE(eps);
        auto sweep = stationary_sweep(eps, 4, 2);
        for (const auto& lvl : sweep) {
            CAPTURE(lvl.dofs);
            // Reliability: error <= C (eta + Theta) with C <= 1.5, and the
            // bound does not degrade as eps shrinks.
            CHECK(lvl.err / (lvl.eta + lvl.theta) <= 1.5);
            // Efficiency: eta <= C (error + Theta) with C <= 10.
            CHECK(lvl.eta / (lvl.err + lvl.theta) <= 10.0);
        }
    }
}

TEST_CASE("stationary estimator tracks the error rate") {
    auto sweep = stationary_sweep(1e-2, 3, 2);
    for (size_t i = 1; i < sweep.size(); ++i) {
        double rate_err = std::log2(sweep[i - 1].err / sweep[i].err);
        double rate_eta = std::log2(sweep[i - 1].eta / sweep[i].eta);
        CAPTURE(rate_err);
        CAPTURE(rate_eta);
        double ratio = rate_eta / rate_err;
        CHECK(ratio >= 0.8);
        CHECK(ratio <= 1.25);
    }
}

TEST_CASE("uniform space-time refinement converges at first order") {
    ProblemSpec prob = example1(1e-2);
    MeshPtr mesh = build_structured(prob.domain, 2, 2, prob.boundary);
    double tau = 0.1;
    std::vector<double> errs;
    for (int level = 0; level < 3; ++level) {
        AdaptiveResult res = adaptive_run(prob, Tolerances::none(), mesh, tau,
                                          prob.final_time, 1);
        REQUIRE_FALSE(res.aborted);
        errs.push_back(res.trace.error.norm());
        mesh = uniform_refine(*mesh, 2);
        tau *= 0.5;
    }
    double rate = 0.5 * std::log2(errs.front() / errs.back());
    CAPTURE(errs);
    CHECK(rate >= 0.85);
}

TEST_CASE("newton converges fast along a resolved trajectory") {
    // Along an adaptive ex1 run the per-step Newton iteration count stays
    // small: the previous solution is a good initial guess.
    ProblemSpec prob = example1(1e-2);
    auto mesh = uniform_refine(*build_structured(prob.domain, 2, 2, prob.boundary), 2);
    AdaptiveResult res =
        adaptive_run(prob, Tolerances::none(), mesh, 0.05, 0.5, 2, {}, {}, false);
    REQUIRE_FALSE(res.aborted);
    for (size_t i = 1; i < res.trace.rows.size(); ++i)
        CHECK(res.trace.rows[i].newton_iters <= 5);
}
