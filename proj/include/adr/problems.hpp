#pragma once

#include "adr/problem.hpp"
#include "adr/solver.hpp"

namespace adr {

/// Piecewise-constant permeability: a background value with rectangular
/// streaks multiplied by a fixed factor (strictly positive everywhere).
struct PermeabilityField {
    double background = 1e-3;
    double multiplier = 100.0;
    std::vector<Rect> streaks;

    static PermeabilityField three_streaks();
    double operator()(const Vec2& x) const {
        for (const Rect& r : streaks)
            if (r.contains(x, 0.0)) return background * multiplier;
        return background;
    }
};

/// Polynomial non-linearity r(u) = u^4 on the unit square with a circular
/// internal layer; manufactured source. eps defaults to the benchmark value
/// and is parameterizable for estimator studies.
ProblemSpec example1(double eps = 1e-6);

/// Coupled two-component system with r_1 = r_2 = u1 u2 and opposite
/// convection; two tanh fronts moving toward each other.
ProblemSpec example2();

/// Travelling wave with r(u) = gamma u^2 (u - 1), f = 0.
ProblemSpec example3();

struct Example4Options {
    PermeabilityField permeability = PermeabilityField::three_streaks();
    double mu = 0.1;
    int darcy_nx = 30, darcy_ny = 20;
    int darcy_degree = 1;
};
/// Monod-type reaction transport through heterogeneous porous media; the
/// velocity comes from the Darcy pressure solve on its own mesh.
ProblemSpec example4(const Example4Options& opts = {});

/// The Darcy field of example 4, exposed for the CLI darcy mode and tests.
DarcyResult example4_darcy(const Example4Options& opts = {});

/// Freeze a time-dependent problem at time t: the stationary source is
/// f(x,t) - du/dt(x,t), so the exact stationary solution is u(.,t).
/// Requires exact_dt.
ProblemSpec stationary_snapshot(const ProblemSpec& prob, double t);

} // namespace adr
