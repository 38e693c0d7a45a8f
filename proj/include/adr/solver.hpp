#pragma once

#include "adr/assembly.hpp"

#include <optional>

namespace adr {

struct NewtonSettings {
    double abs_tol_scale = 1e-10; // absolute tol = scale * sqrt(dof)
    double rel_tol = 1e-10;       // reduction relative to the first residual
    int max_iterations = 25;
    bool damping = true; // halving line search, only on residual increase
    int max_halvings = 8;
};

struct NewtonHistory {
    std::vector<double> residual_norms; // [0] = initial residual
    std::vector<int> halvings;          // per accepted iteration
};

struct StepResult {
    std::vector<DGFunction> u_new;
    int iterations = 0;
    double residual_norm = 0.0;
    bool converged = false;
    NewtonHistory history;
};

/// Deterministic sparse direct solve (LU); throws on breakdown and verifies
/// the residual bound |Ax-b| <= 1e-10 (|A|_max |x| + |b|).
Eigen::VectorXd linear_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs);

/// Operators that only change with (mesh, t): mass, stiffness per component,
/// load per component.
struct StepOperators {
    SparseMatrix mass;
    std::vector<SparseMatrix> stiffness;
    std::vector<Eigen::VectorXd> load;
    double time = 0.0;
};
StepOperators make_step_operators(const AssemblyContext& ctx);

/// One backward-Euler step by Newton on
///   Res(u) = M(u - w) + tau (S u + b(u) - f) = 0
/// with w = u_prev (already transferred to ctx.space) and initial guess w.
/// Coupled components are solved monolithically.
StepResult backward_euler_step(const std::vector<DGFunction>& u_prev, double tau,
                               const AssemblyContext& ctx,
                               const StepOperators& ops,
                               const NewtonSettings& settings = {});

/// Stationary solve S u + b(u) = f by the same Newton iteration.
StepResult solve_stationary(const AssemblyContext& ctx,
                            const StepOperators& ops,
                            const NewtonSettings& settings = {},
                            const std::vector<DGFunction>* initial = nullptr);

/// Darcy pressure solve div((k/mu) grad p) = 0 with p fixed on the left and
/// right sides and no-flux top/bottom; the returned velocity evaluates
/// -(k/mu) grad p element-wise and a conservative flux on mesh edges.
struct DarcyResult {
    DGFunction pressure;
    std::function<Vec2(const Vec2&)> velocity;
    std::shared_ptr<const ProblemSpec> pressure_problem;
};
DarcyResult darcy_solve(std::function<double(const Vec2&)> permeability,
                        double mu, MeshPtr mesh, int degree,
                        double p_left = 1.0, double p_right = 0.0);

} // namespace adr
