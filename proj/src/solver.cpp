#include "adr/solver.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <stdexcept>

namespace adr {

Eigen::VectorXd linear_solve(const SparseMatrix& a, const Eigen::VectorXd& rhs) {
    if (a.rows() != a.cols() || a.rows() != rhs.size())
        throw std::invalid_argument("linear_solve: dimension mismatch");
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("linear_solve: factorization failed (singular?)");
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("linear_solve: backsubstitution failed");
    double amax = 0.0;
    for (int k = 0; k < a.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(a, k); it; ++it)
            amax = std::max(amax, std::abs(it.value()));
    double bound = 1e-10 * (amax * x.norm() + rhs.norm());
    if ((a * x - rhs).norm() > std::max(bound, 1e-300))
        throw std::runtime_error("linear_solve: residual check failed");
    return x;
}

StepOperators make_step_operators(const AssemblyContext& ctx) {
    StepOperators ops;
    ops.time = ctx.time;
    ops.mass = assemble_mass(ctx);
    const int J = ctx.problem->n_components;
    for (int c = 0; c < J; ++c) {
        ops.stiffness.push_back(assemble_stiffness(ctx, c));
        ops.load.push_back(assemble_load(ctx, c));
    }
    return ops;
}

namespace {

/// Newton with optional halving line search. The residual and Jacobian
/// callbacks see the full stacked coefficient vector.
struct NewtonCore {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residual;
    std::function<SparseMatrix(const Eigen::VectorXd&)> jacobian;

    StepResult run(Eigen::VectorXd u, const NewtonSettings& s, int dof_total) {
        StepResult out;
        const double abs_tol = s.abs_tol_scale * std::sqrt(double(dof_total));
        Eigen::VectorXd res = residual(u);
        double rnorm = res.norm();
        const double r0 = rnorm;
        out.history.residual_norms.push_back(rnorm);

        int iter = 0;
        while (iter < s.max_iterations) {
            SparseMatrix jac = jacobian(u);
            Eigen::VectorXd delta = linear_solve(jac, -res);
            ++iter;

            double step = 1.0;
            int halvings = 0;
            Eigen::VectorXd u_try = u + delta;
            Eigen::VectorXd res_try = residual(u_try);
            if (s.damping) {
                while (res_try.norm() > rnorm && halvings < s.max_halvings) {
                    step *= 0.5;
                    ++halvings;
                    u_try = u + step * delta;
                    res_try = residual(u_try);
                }
                // No damped step improves: stop with the last good iterate
                // instead of accepting an uphill move.
                if (res_try.norm() > rnorm) break;
            }
            u = std::move(u_try);
            res = std::move(res_try);
            rnorm = res.norm();
            out.history.residual_norms.push_back(rnorm);
            out.history.halvings.push_back(halvings);

            if (rnorm <= abs_tol || rnorm <= s.rel_tol * r0) break;
        }
        out.iterations = iter;
        out.residual_norm = rnorm;
        out.converged = rnorm <= abs_tol || rnorm <= s.rel_tol * r0;
        carrier = std::move(u); // caller splits into components
        return out;
    }

    Eigen::VectorXd carrier;
};

std::vector<DGFunction> split_components(const Eigen::VectorXd& stacked,
                                         const SpacePtr& space, int J) {
    std::vector<DGFunction> out;
    const int dof = space->dof();
    for (int c = 0; c < J; ++c)
        out.emplace_back(space, stacked.segment(c * dof, dof));
    return out;
}

Eigen::VectorXd stack_components(const std::vector<DGFunction>& u) {
    const int dof = u.front().space().dof();
    Eigen::VectorXd out(dof * u.size());
    for (size_t c = 0; c < u.size(); ++c)
        out.segment(c * dof, dof) = u[c].coeff();
    return out;
}

SparseMatrix stack_block_diag(const SparseMatrix& mass,
                              const std::vector<SparseMatrix>& stiffness,
                              double tau) {
    const int J = static_cast<int>(stiffness.size());
    const int dof = mass.rows();
    std::vector<Eigen::Triplet<double>> trip;
    for (int c = 0; c < J; ++c) {
        for (int k = 0; k < mass.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(mass, k); it; ++it)
                trip.emplace_back(c * dof + it.row(), c * dof + it.col(), it.value());
        for (int k = 0; k < stiffness[c].outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(stiffness[c], k); it; ++it)
                trip.emplace_back(c * dof + it.row(), c * dof + it.col(),
                                  tau * it.value());
    }
    SparseMatrix out(J * dof, J * dof);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

} // namespace

StepResult backward_euler_step(const std::vector<DGFunction>& u_prev, double tau,
                               const AssemblyContext& ctx,
                               const StepOperators& ops,
                               const NewtonSettings& settings) {
    if (tau <= 0.0) throw std::invalid_argument("backward_euler_step: tau > 0");
    const SpacePtr space = ctx.space;
    const int J = ctx.problem->n_components;
    const int dof = space->dof();

    Eigen::VectorXd w = stack_components(u_prev);
    Eigen::VectorXd fvec(J * dof);
    for (int c = 0; c < J; ++c) fvec.segment(c * dof, dof) = ops.load[c];

    // M + tau S, reused across Newton iterations.
    SparseMatrix affine = stack_block_diag(ops.mass, ops.stiffness, tau);

    NewtonCore core;
    core.residual = [&](const Eigen::VectorXd& uu) {
        // Res = M u - M w + tau (S u + b - f); affine*u holds M u + tau S u.
        auto comps = split_components(uu, space, J);
        Eigen::VectorXd b = assemble_reaction(ctx, comps, false).b;
        Eigen::VectorXd res = affine * uu;
        for (int c = 0; c < J; ++c)
            res.segment(c * dof, dof) -= ops.mass * w.segment(c * dof, dof);
        res += tau * (b - fvec);
        return res;
    };
    core.jacobian = [&](const Eigen::VectorXd& uu) {
        auto comps = split_components(uu, space, J);
        SparseMatrix jb = assemble_reaction(ctx, comps, true).jac;
        SparseMatrix jac = affine + tau * jb;
        return jac;
    };

    StepResult out = core.run(w, settings, J * dof);
    out.u_new = split_components(core.carrier, space, J);
    return out;
}

StepResult solve_stationary(const AssemblyContext& ctx, const StepOperators& ops,
                            const NewtonSettings& settings,
                            const std::vector<DGFunction>* initial) {
    const SpacePtr space = ctx.space;
    const int J = ctx.problem->n_components;
    const int dof = space->dof();

    Eigen::VectorXd fvec(J * dof);
    for (int c = 0; c < J; ++c) fvec.segment(c * dof, dof) = ops.load[c];

    SparseMatrix s_stacked = stack_block_diag(
        SparseMatrix(dof, dof), ops.stiffness, 1.0); // zero mass contribution

    NewtonCore core;
    core.residual = [&](const Eigen::VectorXd& uu) {
        auto comps = split_components(uu, space, J);
        Eigen::VectorXd b = assemble_reaction(ctx, comps, false).b;
        return Eigen::VectorXd(s_stacked * uu + b - fvec);
    };
    core.jacobian = [&](const Eigen::VectorXd& uu) {
        auto comps = split_components(uu, space, J);
        SparseMatrix jb = assemble_reaction(ctx, comps, true).jac;
        SparseMatrix jac = s_stacked + jb;
        return jac;
    };

    Eigen::VectorXd u0 = initial ? stack_components(*initial)
                                 : Eigen::VectorXd::Zero(J * dof);
    StepResult out = core.run(std::move(u0), settings, J * dof);
    out.u_new = split_components(core.carrier, space, J);
    return out;
}

// ---------------------------------------------------------------------------
// Darcy

namespace {

/// Conservative velocity from the SIPG pressure solve: interior points use
/// -(k/mu) grad p of the containing element, points on mesh edges use the
/// averaged flux plus the penalty-jump correction so element-wise flux
/// balance matches the discrete scheme exactly.
class DarcyVelocity {
public:
    DarcyVelocity(DGFunction pressure, std::function<double(const Vec2&)> k,
                  double mu, std::shared_ptr<const ProblemSpec> prob,
                  double sigma_int, double sigma_bnd)
        : p_(std::move(pressure)), k_(std::move(k)), mu_(mu),
          prob_(std::move(prob)), sigma_int_(sigma_int), sigma_bnd_(sigma_bnd) {}

    Vec2 operator()(const Vec2& x) const {
        const Mesh& mesh = p_.space().mesh();
        int t = mesh.locate(x);
        int li = mesh.leaf_index(t);
        // Edge proximity test.
        int best_edge = -1;
        double best_dist = std::numeric_limits<double>::max();
        for (int eid : mesh.leaf_edges()[li]) {
            const Edge& e = mesh.edges[eid];
            Vec2 a = mesh.vertices[e.v[0]].x, b = mesh.vertices[e.v[1]].x;
            Vec2 ab = b - a;
            double s = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
            double d = (a + s * ab - x).norm();
            if (d < best_dist) best_dist = d, best_edge = eid;
        }
        double h = mesh.diameter(t);
        if (best_edge >= 0 && best_dist < 1e-9 * h) return edge_value(best_edge, x);
        return interior_value(t, x);
    }

private:
    Vec2 interior_value(int t, const Vec2& x) const {
        return -(k_(x) / mu_) * p_.eval_grad(t, x);
    }

    Vec2 edge_value(int eid, const Vec2& x) const {
        const Mesh& mesh = p_.space().mesh();
        const Edge& e = mesh.edges[eid];
        const double theta = 1e-6;
        Vec2 ci = mesh.centroid(e.left);
        Vec2 xi = x + theta * (ci - x);
        Vec2 flux_i = -(k_(xi) / mu_) * p_.eval_grad(e.left, x);
        double ki = k_(mesh.centroid(e.left));
        if (e.right >= 0) {
            Vec2 cj = mesh.centroid(e.right);
            Vec2 xj = x + theta * (cj - x);
            Vec2 flux_j = -(k_(xj) / mu_) * p_.eval_grad(e.right, x);
            double kj = k_(mesh.centroid(e.right));
            double eps_e = 0.5 * (ki + kj) / mu_;
            double jump = p_.eval(e.left, x) - p_.eval(e.right, x);
            return 0.5 * (flux_i + flux_j) +
                   (sigma_int_ * eps_e / e.length) * jump * e.normal;
        }
        if (e.kind == EdgeKind::Dirichlet) {
            double eps_e = ki / mu_;
            double jump = p_.eval(e.left, x) - prob_->dirichlet[0](x, 0.0);
            return flux_i + (sigma_bnd_ * eps_e / e.length) * jump * e.normal;
        }
        // No-flux side: keep the tangential part only.
        return flux_i - flux_i.dot(e.normal) * e.normal;
    }

    DGFunction p_;
    std::function<double(const Vec2&)> k_;
    double mu_;
    std::shared_ptr<const ProblemSpec> prob_;
    double sigma_int_, sigma_bnd_;
};

} // namespace

DarcyResult darcy_solve(std::function<double(const Vec2&)> permeability,
                        double mu, MeshPtr mesh, int degree, double p_left,
                        double p_right) {
    if (mu <= 0.0) throw std::invalid_argument("darcy_solve: mu > 0");
    auto prob = std::make_shared<ProblemSpec>();
    prob->name = "darcy-pressure";
    prob->n_components = 1;
    prob->domain = mesh->domain;
    auto k = permeability;
    prob->diffusion = {[k, mu](const Vec2& x) {
        double v = k(x) / mu;
        if (v <= 0.0)
            throw std::runtime_error("darcy_solve: permeability must be positive");
        return Mat2(v * Mat2::Identity());
    }};
    prob->velocity = {[](const Vec2&, double) { return Vec2::Zero().eval(); }};
    prob->velocity_div = {[](const Vec2&, double) { return 0.0; }};
    prob->source = {[](const Vec2&, double) { return 0.0; }};
    const Rect dom = mesh->domain;
    prob->dirichlet = {[dom, p_left, p_right](const Vec2& x, double) {
        return std::abs(x.x() - dom.x0) < std::abs(x.x() - dom.x1) ? p_left
                                                                   : p_right;
    }};
    prob->boundary = [dom](const Vec2& mid) {
        double tol = 1e-10 * (1.0 + dom.width());
        if (std::abs(mid.x() - dom.x0) < tol || std::abs(mid.x() - dom.x1) < tol)
            return EdgeKind::Dirichlet;
        return EdgeKind::Neumann;
    };
    prob->initial = {[](const Vec2&) { return 0.0; }};
    prob->kappa = 0.0;

    // The mesh may carry a different classifier; rebuild with the Darcy one.
    auto pmesh = std::make_shared<Mesh>(*mesh);
    const_cast<Mesh&>(*pmesh).boundary = prob->boundary;
    const_cast<Mesh&>(*pmesh).rebuild_derived();

    auto space = std::make_shared<DGSpace>(pmesh, degree);
    AssemblyContext ctx(space, *prob, 0.0);
    StepOperators ops = make_step_operators(ctx);
    StepResult sol = solve_stationary(ctx, ops);
    if (!sol.converged)
        throw std::runtime_error("darcy_solve: pressure solve did not converge");

    DarcyResult out;
    out.pressure = sol.u_new[0];
    out.pressure_problem = prob;
    auto vel = std::make_shared<DarcyVelocity>(out.pressure, permeability, mu,
                                                prob, ctx.sigma_interior,
                                                ctx.sigma_boundary);
    out.velocity = [vel](const Vec2& x) { return (*vel)(x); };
    return out;
}

} // namespace adr
