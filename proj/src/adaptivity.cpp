#include "adr/adaptivity.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace adr {

std::pair<std::set<int>, std::set<int>> mark(const Eigen::VectorXd& s1_local,
                                             const Mesh& mesh,
                                             const Tolerances& tol) {
    return mark_coupled({s1_local}, mesh, tol);
}

std::pair<std::set<int>, std::set<int>>
mark_coupled(const std::vector<Eigen::VectorXd>& s1_local, const Mesh& mesh,
             const Tolerances& tol) {
    for (const auto& v : s1_local)
        if (v.size() != mesh.leaf_count())
            throw std::invalid_argument("mark: value/mesh mismatch");
    std::set<int> refine_set, coarsen_set;
    for (int li = 0; li < mesh.leaf_count(); ++li) {
        bool any_above = false, all_below = true;
        for (const auto& v : s1_local) {
            if (v[li] > tol.stol_plus) any_above = true;
            if (!(v[li] < tol.stol_minus)) all_below = false;
        }
        if (any_above)
            refine_set.insert(mesh.leaves[li]);
        else if (all_below)
            coarsen_set.insert(mesh.leaves[li]);
    }
    return {refine_set, coarsen_set};
}

double weighted_dofs(const AdaptiveTrace& trace) {
    if (trace.rows.size() <= 1 || trace.total_time <= 0.0)
        throw std::invalid_argument("weighted_dofs: empty trace");
    return trace.weighted_dof_sum / trace.total_time;
}

namespace {

struct MeshState {
    MeshPtr mesh;
    SpacePtr space;
    StepOperators ops;
    double ops_time = 0.0;
};

MeshState make_state(MeshPtr mesh, int degree, const ProblemSpec& prob,
                     double t) {
    MeshState st;
    st.mesh = std::move(mesh);
    st.space = std::make_shared<DGSpace>(st.mesh, degree);
    AssemblyContext ctx(st.space, prob, t);
    st.ops = make_step_operators(ctx);
    st.ops_time = t;
    return st;
}

void refresh_operators(MeshState& st, const ProblemSpec& prob, double t) {
    AssemblyContext ctx(st.space, prob, t);
    if (!prob.static_velocity && t != st.ops_time) {
        st.ops = make_step_operators(ctx);
    } else {
        // Only the load is time-dependent for static data.
        for (int c = 0; c < prob.n_components; ++c)
            st.ops.load[c] = assemble_load(ctx, c);
    }
    st.ops_time = t;
}

std::vector<DGFunction> project_initial(const ProblemSpec& prob,
                                        const SpacePtr& space) {
    std::vector<DGFunction> u;
    for (int c = 0; c < prob.n_components; ++c)
        u.push_back(l2_project(prob.initial[c], space));
    return u;
}

std::vector<DGFunction> transfer(const std::vector<DGFunction>& u,
                                 const SpacePtr& target) {
    std::vector<DGFunction> out;
    out.reserve(u.size());
    for (const auto& f : u) out.push_back(l2_project(f, target));
    return out;
}

void log_newton(std::ostream* os, int step, const StepResult& res) {
    if (!os) return;
    for (size_t i = 0; i < res.history.residual_norms.size(); ++i) {
        char buf[160];
        int halv = i == 0 ? 0 : res.history.halvings[i - 1];
        std::snprintf(buf, sizeof(buf), "%d,%zu,%.17g,%d\n", step, i,
                      res.history.residual_norms[i], halv);
        *os << buf;
    }
}

bool temporal_ok(const StepEstimate& est, const Tolerances& tol) {
    for (double v : est.eta_T_tilde_sq)
        if (v > tol.ttol) return false;
    return true;
}

} // namespace

AdaptiveResult adaptive_run(const ProblemSpec& prob, const Tolerances& tol,
                            MeshPtr mesh0, double tau0, double final_time,
                            int degree, const AdaptiveCallbacks& cb,
                            const NewtonSettings& newton, bool track_error) {
    tol.validate();
    if (!(tau0 > 0.0) || !(final_time > 0.0))
        throw std::invalid_argument("adaptive_run: tau0, T > 0");
    const int J = prob.n_components;
    const double tau_min = tau0 * std::pow(2.0, -20);

    AdaptiveResult out;
    AdaptiveTrace& trace = out.trace;
    trace.run.assign(J, RunEstimate{});

    MeshState st = make_state(std::move(mesh0), degree, prob, 0.0);
    std::vector<DGFunction> u_prev = project_initial(prob, st.space);

    // Initial pseudo-step: A^0, eta_{S1,0}, eta_{S3,0}, ||e(0)||.
    AssemblyContext ctx0(st.space, prob, 0.0);
    std::vector<DGFunction> a_prev = initial_elliptic_source(ctx0, st.ops, u_prev);
    StepEstimate est0 = estimate_step(u_prev, u_prev, a_prev, a_prev, 0.0, 0.0, ctx0);
    double e0_sq = 0.0;
    for (int c = 0; c < J; ++c) {
        double e = l2_error(prob.initial[c], u_prev[c], 4);
        e0_sq += e * e;
    }
    trace.initial_error_sq = e0_sq;
    for (int c = 0; c < J; ++c)
        trace.run[c].set_initial(e0_sq, est0.s1[c], est0.s3[c], est0.rho_T);
    if (prob.has_exact && track_error) {
        trace.has_error = true;
        trace.error.add_endpoint(u_prev, 0.0, ctx0);
    }
    {
        TraceRow row;
        row.step = 0;
        row.t = 0.0;
        row.tau = 0.0;
        row.dofs = st.space->dof() * J;
        row.union_dofs = est0.union_dofs;
        row.s1 = est0.s1;
        row.s2 = est0.s2;
        row.s3 = est0.s3;
        row.s4 = est0.s4;
        row.t_tilde = est0.eta_T_tilde_sq;
        trace.rows.push_back(row);
        if (cb.on_step) cb.on_step(row);
        if (cb.on_solution) cb.on_solution(row, u_prev, est0);
    }

    double t = 0.0;
    int step = 0;
    while (t < final_time - 1e-12 * final_time) {
        ++step;
        double tau = std::min(tau0, final_time - t);
        int halvings = 0;

        // Solve; halve the interval until Newton converges and the modified
        // temporal indicator passes. A diverging Newton iteration is treated
        // like a rejected interval (smaller steps restore contraction).
        AssemblyContext ctx(st.space, prob, t + tau);
        StepResult sol;
        std::vector<DGFunction> a_curr(J);
        StepEstimate est;
        while (true) {
            refresh_operators(st, prob, t + tau);
            ctx = AssemblyContext(st.space, prob, t + tau);
            sol = backward_euler_step(u_prev, tau, ctx, st.ops, newton);
            log_newton(cb.newton_log, step, sol);
            if (sol.converged) {
                for (int c = 0; c < J; ++c)
                    a_curr[c] = elliptic_source(u_prev[c], sol.u_new[c],
                                                prob.source[c], t + tau, tau);
                est = estimate_step(u_prev, sol.u_new, a_prev, a_curr, t,
                                    t + tau, ctx);
                if (temporal_ok(est, tol)) break;
            }
            tau *= 0.5;
            ++halvings;
            if (tau < tau_min) {
                out.aborted = true;
                out.abort_reason =
                    sol.converged
                        ? "temporal tolerance unreachable (tau underflow)"
                        : "Newton failed at step " + std::to_string(step);
                break;
            }
        }
        if (out.aborted) break;

        // Spatial marking on the temporally accepted solve.
        std::vector<Eigen::VectorXd> marker_values;
        for (int c = 0; c < J; ++c)
            marker_values.push_back(est.s1_on_current(c, *st.mesh));
        auto [refine_set, coarsen_set] = mark_coupled(marker_values, *st.mesh, tol);

        int refined = static_cast<int>(refine_set.size());
        int coarsened = 0;
        if (!refine_set.empty() || !coarsen_set.empty()) {
            MeshPtr refined_mesh = refine(*st.mesh, refine_set);
            std::set<int> coarsen_valid;
            for (int id : coarsen_set)
                if (refined_mesh->tris[id].is_leaf()) coarsen_valid.insert(id);
            MeshPtr new_mesh = coarsen(*refined_mesh, coarsen_valid);
            coarsened = refined_mesh->leaf_count() - new_mesh->leaf_count();
            bool changed = new_mesh->leaf_count() != st.mesh->leaf_count() ||
                           refined > 0;
            if (changed) {
                MeshState st_new = make_state(new_mesh, degree, prob, t + tau);
                std::vector<DGFunction> w = transfer(u_prev, st_new.space);
                AssemblyContext ctx_new(st_new.space, prob, t + tau);
                StepResult sol_new =
                    backward_euler_step(w, tau, ctx_new, st_new.ops, newton);
                log_newton(cb.newton_log, step, sol_new);
                if (!sol_new.converged) {
                    out.aborted = true;
                    out.abort_reason =
                        "Newton failed after refinement at step " +
                        std::to_string(step);
                    break;
                }
                std::vector<DGFunction> a_new(J);
                for (int c = 0; c < J; ++c)
                    a_new[c] = elliptic_source(u_prev[c], sol_new.u_new[c],
                                               prob.source[c], t + tau, tau);
                est = estimate_step(u_prev, sol_new.u_new, a_prev, a_new, t,
                                    t + tau, ctx_new);
                sol = std::move(sol_new);
                a_curr = std::move(a_new);
                st = std::move(st_new);
                ctx = ctx_new;
            }
        }

        // Accept the step.
        double t_new = t + tau;
        for (int c = 0; c < J; ++c) trace.run[c].add_step(tau, est, c);
        if (trace.has_error) {
            trace.error.add_interval(u_prev, sol.u_new, t, t_new, ctx);
            trace.error.add_endpoint(sol.u_new, t_new, ctx);
        }
        trace.total_time += tau;
        trace.weighted_dof_sum += tau * est.union_dofs;

        TraceRow row;
        row.step = step;
        row.t = t_new;
        row.tau = tau;
        row.dofs = st.space->dof() * J;
        row.union_dofs = est.union_dofs;
        row.s1 = est.s1;
        row.s2 = est.s2;
        row.s3 = est.s3;
        row.s4 = est.s4;
        row.t_tilde = est.eta_T_tilde_sq;
        row.newton_iters = sol.iterations;
        row.refined = refined;
        row.coarsened = coarsened;
        row.halvings = halvings;
        trace.rows.push_back(row);
        if (cb.on_step) cb.on_step(row);
        if (cb.on_solution) cb.on_solution(row, sol.u_new, est);

        u_prev = std::move(sol.u_new);
        a_prev = std::move(a_curr);
        t = t_new;
    }

    out.u_final = std::move(u_prev);
    out.final_mesh = st.mesh;
    return out;
}

PrepareResult prepare_initial_mesh(const ProblemSpec& prob,
                                   const Tolerances& tol, MeshPtr coarse,
                                   double tau0, int degree,
                                   const NewtonSettings& newton) {
    tol.validate();
    PrepareResult out;
    out.mesh = std::move(coarse);
    out.tau = tau0;
    const int J = prob.n_components;
    const double tau_min = tau0 * std::pow(2.0, -20);

    for (int iter = 0; iter < 30; ++iter) {
        out.iterations = iter + 1;
        MeshState st = make_state(out.mesh, degree, prob, out.tau);
        std::vector<DGFunction> u0 = project_initial(prob, st.space);
        AssemblyContext ctx0(st.space, prob, 0.0);
        // Load in ops is at t = tau (set by make_state); rebuild A^0 data at 0.
        StepOperators ops0 = st.ops;
        {
            AssemblyContext c0(st.space, prob, 0.0);
            for (int c = 0; c < J; ++c) ops0.load[c] = assemble_load(c0, c);
        }
        std::vector<DGFunction> a0 = initial_elliptic_source(ctx0, ops0, u0);

        AssemblyContext ctx(st.space, prob, out.tau);
        StepResult sol = backward_euler_step(u0, out.tau, ctx, st.ops, newton);
        if (!sol.converged) {
            // Under-resolved data can defeat Newton outright; a shorter
            // interval restores contraction before any marking happens.
            out.tau *= 0.5;
            if (out.tau < tau_min) return out;
            continue;
        }
        std::vector<DGFunction> a1(J);
        for (int c = 0; c < J; ++c)
            a1[c] = elliptic_source(u0[c], sol.u_new[c], prob.source[c], out.tau,
                                    out.tau);
        StepEstimate est =
            estimate_step(u0, sol.u_new, a0, a1, 0.0, out.tau, ctx);

        bool t_ok = temporal_ok(est, tol);
        std::vector<Eigen::VectorXd> marker_values;
        for (int c = 0; c < J; ++c)
            marker_values.push_back(est.s1_on_current(c, *st.mesh));
        auto [refine_set, coarsen_set] = mark_coupled(marker_values, *st.mesh, tol);
        (void)coarsen_set; // preparation only refines

        if (t_ok && refine_set.empty()) {
            out.converged = true;
            return out;
        }
        if (!t_ok) {
            out.tau *= 0.5;
            if (out.tau < tau_min) return out;
        }
        if (!refine_set.empty()) out.mesh = refine(*out.mesh, refine_set);
    }
    return out;
}

} // namespace adr
