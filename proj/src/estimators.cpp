#include "adr/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace adr {

double weight_rho(double h, double eps_scalar, double kappa) {
    double base = h / std::sqrt(eps_scalar);
    if (kappa > 0.0) return std::min(base, 1.0 / std::sqrt(kappa));
    return base;
}

double weight_rho_T(double eps_scalar, double kappa) {
    double base = 1.0 / std::sqrt(eps_scalar);
    if (kappa > 0.0) return std::min(base, 1.0 / std::sqrt(kappa));
    return base;
}

namespace {

struct EdgePoints {
    std::vector<Vec2> x;
    const QuadratureRule* rule;
};

EdgePoints edge_points(const Mesh& mesh, const Edge& e, int exactness) {
    EdgePoints out;
    out.rule = &quadrature(RuleKind::Edge, exactness);
    Vec2 pa = mesh.vertices[e.v[0]].x, pb = mesh.vertices[e.v[1]].x;
    out.x.resize(out.rule->size());
    for (int q = 0; q < out.rule->size(); ++q)
        out.x[q] = pa + out.rule->points[q].x() * (pb - pa);
    return out;
}

/// Jump-type edge accumulation shared by the norms: returns
/// sum_e w(e) int [v]^2 with [v] = v_left - v_right on interior edges and
/// v - g on Dirichlet edges when g is given.
double jump_square_sum(const DGFunction& v, const AssemblyContext& ctx, int comp,
                       const std::function<double(const Vec2&, double)>* g,
                       const std::function<double(const Edge&, double)>& weight) {
    const Mesh& mesh = v.space().mesh();
    double acc = 0.0;
    for (const Edge& e : mesh.edges) {
        bool use = !e.is_boundary() || (g && e.kind == EdgeKind::Dirichlet);
        if (!use) continue;
        double eps_e = ctx.eps_scalar_edge(e, comp);
        EdgePoints ep = edge_points(mesh, e, ctx.quad_exactness);
        double integral = 0.0;
        for (size_t q = 0; q < ep.x.size(); ++q) {
            double jump = v.eval(e.left, ep.x[q]);
            if (e.is_boundary())
                jump -= (*g)(ep.x[q], ctx.time);
            else
                jump -= v.eval(e.right, ep.x[q]);
            integral += ep.rule->weights[q] * e.length * jump * jump;
        }
        acc += weight(e, eps_e) * integral;
    }
    return acc;
}

} // namespace

double energy_norm(const DGFunction& v, const AssemblyContext& ctx, int comp,
                   const std::function<double(const Vec2&, double)>* g) {
    const DGSpace& sp = v.space();
    const ProblemSpec& prob = *ctx.problem;
    const QuadratureRule& vol = quadrature(RuleKind::Triangle, ctx.quad_exactness);
    double acc = 0.0;
    for (int li = 0; li < sp.mesh().leaf_count(); ++li) {
        int t = sp.mesh().leaves[li];
        const auto& geo = sp.geom(li);
        for (int q = 0; q < vol.size(); ++q) {
            Vec2 x = sp.to_physical(li, vol.points[q]);
            Vec2 gr = v.eval_grad(t, x);
            double val = v.eval(t, x);
            Mat2 eps = prob.diffusion[comp](x);
            acc += vol.weights[q] * geo.det_jac *
                   (gr.dot(eps * gr) + prob.kappa * val * val);
        }
    }
    acc += jump_square_sum(v, ctx, comp, g, [&](const Edge& e, double eps_e) {
        double sigma = ctx.sigma(e.is_boundary() ? e.kind : EdgeKind::Interior);
        return eps_e * sigma / e.length;
    });
    return std::sqrt(acc);
}

double jump_seminorm_part(const DGFunction& v, const AssemblyContext& ctx,
                          int comp,
                          const std::function<double(const Vec2&, double)>* g) {
    const double kappa = ctx.problem->kappa;
    return jump_square_sum(v, ctx, comp, g, [&](const Edge& e, double eps_e) {
        return kappa * e.length + e.length / eps_e;
    });
}

DiscreteData project_data(const AssemblyContext& ctx, int comp) {
    const ProblemSpec& prob = *ctx.problem;
    const double t = ctx.time;
    DiscreteData out;
    out.f_h = l2_project(
        [&](const Vec2& x) { return prob.source[comp](x, t); }, ctx.space);
    for (int d = 0; d < 2; ++d)
        out.beta_h[d] = l2_project(
            [&, d](const Vec2& x) { return prob.velocity[comp](x, t)[d]; },
            ctx.space);
    return out;
}

StationaryReport stationary_indicator(const std::vector<DGFunction>& u, int comp,
                                      const AssemblyContext& ctx,
                                      const DiscreteData& data) {
    const DGSpace& sp = *ctx.space;
    const Mesh& mesh = sp.mesh();
    const ProblemSpec& prob = *ctx.problem;
    const double t = ctx.time;
    const double kappa = prob.kappa;
    const int J = prob.n_components;
    const int n = mesh.leaf_count();

    StationaryReport rep;
    rep.eta_R = Eigen::VectorXd::Zero(n);
    rep.eta_E = Eigen::VectorXd::Zero(n);
    rep.eta_J = Eigen::VectorXd::Zero(n);
    rep.theta_K = Eigen::VectorXd::Zero(n);

    const QuadratureRule& vol = quadrature(RuleKind::Triangle, ctx.quad_exactness);
    Eigen::VectorXd uval(J);
    for (int li = 0; li < n; ++li) {
        int tid = mesh.leaves[li];
        const auto& geo = sp.geom(li);
        double eps_k = ctx.eps_scalar_elem(tid, comp);
        double rho = weight_rho(geo.diameter, eps_k, kappa);
        double racc = 0.0, tacc = 0.0;
        for (int q = 0; q < vol.size(); ++q) {
            Vec2 x = sp.to_physical(li, vol.points[q]);
            Mat2 eps = prob.diffusion[comp](x);
            for (int c = 0; c < J; ++c) uval[c] = u[c].eval(tid, x);
            Mat2 hess = u[comp].eval_hessian(tid, x);
            Vec2 grad = u[comp].eval_grad(tid, x);
            Vec2 beta_h(data.beta_h[0].eval(tid, x), data.beta_h[1].eval(tid, x));
            double resid = data.f_h.eval(tid, x) + (eps.array() * hess.array()).sum() -
                           beta_h.dot(grad) - prob.reaction_at(x, uval, comp);
            racc += vol.weights[q] * geo.det_jac * resid * resid;

            Vec2 beta = prob.velocity[comp](x, t);
            double df = prob.source[comp](x, t) - data.f_h.eval(tid, x);
            double db = (beta - beta_h).dot(grad);
            tacc += vol.weights[q] * geo.det_jac * (df * df + db * db);
        }
        rep.eta_R[li] = rho * rho * racc;
        rep.theta_K[li] = rho * rho * tacc;
    }

    for (const Edge& e : mesh.edges) {
        double eps_e = ctx.eps_scalar_edge(e, comp);
        double rho_e = weight_rho(e.length, eps_e, kappa);
        EdgePoints ep = edge_points(mesh, e, ctx.quad_exactness);
        const double theta = 1e-6;
        Vec2 ci = mesh.centroid(e.left);
        Vec2 cj = e.right >= 0 ? mesh.centroid(e.right) : ci;

        if (!e.is_boundary() || e.kind == EdgeKind::Neumann) {
            // Diffusive-flux jump (one-sided residual on Neumann edges).
            double integral = 0.0;
            for (size_t q = 0; q < ep.x.size(); ++q) {
                Mat2 eps_i = prob.diffusion[comp](ep.x[q] + theta * (ci - ep.x[q]));
                double fl = (eps_i * u[comp].eval_grad(e.left, ep.x[q])).dot(e.normal);
                if (!e.is_boundary()) {
                    Mat2 eps_j =
                        prob.diffusion[comp](ep.x[q] + theta * (cj - ep.x[q]));
                    fl -= (eps_j * u[comp].eval_grad(e.right, ep.x[q])).dot(e.normal);
                }
                integral += ep.rule->weights[q] * e.length * fl * fl;
            }
            double w = rho_e / std::sqrt(eps_e) * integral;
            if (!e.is_boundary()) {
                rep.eta_E[mesh.leaf_index(e.left)] += 0.5 * w;
                rep.eta_E[mesh.leaf_index(e.right)] += 0.5 * w;
            } else {
                rep.eta_E[mesh.leaf_index(e.left)] += w;
            }
        }
        if (!e.is_boundary() || e.kind == EdgeKind::Dirichlet) {
            double sigma = ctx.sigma(e.is_boundary() ? e.kind : EdgeKind::Interior);
            double w = eps_e * sigma / e.length + kappa * e.length + e.length / eps_e;
            double integral = 0.0;
            for (size_t q = 0; q < ep.x.size(); ++q) {
                double jump = u[comp].eval(e.left, ep.x[q]);
                if (e.is_boundary())
                    jump -= prob.dirichlet[comp](ep.x[q], t);
                else
                    jump -= u[comp].eval(e.right, ep.x[q]);
                integral += ep.rule->weights[q] * e.length * jump * jump;
            }
            if (!e.is_boundary()) {
                rep.eta_J[mesh.leaf_index(e.left)] += 0.5 * w * integral;
                rep.eta_J[mesh.leaf_index(e.right)] += 0.5 * w * integral;
            } else {
                rep.eta_J[mesh.leaf_index(e.left)] += w * integral;
            }
        }
    }

    rep.eta_K = rep.eta_R + rep.eta_E + rep.eta_J;
    rep.eta = std::sqrt(rep.eta_K.sum());
    rep.theta = std::sqrt(rep.theta_K.sum());
    return rep;
}

DGFunction elliptic_source(const DGFunction& u_prev, const DGFunction& u_curr,
                           const std::function<double(const Vec2&, double)>& f,
                           double t_curr, double tau) {
    SpacePtr space = u_curr.space_ptr();
    DGFunction fp = l2_project(
        [&](const Vec2& x) { return f(x, t_curr); }, space);
    DGFunction up = l2_project(u_prev, space);
    DGFunction out(space);
    out.coeff() = fp.coeff() - (u_curr.coeff() - up.coeff()) / tau;
    return out;
}

std::vector<DGFunction> initial_elliptic_source(const AssemblyContext& ctx,
                                                const StepOperators& ops,
                                                const std::vector<DGFunction>& u0) {
    const int J = ctx.problem->n_components;
    Eigen::VectorXd b = assemble_reaction(ctx, u0, false).b;
    std::vector<DGFunction> out;
    const int dof = ctx.space->dof();
    auto zero_f = [](const Vec2&, double) { return 0.0; };
    for (int c = 0; c < J; ++c) {
        // The weak Dirichlet lifting belongs to the data, not to the
        // elliptic load: M A = S u0 + b(u0) - (g terms).
        Eigen::VectorXd lift = assemble_load(ctx, c, zero_f);
        Eigen::VectorXd rhs =
            ops.stiffness[c] * u0[c].coeff() + b.segment(c * dof, dof) - lift;
        out.emplace_back(ctx.space, linear_solve(ops.mass, rhs));
    }
    return out;
}

Eigen::VectorXd StepEstimate::s1_on_current(int comp, const Mesh& current) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(current.leaf_count());
    for (int li = 0; li < overlay.mesh->leaf_count(); ++li) {
        int cur_leaf = overlay.leaf_in_b[li];
        int ci = current.leaf_index(cur_leaf);
        if (ci < 0)
            throw std::runtime_error("s1_on_current: mesh mismatch");
        out[ci] += s1_local[comp][li];
    }
    return out;
}

StepEstimate estimate_step(const std::vector<DGFunction>& u_prev,
                           const std::vector<DGFunction>& u_curr,
                           const std::vector<DGFunction>& A_prev,
                           const std::vector<DGFunction>& A_curr,
                           double t_prev, double t_curr,
                           const AssemblyContext& ctx_curr) {
    const ProblemSpec& prob = *ctx_curr.problem;
    const int J = prob.n_components;
    const double kappa = prob.kappa;
    const double tau = t_curr - t_prev;
    const bool initial = !(tau > 0.0);

    StepEstimate est;
    if (u_prev[0].space().mesh_ptr() == u_curr[0].space().mesh_ptr()) {
        // Same mesh object: the overlay is the mesh itself.
        est.overlay.mesh = u_curr[0].space().mesh_ptr();
        est.overlay.leaf_in_a = est.overlay.mesh->leaves;
        est.overlay.leaf_in_b = est.overlay.mesh->leaves;
    } else {
        est.overlay = union_mesh(u_prev[0].space().mesh(), u_curr[0].space().mesh());
    }
    const Mesh& um = *est.overlay.mesh;
    const int n = um.leaf_count();
    est.union_dofs = n * u_curr[0].space().nloc() * J;
    est.s1_local.assign(J, Eigen::VectorXd::Zero(n));
    est.s1.assign(J, 0.0);
    est.s2.assign(J, 0.0);
    est.s3.assign(J, 0.0);
    est.s4.assign(J, 0.0);
    est.t1_int.assign(J, 0.0);
    est.t2_int.assign(J, 0.0);
    est.t2_sq_int.assign(J, 0.0);
    est.eta_T_tilde_sq.assign(J, 0.0);

    // Discrete data on the current space needed by S2.
    std::vector<DGFunction> f_proj, u_prev_proj;
    if (!initial)
        for (int c = 0; c < J; ++c) {
            f_proj.push_back(l2_project(
                [&, c](const Vec2& x) { return prob.source[c](x, t_curr); },
                u_curr[c].space_ptr()));
            u_prev_proj.push_back(l2_project(u_prev[c], u_curr[c].space_ptr()));
        }

    // Global scalar diffusion (most pessimistic over the overlay).
    double eps_global = std::numeric_limits<double>::max();
    for (int li = 0; li < n; ++li)
        for (int c = 0; c < J; ++c)
            eps_global =
                std::min(eps_global, prob.eps_min(um.centroid(um.leaves[li]), c));
    est.rho_T = weight_rho_T(eps_global, kappa);

    const QuadratureRule& vol =
        quadrature(RuleKind::Triangle, ctx_curr.quad_exactness);
    // 2-point Gauss in time on [t_prev, t_curr].
    const double gauss_pts[2] = {0.5 - 0.5 / std::sqrt(3.0),
                                 0.5 + 0.5 / std::sqrt(3.0)};

    // Per-Gauss-time global element sums; both the squared and unsquared
    // time integrals derive from them.
    std::vector<std::array<double, 2>> sum_t1(J, {0.0, 0.0});
    std::vector<std::array<double, 2>> sum_t2(J, {0.0, 0.0});

    Eigen::VectorXd uval(J);
    for (int li = 0; li < n; ++li) {
        int ut = um.leaves[li];
        int ta = est.overlay.leaf_in_a[li]; // leaf of u_prev's mesh
        int tb = est.overlay.leaf_in_b[li]; // leaf of u_curr's mesh
        Vec2 v0 = um.vertex(ut, 0);
        Mat2 jac;
        jac.col(0) = um.vertex(ut, 1) - v0;
        jac.col(1) = um.vertex(ut, 2) - v0;
        double det = jac.determinant();
        double h_k = um.diameter(ut);

        for (int c = 0; c < J; ++c) {
            double eps_k = prob.eps_min(um.centroid(ut), c);
            double rho = weight_rho(h_k, eps_k, kappa);
            double s1_acc = 0.0, s2_acc = 0.0;
            for (int q = 0; q < vol.size(); ++q) {
                Vec2 x = v0 + jac * vol.points[q];
                double w = vol.weights[q] * det;
                Mat2 eps = prob.diffusion[c](x);
                for (int j = 0; j < J; ++j) uval[j] = u_curr[j].eval(tb, x);
                Mat2 hess = u_curr[c].eval_hessian(tb, x);
                Vec2 grad = u_curr[c].eval_grad(tb, x);
                Vec2 beta_k = prob.velocity[c](x, t_curr);
                double resid = A_curr[c].eval(tb, x) +
                               (eps.array() * hess.array()).sum() -
                               beta_k.dot(grad) - prob.reaction_at(x, uval, c);
                s1_acc += w * resid * resid;

                if (initial) continue;

                double df = prob.source[c](x, t_curr) - f_proj[c].eval(tb, x);
                double du =
                    (u_prev[c].eval(ta, x) - u_prev_proj[c].eval(tb, x)) / tau;
                s2_acc += w * (df + du) * (df + du);

                double ucur = uval[c];
                double uprev = u_prev[c].eval(ta, x);
                double acur = A_curr[c].eval(tb, x);
                double aprev = A_prev[c].eval(ta, x);
                Vec2 beta_km1 = prob.velocity[c](x, t_prev);
                double div_k = prob.velocity_div[c](x, t_curr);
                double div_km1 = prob.velocity_div[c](x, t_prev);
                for (int gqi = 0; gqi < 2; ++gqi) {
                    double t = t_prev + gauss_pts[gqi] * tau;
                    double lk = (t - t_prev) / tau;
                    double lkm1 = (t_curr - t) / tau;
                    Vec2 beta_t = prob.velocity[c](x, t);
                    Vec2 v1 = lk * (beta_k - beta_t) * ucur +
                              lkm1 * (beta_km1 - beta_t) * uprev;
                    sum_t1[c][gqi] += w * v1.squaredNorm() / eps_k;
                    double div_t = prob.velocity_div[c](x, t);
                    double v2 = prob.source[c](x, t) - prob.source[c](x, t_curr) +
                                lkm1 * (acur - aprev) +
                                lk * (div_k - div_t) * ucur +
                                lk * (div_km1 - div_t) * uprev;
                    sum_t2[c][gqi] += w * v2 * v2;
                }
            }
            est.s1_local[c][li] += rho * rho * s1_acc;
            est.s2[c] += rho * rho * s2_acc;
        }
    }
    if (!initial)
        for (int c = 0; c < J; ++c) {
            // Both Gauss weights on [t_prev, t_curr] are tau/2.
            est.t1_int[c] = 0.5 * tau * (sum_t1[c][0] + sum_t1[c][1]);
            est.t2_sq_int[c] = 0.5 * tau * (sum_t2[c][0] + sum_t2[c][1]);
            est.t2_int[c] = 0.5 * tau * (std::sqrt(sum_t2[c][0]) +
                                         std::sqrt(sum_t2[c][1]));
        }

    // Edge sums over the overlay skeleton.
    for (const Edge& e : um.edges) {
        int li = um.leaf_index(e.left);
        int lj = e.right >= 0 ? um.leaf_index(e.right) : -1;
        int ta_l = est.overlay.leaf_in_a[li];
        int tb_l = est.overlay.leaf_in_b[li];
        int ta_r = lj >= 0 ? est.overlay.leaf_in_a[lj] : -1;
        int tb_r = lj >= 0 ? est.overlay.leaf_in_b[lj] : -1;
        EdgePoints ep = edge_points(um, e, ctx_curr.quad_exactness);
        const double theta_nudge = 1e-6;
        Vec2 ci = um.centroid(e.left);
        Vec2 cj = lj >= 0 ? um.centroid(e.right) : ci;

        for (int c = 0; c < J; ++c) {
            double eps_e_l = prob.eps_min(ci, c);
            double eps_e =
                lj >= 0 ? 0.5 * (eps_e_l + prob.eps_min(cj, c)) : eps_e_l;
            double rho_e = weight_rho(e.length, eps_e, kappa);
            double sigma =
                ctx_curr.sigma(e.is_boundary() ? e.kind : EdgeKind::Interior);
            double jump_w =
                eps_e * sigma / e.length + kappa * e.length + e.length / eps_e;

            double flux_sq = 0.0, jump_sq = 0.0, jump3_sq = 0.0, jump4_sq = 0.0;
            for (size_t q = 0; q < ep.x.size(); ++q) {
                const Vec2& x = ep.x[q];
                double wq = ep.rule->weights[q] * e.length;
                if (!e.is_boundary() || e.kind == EdgeKind::Neumann) {
                    Mat2 eps_i = prob.diffusion[c](x + theta_nudge * (ci - x));
                    double fl =
                        (eps_i * u_curr[c].eval_grad(tb_l, x)).dot(e.normal);
                    if (!e.is_boundary()) {
                        Mat2 eps_j = prob.diffusion[c](x + theta_nudge * (cj - x));
                        fl -= (eps_j * u_curr[c].eval_grad(tb_r, x)).dot(e.normal);
                    }
                    flux_sq += wq * fl * fl;
                }
                if (!e.is_boundary() || e.kind == EdgeKind::Dirichlet) {
                    double jc = u_curr[c].eval(tb_l, x);
                    double jp = initial ? 0.0 : u_prev[c].eval(ta_l, x);
                    if (!e.is_boundary()) {
                        jc -= u_curr[c].eval(tb_r, x);
                        if (!initial) jp -= u_prev[c].eval(ta_r, x);
                    } else {
                        jc -= prob.dirichlet[c](x, t_curr);
                        if (!initial) jp -= prob.dirichlet[c](x, t_prev);
                    }
                    jump_sq += wq * jc * jc;
                    jump3_sq += wq * jc * jc;
                    if (!initial) {
                        double d = (jc - jp) / tau;
                        jump4_sq += wq * d * d;
                    }
                }
            }
            double s1_edge = rho_e / std::sqrt(eps_e) * flux_sq + jump_w * jump_sq;
            if (lj >= 0) {
                est.s1_local[c][li] += 0.5 * s1_edge;
                est.s1_local[c][lj] += 0.5 * s1_edge;
            } else {
                est.s1_local[c][li] += s1_edge;
            }
            est.s3[c] += e.length * jump3_sq;
            est.s4[c] += e.length * jump4_sq;
        }
    }

    for (int c = 0; c < J; ++c) {
        est.s1[c] = est.s1_local[c].sum();
        if (!initial)
            est.eta_T_tilde_sq[c] =
                est.t1_int[c] +
                std::min(est.rho_T, prob.final_time) * est.t2_sq_int[c];
    }
    return est;
}

void RunEstimate::set_initial(double e0_sq, double s1_0_sq, double s3_0_sq,
                              double rho_t) {
    err0_sq = e0_sq;
    prev_s1 = s1_0_sq;
    s3_max = std::max(s3_max, s3_0_sq);
    rho_T = rho_t;
    started = true;
}

void RunEstimate::add_step(double tau, const StepEstimate& est, int comp) {
    if (!started) throw std::logic_error("RunEstimate: set_initial first");
    s1_time += tau * (prev_s1 + est.s1[comp]);
    prev_s1 = est.s1[comp];
    s2_time += tau * est.s2[comp];
    s3_max = std::max(s3_max, est.s3[comp]);
    s4_lin += tau * std::sqrt(est.s4[comp]);
    s4_quad += tau * est.s4[comp];
    t1 += est.t1_int[comp];
    t2_lin += est.t2_int[comp];
    t2_quad += est.t2_sq_int[comp];
    t_tilde_sum += est.eta_T_tilde_sq[comp];
    rho_T = est.rho_T; // overlay-dependent, keep the latest
}

double RunEstimate::eta_S_sq() const {
    return err0_sq + s1_time / 3.0 + s2_time + s3_max +
           std::min(s4_lin * s4_lin, rho_T * rho_T * s4_quad);
}

double RunEstimate::eta_T_sq() const {
    return t1 + std::min(t2_lin * t2_lin, rho_T * rho_T * t2_quad);
}

double effectivity(double estimate, double true_error) {
    if (true_error <= 0.0)
        throw std::invalid_argument("effectivity: zero true error");
    return estimate / true_error;
}

void TrueErrorAccum::add_endpoint(const std::vector<DGFunction>& u, double t,
                                  const AssemblyContext& ctx) {
    const ProblemSpec& prob = *ctx.problem;
    double sq = 0.0;
    for (int c = 0; c < prob.n_components; ++c) {
        double err = l2_error(
            [&](const Vec2& x) { return prob.exact[c](x, t); }, u[c], 4);
        sq += err * err;
    }
    linf_l2_sq = std::max(linf_l2_sq, sq);
    final_l2 = std::sqrt(sq);
}

void TrueErrorAccum::add_interval(const std::vector<DGFunction>& u_prev,
                                  const std::vector<DGFunction>& u_curr,
                                  double t_prev, double t_curr,
                                  const AssemblyContext& ctx_curr) {
    const ProblemSpec& prob = *ctx_curr.problem;
    const int J = prob.n_components;
    const double tau = t_curr - t_prev;
    MeshOverlay ov;
    if (u_prev[0].space().mesh_ptr() == u_curr[0].space().mesh_ptr()) {
        ov.mesh = u_curr[0].space().mesh_ptr();
        ov.leaf_in_a = ov.mesh->leaves;
        ov.leaf_in_b = ov.mesh->leaves;
    } else {
        ov = union_mesh(u_prev[0].space().mesh(), u_curr[0].space().mesh());
    }
    const Mesh& um = *ov.mesh;
    const QuadratureRule& vol =
        quadrature(RuleKind::Triangle, ctx_curr.quad_exactness);
    const double gauss_pts[2] = {0.5 - 0.5 / std::sqrt(3.0),
                                 0.5 + 0.5 / std::sqrt(3.0)};

    for (int gqi = 0; gqi < 2; ++gqi) {
        double t = t_prev + gauss_pts[gqi] * tau;
        double lk = (t - t_prev) / tau;
        double lkm1 = (t_curr - t) / tau;
        double acc = 0.0;
        for (int c = 0; c < J; ++c) {
            for (int li = 0; li < um.leaf_count(); ++li) {
                int ut = um.leaves[li];
                int ta = ov.leaf_in_a[li], tb = ov.leaf_in_b[li];
                Vec2 v0 = um.vertex(ut, 0);
                Mat2 jac;
                jac.col(0) = um.vertex(ut, 1) - v0;
                jac.col(1) = um.vertex(ut, 2) - v0;
                double det = jac.determinant();
                for (int q = 0; q < vol.size(); ++q) {
                    Vec2 x = v0 + jac * vol.points[q];
                    double w = vol.weights[q] * det;
                    double uh = lkm1 * u_prev[c].eval(ta, x) +
                                lk * u_curr[c].eval(tb, x);
                    Vec2 guh = lkm1 * u_prev[c].eval_grad(ta, x) +
                               lk * u_curr[c].eval_grad(tb, x);
                    double ev = prob.exact[c](x, t) - uh;
                    Vec2 eg = prob.exact_grad[c](x, t) - guh;
                    Mat2 eps = prob.diffusion[c](x);
                    acc += w * (eg.dot(eps * eg) + prob.kappa * ev * ev);
                }
            }
            // Jump terms of the reconstruction (the exact field is smooth;
            // interior edges only).
            for (const Edge& e : um.edges) {
                if (e.is_boundary()) continue;
                int li = um.leaf_index(e.left);
                int lj = um.leaf_index(e.right);
                double eps_e = 0.5 * (prob.eps_min(um.centroid(e.left), c) +
                                      prob.eps_min(um.centroid(e.right), c));
                double sigma = ctx_curr.sigma(EdgeKind::Interior);
                EdgePoints ep = edge_points(um, e, ctx_curr.quad_exactness);
                double integral = 0.0;
                for (size_t q = 0; q < ep.x.size(); ++q) {
                    const Vec2& x = ep.x[q];
                    double uh = lkm1 * u_prev[c].eval(ov.leaf_in_a[li], x) +
                                lk * u_curr[c].eval(ov.leaf_in_b[li], x);
                    double other = lkm1 * u_prev[c].eval(ov.leaf_in_a[lj], x) +
                                   lk * u_curr[c].eval(ov.leaf_in_b[lj], x);
                    double jump = uh - other;
                    integral += ep.rule->weights[q] * e.length * jump * jump;
                }
                acc += eps_e * sigma / e.length * integral;
            }
        }
        energy_int += 0.5 * tau * acc;
    }
}

double stationary_dg_error(const std::vector<DGFunction>& u, int comp,
                           const AssemblyContext& ctx, double t) {
    const ProblemSpec& prob = *ctx.problem;
    const DGSpace& sp = u[comp].space();
    const Mesh& mesh = sp.mesh();
    const QuadratureRule& vol = quadrature(RuleKind::Triangle, ctx.quad_exactness);

    double energy_sq = 0.0;
    for (int li = 0; li < mesh.leaf_count(); ++li) {
        int tid = mesh.leaves[li];
        const auto& geo = sp.geom(li);
        for (int q = 0; q < vol.size(); ++q) {
            Vec2 x = sp.to_physical(li, vol.points[q]);
            double ev = prob.exact[comp](x, t) - u[comp].eval(tid, x);
            Vec2 eg = prob.exact_grad[comp](x, t) - u[comp].eval_grad(tid, x);
            Mat2 eps = prob.diffusion[comp](x);
            energy_sq += vol.weights[q] * geo.det_jac *
                         (eg.dot(eps * eg) + prob.kappa * ev * ev);
        }
    }
    double pen_sq = 0.0, semi_sq = 0.0;
    for (const Edge& e : mesh.edges) {
        if (e.is_boundary()) continue; // error norms use interior jumps
        double eps_e = ctx.eps_scalar_edge(e, comp);
        double sigma = ctx.sigma(EdgeKind::Interior);
        EdgePoints ep = edge_points(mesh, e, ctx.quad_exactness);
        double integral = 0.0;
        for (size_t q = 0; q < ep.x.size(); ++q) {
            double jump = u[comp].eval(e.left, ep.x[q]) -
                          u[comp].eval(e.right, ep.x[q]);
            integral += ep.rule->weights[q] * e.length * jump * jump;
        }
        pen_sq += eps_e * sigma / e.length * integral;
        semi_sq += (prob.kappa * e.length + e.length / eps_e) * integral;
    }
    return std::sqrt(energy_sq + pen_sq) + std::sqrt(semi_sq);
}

} // namespace adr
