#include "adr/assembly.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace adr {

double penalty(int k, EdgeKind kind) {
    if (k < 1) throw std::invalid_argument("penalty: degree >= 1");
    double base = 3.0 * k * (k + 1);
    return kind == EdgeKind::Interior ? base : 2.0 * base;
}

double AssemblyContext::eps_scalar_elem(int leaf_tri, int comp) const {
    return problem->eps_min(space->mesh().centroid(leaf_tri), comp);
}

double AssemblyContext::eps_scalar_edge(const Edge& e, int comp) const {
    double eps = eps_scalar_elem(e.left, comp);
    if (e.right >= 0) eps = 0.5 * (eps + eps_scalar_elem(e.right, comp));
    return eps;
}

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

/// Trace data of one element along an edge at the edge quadrature points.
struct SideEval {
    int li = -1; // leaf position, -1 when the side is absent
    std::vector<std::vector<double>> val;  // [qp][l]
    std::vector<std::vector<Vec2>> grad;   // [qp][l]
};

void eval_side(const DGSpace& sp, int tri_id, const std::vector<Vec2>& pts,
               SideEval& out) {
    out.li = sp.mesh().leaf_index(tri_id);
    const int nloc = sp.nloc();
    out.val.assign(pts.size(), std::vector<double>(nloc));
    out.grad.assign(pts.size(), std::vector<Vec2>(nloc));
    for (size_t q = 0; q < pts.size(); ++q) {
        Vec2 ref = sp.geom(out.li).inv_jac * (pts[q] - sp.geom(out.li).v0);
        sp.shape_values(out.li, ref, out.val[q].data());
        sp.shape_gradients(out.li, ref, out.grad[q].data());
    }
}

} // namespace

SparseMatrix assemble_mass(const AssemblyContext& ctx) {
    const DGSpace& sp = *ctx.space;
    const QuadratureRule& rule = quadrature(RuleKind::Triangle, ctx.quad_exactness);
    const auto& tab = sp.basis().tabulate(rule);
    Triplets trip;
    trip.reserve(sp.mesh().leaf_count() * sp.nloc() * sp.nloc());
    for (int li = 0; li < sp.mesh().leaf_count(); ++li) {
        const auto& g = sp.geom(li);
        int base = sp.block_start(li);
        for (int l = 0; l < sp.nloc(); ++l)
            for (int m = 0; m < sp.nloc(); ++m) {
                double acc = 0.0;
                for (int q = 0; q < rule.size(); ++q)
                    acc += rule.weights[q] * tab.val[q][l] * tab.val[q][m];
                // scale^2 * det_jac = 1: the physical mass block is the
                // reference Gram matrix.
                trip.emplace_back(base + l, base + m, acc);
            }
    }
    SparseMatrix m(sp.dof(), sp.dof());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

SparseMatrix assemble_stiffness(const AssemblyContext& ctx, int comp) {
    const DGSpace& sp = *ctx.space;
    const Mesh& mesh = sp.mesh();
    const ProblemSpec& prob = *ctx.problem;
    const int nloc = sp.nloc();
    const double t = ctx.time;

    Triplets trip;
    trip.reserve(mesh.leaf_count() * nloc * nloc * 4);

    // Element terms: diffusion + convection.
    const QuadratureRule& vol = quadrature(RuleKind::Triangle, ctx.quad_exactness);
    const auto& tab = sp.basis().tabulate(vol);
    for (int li = 0; li < mesh.leaf_count(); ++li) {
        const auto& g = sp.geom(li);
        int base = sp.block_start(li);
        Eigen::MatrixXd local = Eigen::MatrixXd::Zero(nloc, nloc);
        Mat2 invT = g.inv_jac.transpose();
        for (int q = 0; q < vol.size(); ++q) {
            Vec2 x = sp.to_physical(li, vol.points[q]);
            Mat2 eps = prob.diffusion[comp](x);
            Vec2 beta = prob.velocity[comp](x, t);
            double w = vol.weights[q] * g.det_jac * g.scale * g.scale;
            for (int m = 0; m < nloc; ++m) {
                Vec2 gm = invT * tab.grad[q][m];
                Vec2 eg = eps * gm;
                double bg = beta.dot(gm);
                for (int l = 0; l < nloc; ++l) {
                    Vec2 gl = invT * tab.grad[q][l];
                    local(l, m) += w * (eg.dot(gl) + bg * tab.val[q][l]);
                }
            }
        }
        for (int l = 0; l < nloc; ++l)
            for (int m = 0; m < nloc; ++m)
                trip.emplace_back(base + l, base + m, local(l, m));
    }

    // Edge terms.
    const QuadratureRule& er = quadrature(RuleKind::Edge, ctx.quad_exactness);
    std::vector<Vec2> pts(er.size());
    SideEval in, out;
    for (const Edge& e : mesh.edges) {
        Vec2 pa = mesh.vertices[e.v[0]].x, pb = mesh.vertices[e.v[1]].x;
        for (int q = 0; q < er.size(); ++q)
            pts[q] = pa + er.points[q].x() * (pb - pa);

        const bool interior = !e.is_boundary();
        const bool dirichlet = interior || e.kind == EdgeKind::Dirichlet;
        eval_side(sp, e.left, pts, in);
        if (interior) eval_side(sp, e.right, pts, out);

        const int bi = sp.block_start(in.li);
        const int bj = interior ? sp.block_start(out.li) : -1;
        const double sigma = ctx.sigma(interior ? EdgeKind::Interior : e.kind);
        const double eps_e = ctx.eps_scalar_edge(e, comp);
        const double pen = dirichlet ? sigma * eps_e / e.length : 0.0;

        // One-sided tensor values: nudge the evaluation point into each
        // element so fields that jump across the edge stay element-smooth.
        const double theta = 1e-6;
        Vec2 ci = mesh.centroid(e.left);
        Vec2 cj = interior ? mesh.centroid(e.right) : ci;

        for (int q = 0; q < er.size(); ++q) {
            double w = er.weights[q] * e.length;
            Mat2 eps_i = prob.diffusion[comp](pts[q] + theta * (ci - pts[q]));
            Vec2 beta = prob.velocity[comp](pts[q], t);
            double bn = beta.dot(e.normal);

            if (interior) {
                Mat2 eps_j = prob.diffusion[comp](pts[q] + theta * (cj - pts[q]));
                for (int m = 0; m < nloc; ++m) {
                    double um_i = in.val[q][m], um_j = out.val[q][m];
                    double fl_i = 0.5 * (eps_i * in.grad[q][m]).dot(e.normal);
                    double fl_j = 0.5 * (eps_j * out.grad[q][m]).dot(e.normal);
                    for (int l = 0; l < nloc; ++l) {
                        double vl_i = in.val[q][l], vl_j = out.val[q][l];
                        double gl_i = 0.5 * (eps_i * in.grad[q][l]).dot(e.normal);
                        double gl_j = 0.5 * (eps_j * out.grad[q][l]).dot(e.normal);
                        // penalty (sigma eps / h) [u][v]
                        trip.emplace_back(bi + l, bi + m, w * pen * um_i * vl_i);
                        trip.emplace_back(bj + l, bj + m, w * pen * um_j * vl_j);
                        trip.emplace_back(bi + l, bj + m, -w * pen * um_j * vl_i);
                        trip.emplace_back(bj + l, bi + m, -w * pen * um_i * vl_j);
                        // -({eps grad v}.[u] + {eps grad u}.[v])
                        double c_ii = -(gl_i * um_i + fl_i * vl_i);
                        double c_jj = (gl_j * um_j + fl_j * vl_j);
                        double c_ij = (gl_i * um_j - fl_j * vl_i);
                        double c_ji = -(gl_j * um_i - fl_i * vl_j);
                        trip.emplace_back(bi + l, bi + m, w * c_ii);
                        trip.emplace_back(bj + l, bj + m, w * c_jj);
                        trip.emplace_back(bi + l, bj + m, w * c_ij);
                        trip.emplace_back(bj + l, bi + m, w * c_ji);
                    }
                }
                // Upwind: inflow side receives beta.n_K (u_out - u_in) v_in.
                if (bn < 0.0) {
                    for (int m = 0; m < nloc; ++m)
                        for (int l = 0; l < nloc; ++l) {
                            trip.emplace_back(bi + l, bj + m,
                                              w * bn * out.val[q][m] * in.val[q][l]);
                            trip.emplace_back(bi + l, bi + m,
                                              -w * bn * in.val[q][m] * in.val[q][l]);
                        }
                } else if (bn > 0.0) {
                    for (int m = 0; m < nloc; ++m)
                        for (int l = 0; l < nloc; ++l) {
                            trip.emplace_back(bj + l, bi + m,
                                              -w * bn * in.val[q][m] * out.val[q][l]);
                            trip.emplace_back(bj + l, bj + m,
                                              w * bn * out.val[q][m] * out.val[q][l]);
                        }
                }
            } else {
                if (e.kind == EdgeKind::Dirichlet) {
                    for (int m = 0; m < nloc; ++m) {
                        double um = in.val[q][m];
                        double fm = (eps_i * in.grad[q][m]).dot(e.normal);
                        for (int l = 0; l < nloc; ++l) {
                            double vl = in.val[q][l];
                            double gl = (eps_i * in.grad[q][l]).dot(e.normal);
                            trip.emplace_back(bi + l, bi + m,
                                              w * (pen * um * vl - gl * um - fm * vl));
                        }
                    }
                    if (bn < 0.0) // weak inflow: -int beta.n u v
                        for (int m = 0; m < nloc; ++m)
                            for (int l = 0; l < nloc; ++l)
                                trip.emplace_back(bi + l, bi + m,
                                                  -w * bn * in.val[q][m] * in.val[q][l]);
                }
                // Neumann edges contribute nothing (natural flux condition);
                // a Neumann inflow point is treated as outflow.
            }
        }
    }

    SparseMatrix s(sp.dof(), sp.dof());
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

Eigen::VectorXd assemble_load(const AssemblyContext& ctx, int comp,
                              const std::function<double(const Vec2&, double)>& f) {
    const DGSpace& sp = *ctx.space;
    const Mesh& mesh = sp.mesh();
    const ProblemSpec& prob = *ctx.problem;
    const double t = ctx.time;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sp.dof());

    const QuadratureRule& vol = quadrature(RuleKind::Triangle, ctx.quad_exactness);
    const auto& tab = sp.basis().tabulate(vol);
    for (int li = 0; li < mesh.leaf_count(); ++li) {
        const auto& g = sp.geom(li);
        int base = sp.block_start(li);
        for (int q = 0; q < vol.size(); ++q) {
            Vec2 x = sp.to_physical(li, vol.points[q]);
            double w = vol.weights[q] * g.det_jac * g.scale * f(x, t);
            for (int l = 0; l < sp.nloc(); ++l)
                rhs[base + l] += w * tab.val[q][l];
        }
    }

    // Weak Dirichlet data.
    const QuadratureRule& er = quadrature(RuleKind::Edge, ctx.quad_exactness);
    std::vector<Vec2> pts(er.size());
    SideEval in;
    for (const Edge& e : mesh.edges) {
        if (!e.is_boundary() || e.kind != EdgeKind::Dirichlet) continue;
        Vec2 pa = mesh.vertices[e.v[0]].x, pb = mesh.vertices[e.v[1]].x;
        for (int q = 0; q < er.size(); ++q)
            pts[q] = pa + er.points[q].x() * (pb - pa);
        eval_side(sp, e.left, pts, in);
        int base = sp.block_start(in.li);
        double pen = ctx.sigma(e.kind) * ctx.eps_scalar_edge(e, comp) / e.length;
        Vec2 ci = mesh.centroid(e.left);
        for (int q = 0; q < er.size(); ++q) {
            double w = er.weights[q] * e.length;
            double gval = prob.dirichlet[comp](pts[q], t);
            Mat2 eps = prob.diffusion[comp](pts[q] + 1e-6 * (ci - pts[q]));
            double bn = prob.velocity[comp](pts[q], t).dot(e.normal);
            for (int l = 0; l < sp.nloc(); ++l) {
                double term = pen * in.val[q][l] - (eps * in.grad[q][l]).dot(e.normal);
                if (bn < 0.0) term -= bn * in.val[q][l];
                rhs[base + l] += w * gval * term;
            }
        }
    }
    return rhs;
}

Eigen::VectorXd assemble_load(const AssemblyContext& ctx, int comp) {
    return assemble_load(ctx, comp, ctx.problem->source[comp]);
}

ReactionSystem assemble_reaction(const AssemblyContext& ctx,
                                 const std::vector<DGFunction>& u,
                                 bool with_jacobian) {
    const DGSpace& sp = *ctx.space;
    const ProblemSpec& prob = *ctx.problem;
    const int J = prob.n_components;
    const int nloc = sp.nloc();
    const int dof = sp.dof();
    if (static_cast<int>(u.size()) != J)
        throw std::invalid_argument("assemble_reaction: component count mismatch");

    ReactionSystem out;
    out.b = Eigen::VectorXd::Zero(J * dof);
    Triplets trip;
    const QuadratureRule& vol = quadrature(RuleKind::Triangle, ctx.quad_exactness);
    const auto& tab = sp.basis().tabulate(vol);
    Eigen::VectorXd uval(J);

    for (int li = 0; li < sp.mesh().leaf_count(); ++li) {
        const auto& g = sp.geom(li);
        int base = sp.block_start(li);
        Eigen::MatrixXd lb = Eigen::MatrixXd::Zero(J, nloc);
        std::vector<Eigen::MatrixXd> lj(J * J, Eigen::MatrixXd::Zero(nloc, nloc));
        for (int q = 0; q < vol.size(); ++q) {
            for (int c = 0; c < J; ++c) {
                double acc = 0.0;
                for (int l = 0; l < nloc; ++l)
                    acc += u[c].coeff()[base + l] * tab.val[q][l];
                uval[c] = acc * g.scale;
            }
            Vec2 x = sp.to_physical(li, vol.points[q]);
            double w = vol.weights[q] * g.det_jac;
            for (int i = 0; i < J; ++i) {
                double r = prob.reaction_at(x, uval, i);
                if (!std::isfinite(r)) {
                    std::ostringstream os;
                    os << "reaction evaluation failed on element "
                       << sp.mesh().leaves[li] << " (component " << i << ")";
                    throw std::runtime_error(os.str());
                }
                for (int l = 0; l < nloc; ++l)
                    lb(i, l) += w * r * tab.val[q][l] * g.scale;
                if (!with_jacobian) continue;
                for (int j = 0; j < J; ++j) {
                    double rp = prob.reaction_jac_at(x, uval, i, j);
                    if (rp == 0.0) continue;
                    double ws = w * rp * g.scale * g.scale;
                    for (int l = 0; l < nloc; ++l)
                        for (int m = 0; m < nloc; ++m)
                            lj[i * J + j](l, m) += ws * tab.val[q][l] * tab.val[q][m];
                }
            }
        }
        for (int i = 0; i < J; ++i) {
            for (int l = 0; l < nloc; ++l) out.b[i * dof + base + l] = lb(i, l);
            for (int j = 0; j < J; ++j) {
                const auto& blk = lj[i * J + j];
                if (blk.isZero(0.0)) continue;
                for (int l = 0; l < nloc; ++l)
                    for (int m = 0; m < nloc; ++m)
                        trip.emplace_back(i * dof + base + l, j * dof + base + m,
                                          blk(l, m));
            }
        }
    }
    out.jac.resize(J * dof, J * dof);
    out.jac.setFromTriplets(trip.begin(), trip.end());
    return out;
}

void write_matrix_market(const SparseMatrix& m, std::ostream& out) {
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
    out.precision(17);
    for (int k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it)
            out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

} // namespace adr
