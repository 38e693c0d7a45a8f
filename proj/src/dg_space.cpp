#include "adr/dg_space.hpp"

#include <cmath>
#include <stdexcept>

namespace adr {

DGSpace::DGSpace(MeshPtr mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree), nloc_(adr::nloc(degree)),
      basis_(&ReferenceBasis::get(degree)) {
    if (degree < 1) throw std::invalid_argument("DGSpace: degree >= 1");
    geom_.reserve(mesh_->leaf_count());
    for (int t : mesh_->leaves) {
        ElemGeom g;
        g.v0 = mesh_->vertex(t, 0);
        g.jac.col(0) = mesh_->vertex(t, 1) - g.v0;
        g.jac.col(1) = mesh_->vertex(t, 2) - g.v0;
        g.det_jac = g.jac.determinant();
        if (g.det_jac <= 0.0)
            throw std::runtime_error("DGSpace: inverted element");
        g.inv_jac = g.jac.inverse();
        g.area = 0.5 * g.det_jac;
        g.diameter = mesh_->diameter(t);
        g.scale = 1.0 / std::sqrt(g.det_jac);
        geom_.push_back(g);
    }
}

Vec2 DGSpace::to_reference(int tri_id, const Vec2& x) const {
    int li = mesh_->leaf_index(tri_id);
    if (li < 0) {
        // Ancestor/descendant query: rebuild the affine map of the given
        // forest triangle directly.
        Vec2 v0 = mesh_->vertex(tri_id, 0);
        Mat2 J;
        J.col(0) = mesh_->vertex(tri_id, 1) - v0;
        J.col(1) = mesh_->vertex(tri_id, 2) - v0;
        return J.inverse() * (x - v0);
    }
    return geom_[li].inv_jac * (x - geom_[li].v0);
}

Vec2 DGSpace::to_physical(int li, const Vec2& ref) const {
    return geom_[li].v0 + geom_[li].jac * ref;
}

void DGSpace::shape_values(int li, const Vec2& ref, double* out) const {
    basis_->values(ref, out);
    for (int l = 0; l < nloc_; ++l) out[l] *= geom_[li].scale;
}

void DGSpace::shape_gradients(int li, const Vec2& ref, Vec2* out) const {
    const ElemGeom& g = geom_[li];
    Mat2 invT = g.inv_jac.transpose();
    for (int l = 0; l < nloc_; ++l)
        out[l] = g.scale * (invT * basis_->gradient(l, ref));
}

namespace {
int require_leaf(const DGSpace& sp, int tri_id) {
    int li = sp.mesh().leaf_index(tri_id);
    if (li < 0) throw std::invalid_argument("DGFunction: id is not a leaf");
    return li;
}
} // namespace

double DGFunction::eval(int tri_id, const Vec2& x) const {
    const DGSpace& sp = *space_;
    int li = require_leaf(sp, tri_id);
    Vec2 ref = sp.geom(li).inv_jac * (x - sp.geom(li).v0);
    const ReferenceBasis& b = sp.basis();
    double acc = 0.0;
    int base = sp.block_start(li);
    for (int l = 0; l < sp.nloc(); ++l)
        acc += coeff_[base + l] * b.value(l, ref);
    return acc * sp.geom(li).scale;
}

Vec2 DGFunction::eval_grad(int tri_id, const Vec2& x) const {
    const DGSpace& sp = *space_;
    int li = require_leaf(sp, tri_id);
    Vec2 ref = sp.geom(li).inv_jac * (x - sp.geom(li).v0);
    const ReferenceBasis& b = sp.basis();
    Vec2 acc = Vec2::Zero();
    int base = sp.block_start(li);
    for (int l = 0; l < sp.nloc(); ++l)
        acc += coeff_[base + l] * b.gradient(l, ref);
    return sp.geom(li).scale * (sp.geom(li).inv_jac.transpose() * acc);
}

Mat2 DGFunction::eval_hessian(int tri_id, const Vec2& x) const {
    const DGSpace& sp = *space_;
    int li = require_leaf(sp, tri_id);
    Vec2 ref = sp.geom(li).inv_jac * (x - sp.geom(li).v0);
    const ReferenceBasis& b = sp.basis();
    Mat2 acc = Mat2::Zero();
    int base = sp.block_start(li);
    for (int l = 0; l < sp.nloc(); ++l)
        acc += coeff_[base + l] * b.hessian(l, ref);
    const Mat2& C = sp.geom(li).inv_jac;
    return sp.geom(li).scale * (C.transpose() * acc * C);
}

double DGFunction::eval_laplacian(int tri_id, const Vec2& x) const {
    return eval_hessian(tri_id, x).trace();
}

double DGFunction::l2_norm() const { return coeff_.norm(); }

DGFunction l2_project(const ScalarField& f, SpacePtr target, int extra_exactness) {
    const DGSpace& sp = *target;
    const QuadratureRule& rule =
        quadrature(RuleKind::Triangle, 2 * sp.degree() + 2 + extra_exactness);
    const auto& tab = sp.basis().tabulate(rule);
    DGFunction out(target);
    for (int li = 0; li < sp.mesh().leaf_count(); ++li) {
        const auto& g = sp.geom(li);
        int base = sp.block_start(li);
        for (int q = 0; q < rule.size(); ++q) {
            Vec2 x = sp.to_physical(li, rule.points[q]);
            double w = rule.weights[q] * g.det_jac * f(x);
            for (int l = 0; l < sp.nloc(); ++l)
                out.coeff()[base + l] += w * tab.val[q][l] * g.scale;
        }
    }
    return out;
}

DGFunction l2_project(const DGFunction& source, SpacePtr target) {
    const DGSpace& sp = *target;
    if (source.space_ptr() == target ||
        (source.space().mesh_ptr() == target->mesh_ptr() &&
         source.space().degree() == target->degree())) {
        return DGFunction(target, source.coeff());
    }
    const Mesh& tm = sp.mesh();
    const Mesh& sm = source.space().mesh();
    auto cells = forest_overlap(tm, sm);
    const QuadratureRule& rule =
        quadrature(RuleKind::Triangle, 2 * std::max(sp.degree(), source.space().degree()) + 2);
    DGFunction out(target);
    std::vector<double> shape(sp.nloc());
    for (const auto& cell : cells) {
        int li = tm.leaf_index(cell.leaf_a);
        int base = sp.block_start(li);
        // Integrate over the finer cell; both integrands are polynomials
        // there, so the rule is exact.
        Mat2 J;
        J.col(0) = cell.corners[1] - cell.corners[0];
        J.col(1) = cell.corners[2] - cell.corners[0];
        double det = J.determinant();
        for (int q = 0; q < rule.size(); ++q) {
            Vec2 x = cell.corners[0] + J * rule.points[q];
            double w = rule.weights[q] * det * source.eval(cell.leaf_b, x);
            sp.shape_values(li, sp.to_reference(tm.leaves[li], x), shape.data());
            for (int l = 0; l < sp.nloc(); ++l)
                out.coeff()[base + l] += w * shape[l];
        }
    }
    return out;
}

double l2_error(const ScalarField& f, const DGFunction& g, int extra_exactness) {
    const DGSpace& sp = g.space();
    const QuadratureRule& rule =
        quadrature(RuleKind::Triangle,
                   std::min(20, 2 * sp.degree() + 2 + extra_exactness));
    double acc = 0.0;
    for (int li = 0; li < sp.mesh().leaf_count(); ++li) {
        int t = sp.mesh().leaves[li];
        for (int q = 0; q < rule.size(); ++q) {
            Vec2 x = sp.to_physical(li, rule.points[q]);
            double d = f(x) - g.eval(t, x);
            acc += rule.weights[q] * sp.geom(li).det_jac * d * d;
        }
    }
    return std::sqrt(acc);
}

} // namespace adr
