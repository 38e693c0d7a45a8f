#pragma once

#include "adr/basis.hpp"
#include "adr/mesh.hpp"
#include "adr/quadrature.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>

namespace adr {

using ScalarField = std::function<double(const Vec2&)>;

/// Element-local polynomial space of fixed degree over a mesh. DoF blocks
/// are element-contiguous in leaf order; the basis is orthonormal on each
/// element (physical scaling 1/sqrt(2|K|)), so element mass blocks equal
/// the identity.
class DGSpace {
public:
    DGSpace(MeshPtr mesh, int degree);

    const Mesh& mesh() const { return *mesh_; }
    MeshPtr mesh_ptr() const { return mesh_; }
    int degree() const { return degree_; }
    int nloc() const { return nloc_; }
    int dof() const { return nloc_ * mesh_->leaf_count(); }
    const ReferenceBasis& basis() const { return *basis_; }

    /// First dof of the block of the element at leaf position `li`.
    int block_start(int li) const { return li * nloc_; }

    struct ElemGeom {
        Vec2 v0;
        Mat2 jac, inv_jac; // x = v0 + jac * (r,s)
        double det_jac;    // = 2|K|
        double area, diameter;
        double scale;      // 1/sqrt(det_jac), physical basis factor
    };
    const ElemGeom& geom(int li) const { return geom_[li]; }

    /// Reference coordinates of a physical point inside leaf `tri_id`.
    Vec2 to_reference(int tri_id, const Vec2& x) const;
    Vec2 to_physical(int li, const Vec2& ref) const;

    // Basis-in-physical-space evaluation for the element at leaf position li.
    void shape_values(int li, const Vec2& ref, double* out) const;
    void shape_gradients(int li, const Vec2& ref, Vec2* out) const;

private:
    MeshPtr mesh_;
    int degree_, nloc_;
    const ReferenceBasis* basis_;
    std::vector<ElemGeom> geom_;
};

using SpacePtr = std::shared_ptr<const DGSpace>;

/// Piecewise polynomial with element-contiguous coefficients.
class DGFunction {
public:
    DGFunction() = default;
    explicit DGFunction(SpacePtr space)
        : space_(std::move(space)),
          coeff_(Eigen::VectorXd::Zero(space_->dof())) {}
    DGFunction(SpacePtr space, Eigen::VectorXd coeff)
        : space_(std::move(space)), coeff_(std::move(coeff)) {
        if (coeff_.size() != space_->dof())
            throw std::invalid_argument("DGFunction: coefficient length mismatch");
    }

    const DGSpace& space() const { return *space_; }
    SpacePtr space_ptr() const { return space_; }
    Eigen::VectorXd& coeff() { return coeff_; }
    const Eigen::VectorXd& coeff() const { return coeff_; }
    bool valid() const { return space_ != nullptr; }

    /// Value at a physical point known to lie in leaf `tri_id` (of this
    /// function's own mesh, or any ancestor query point inside it).
    double eval(int tri_id, const Vec2& x) const;
    Vec2 eval_grad(int tri_id, const Vec2& x) const;
    double eval_laplacian(int tri_id, const Vec2& x) const;
    Mat2 eval_hessian(int tri_id, const Vec2& x) const;

    /// Point evaluation with containment lookup.
    double operator()(const Vec2& x) const { return eval(space_->mesh().locate(x), x); }

    double l2_norm() const; // exact through basis orthonormality

private:
    SpacePtr space_;
    Eigen::VectorXd coeff_;
};

/// Element-wise L2 projection of a callable field.
DGFunction l2_project(const ScalarField& f, SpacePtr target,
                      int extra_exactness = 0);

/// Element-wise L2 projection of a DG function living on a mesh that shares
/// the same root forest (nested transfer in either direction).
DGFunction l2_project(const DGFunction& source, SpacePtr target);

/// Quadrature L2 norm of f - g over the target mesh (f callable).
double l2_error(const ScalarField& f, const DGFunction& g, int extra_exactness = 4);

} // namespace adr
