#pragma once

#include "adr/dg_space.hpp"
#include "adr/problem.hpp"

#include <Eigen/Sparse>

namespace adr {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Interior/boundary penalty depending on the polynomial degree only.
double penalty(int k, EdgeKind kind);

/// Everything assembly needs for one space/problem/time triple. The penalty
/// parameters default to 3k(k+1) interior and 6k(k+1) boundary.
struct AssemblyContext {
    SpacePtr space;
    const ProblemSpec* problem = nullptr;
    double time = 0.0;
    double sigma_interior = 0.0;
    double sigma_boundary = 0.0;
    int quad_exactness = 0; // 2k+2 unless overridden

    AssemblyContext(SpacePtr sp, const ProblemSpec& prob, double t = 0.0)
        : space(std::move(sp)), problem(&prob), time(t),
          sigma_interior(penalty(space->degree(), EdgeKind::Interior)),
          sigma_boundary(penalty(space->degree(), EdgeKind::Dirichlet)),
          quad_exactness(2 * space->degree() + 2) {}

    double sigma(EdgeKind kind) const {
        return kind == EdgeKind::Interior ? sigma_interior : sigma_boundary;
    }
    /// Scalar diffusion for penalty weights and estimator formulas: minimum
    /// eigenvalue of the tensor, edge values averaged across sides.
    double eps_scalar_elem(int leaf_tri, int comp) const;
    double eps_scalar_edge(const Edge& e, int comp) const;
};

/// Block-diagonal mass matrix (identity with the orthonormal basis, still
/// assembled by quadrature).
SparseMatrix assemble_mass(const AssemblyContext& ctx);

/// SIPG operator for a_h + K_h: diffusion, upwinded convection, penalty,
/// and symmetrizing consistency terms. Inflow faces are classified by the
/// sign of beta.n at each face quadrature point.
SparseMatrix assemble_stiffness(const AssemblyContext& ctx, int comp);

/// Load vector for the problem source plus weak Dirichlet lifting of g.
Eigen::VectorXd assemble_load(const AssemblyContext& ctx, int comp);
/// Same with an explicit source (g lifting still from the problem).
Eigen::VectorXd assemble_load(const AssemblyContext& ctx, int comp,
                              const std::function<double(const Vec2&, double)>& f);

/// Nonlinear reaction vector and its Jacobian for the stacked system of all
/// components; both indexed by component-major dof blocks.
struct ReactionSystem {
    Eigen::VectorXd b;
    SparseMatrix jac; // block-diagonal per element, JxJ component blocks
};
ReactionSystem assemble_reaction(const AssemblyContext& ctx,
                                 const std::vector<DGFunction>& u,
                                 bool with_jacobian = true);

/// Matrix Market coordinate dump for external inspection.
void write_matrix_market(const SparseMatrix& m, std::ostream& out);

} // namespace adr
