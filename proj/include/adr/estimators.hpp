#pragma once

#include "adr/assembly.hpp"
#include "adr/solver.hpp"

namespace adr {

/// Element/edge weights: rho_K = min(h_K eps^-1/2, kappa^-1/2), with the
/// kappa = 0 convention rho = h eps^-1/2; rho_T analogous without h. For
/// tensors the scalar eps is the minimum eigenvalue.
double weight_rho(double h, double eps_scalar, double kappa);
double weight_rho_T(double eps_scalar, double kappa);

/// Energy norm |||v|||^2 = sum_K (||sqrt(eps)grad v||^2 + kappa||v||^2)
///                        + sum_e (eps sigma/h_e)||[v]||^2.
/// Jumps are summed over interior edges; Dirichlet edges contribute
/// ||v - g|| when `g` is supplied (error-norm use), nothing otherwise.
double energy_norm(const DGFunction& v, const AssemblyContext& ctx, int comp,
                   const std::function<double(const Vec2&, double)>* g = nullptr);

/// Computable part of the |.|_C semi-norm: the squared jump sum
/// sum_e (kappa h_e + h_e/eps)||[v]||^2, same edge/data conventions as
/// energy_norm.
double jump_seminorm_part(const DGFunction& v, const AssemblyContext& ctx,
                          int comp,
                          const std::function<double(const Vec2&, double)>* g = nullptr);

/// Element-wise L2 projections of the data entering the stationary
/// indicator and the data term Theta.
struct DiscreteData {
    DGFunction f_h;
    std::array<DGFunction, 2> beta_h;
};
DiscreteData project_data(const AssemblyContext& ctx, int comp);

struct StationaryReport {
    Eigen::VectorXd eta_R, eta_E, eta_J, eta_K, theta_K; // per leaf, squared
    double eta = 0.0;   // sqrt of the sum
    double theta = 0.0; // sqrt of the sum
};
/// Residual indicator eta_K^2 = eta_R^2 + eta_E^2 + eta_J^2 and data term
/// Theta for a stationary solution snapshot.
StationaryReport stationary_indicator(const std::vector<DGFunction>& u, int comp,
                                      const AssemblyContext& ctx,
                                      const DiscreteData& data);

/// A^k = P_h f^k - (u^k - P_h u^{k-1}) / tau on u_curr's space.
DGFunction elliptic_source(const DGFunction& u_prev, const DGFunction& u_curr,
                           const std::function<double(const Vec2&, double)>& f,
                           double t_curr, double tau);

/// A^0 from the defining relation a_h + K_h + b_h = (A^0, v): solves
/// M A = S u0 + b(u0) per component.
std::vector<DGFunction> initial_elliptic_source(const AssemblyContext& ctx,
                                                const StepOperators& ops,
                                                const std::vector<DGFunction>& u0);

/// Fully-discrete per-step estimate on the overlay of the two solution
/// meshes. All values are squared; s1_local distributes edge terms half to
/// each side.
struct StepEstimate {
    MeshOverlay overlay;
    int union_dofs = 0;
    std::vector<Eigen::VectorXd> s1_local;          // per union leaf, squared
    std::vector<double> s1, s2, s3, s4;             // squared globals
    std::vector<double> t1_int;                     // int eta_T1^2 dt
    std::vector<double> t2_int, t2_sq_int;          // int eta_T2 dt, int eta_T2^2 dt
    std::vector<double> eta_T_tilde_sq;             // modified indicator
    double rho_T = 0.0;

    /// s1 squared values aggregated onto the leaves of u_curr's mesh.
    Eigen::VectorXd s1_on_current(int comp, const Mesh& current) const;
};

/// u_prev lives on the previous mesh, u_curr on the current one (they may
/// coincide); A_prev is retained from the previous step. tau <= 0 computes
/// the initial pseudo-step (S1/S3 only, no temporal parts).
StepEstimate estimate_step(const std::vector<DGFunction>& u_prev,
                           const std::vector<DGFunction>& u_curr,
                           const std::vector<DGFunction>& A_prev,
                           const std::vector<DGFunction>& A_curr,
                           double t_prev, double t_curr,
                           const AssemblyContext& ctx_curr);

/// Accumulates eta_S^2 and eta_T^2 over a run:
///   eta_S^2 = ||e(0)||^2 + 1/3 sum tau_k (s1_{k-1} + s1_k) + sum tau_k s2_k
///           + max_k s3_k + min{(sum tau_k eta4_k)^2, rho_T^2 sum tau_k eta4_k^2}
///   eta_T^2 = sum int eta_T1^2 + min{(sum int eta_T2)^2, rho_T^2 sum int eta_T2^2}
struct RunEstimate {
    double err0_sq = 0.0;
    double s1_time = 0.0, s2_time = 0.0, s3_max = 0.0;
    double s4_lin = 0.0, s4_quad = 0.0;
    double t1 = 0.0, t2_lin = 0.0, t2_quad = 0.0;
    double t_tilde_sum = 0.0; // surrogate sum of step indicators
    double rho_T = 0.0;
    double prev_s1 = 0.0;
    bool started = false;

    void set_initial(double e0_sq, double s1_0_sq, double s3_0_sq, double rho_t);
    void add_step(double tau, const StepEstimate& est, int comp);
    double eta_S_sq() const;
    double eta_T_sq() const;
};

/// estimate / true_error; throws on zero error.
double effectivity(double estimate, double true_error);

/// ||v||_*^2 = ||v||_{Linf(L2)}^2 + int_0^T |||v|||^2 dt for the error
/// against an exact solution: Linf over step endpoints, time integral by
/// 2-point Gauss on the linear-in-time reconstruction.
struct TrueErrorAccum {
    double linf_l2_sq = 0.0;
    double energy_int = 0.0;
    double final_l2 = 0.0; // ||e(T)|| of the last endpoint seen

    void add_endpoint(const std::vector<DGFunction>& u, double t,
                      const AssemblyContext& ctx);
    void add_interval(const std::vector<DGFunction>& u_prev,
                      const std::vector<DGFunction>& u_curr, double t_prev,
                      double t_curr, const AssemblyContext& ctx_curr);
    double norm() const { return std::sqrt(linf_l2_sq + energy_int); }
};

/// DG-norm error |||e||| + |e|_C(jump part) of a stationary snapshot against
/// the exact fields (used by the reliability/efficiency checks).
double stationary_dg_error(const std::vector<DGFunction>& u, int comp,
                           const AssemblyContext& ctx, double t);

} // namespace adr
