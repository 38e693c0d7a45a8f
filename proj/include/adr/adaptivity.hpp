#pragma once

#include "adr/estimators.hpp"

#include <limits>
#include <set>

namespace adr {

struct Tolerances {
    double ttol = 1e-3;
    double stol_plus = 3e-4;
    double stol_minus = 3e-7;

    void validate() const {
        if (!(ttol > 0.0) || !(stol_plus > 0.0) || stol_minus < 0.0 ||
            !(stol_minus < stol_plus))
            throw std::invalid_argument("Tolerances: need ttol>0, stol+>0, "
                                        "0<=stol-<stol+");
    }
    /// Effectively disables all adaptivity (uniform run).
    static Tolerances none() {
        return {std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity(), 0.0};
    }
};

/// Threshold marking on per-element eta_{S1,k}^2 values (squared):
/// refine where value > stol+, coarsen where value < stol- (strict), with
/// refinement taking precedence. Returned sets hold leaf tri ids.
std::pair<std::set<int>, std::set<int>> mark(const Eigen::VectorXd& s1_local,
                                             const Mesh& mesh,
                                             const Tolerances& tol);

/// Coupled-system marking: refine the union over components, coarsen only
/// elements below stol- for every component and not marked for refinement.
std::pair<std::set<int>, std::set<int>>
mark_coupled(const std::vector<Eigen::VectorXd>& s1_local, const Mesh& mesh,
             const Tolerances& tol);

struct TraceRow {
    int step = 0;
    double t = 0.0, tau = 0.0;
    int dofs = 0, union_dofs = 0;
    std::vector<double> s1, s2, s3, s4, t_tilde; // squared, per component
    int newton_iters = 0;
    int refined = 0, coarsened = 0, halvings = 0;
};

struct AdaptiveTrace {
    std::vector<TraceRow> rows; // row 0 = initial pseudo-step
    double total_time = 0.0;    // sum of accepted tau
    double weighted_dof_sum = 0.0; // sum tau_k * union dofs
    std::vector<RunEstimate> run;  // per component
    TrueErrorAccum error;
    bool has_error = false;
    double initial_error_sq = 0.0;
};

/// Time-averaged union-mesh DoF count (1/T) sum tau_k lambda_k.
double weighted_dofs(const AdaptiveTrace& trace);

struct AdaptiveCallbacks {
    std::function<void(const TraceRow&)> on_step;
    /// Full state of an accepted step (step 0 = initial data).
    std::function<void(const TraceRow&, const std::vector<DGFunction>&,
                       const StepEstimate&)>
        on_solution;
    std::ostream* newton_log = nullptr;
};

struct AdaptiveResult {
    std::vector<DGFunction> u_final;
    MeshPtr final_mesh;
    AdaptiveTrace trace;
    bool aborted = false;
    std::string abort_reason;
};

/// The adaptive driver: per step, solve on the incoming mesh, halve the
/// interval until the modified temporal indicator passes ttol, mark with
/// eta_{S1,k}^2, refine/coarsen, transfer and re-solve on the new mesh,
/// advance. After a halved step the next step restarts from tau0.
AdaptiveResult adaptive_run(const ProblemSpec& prob, const Tolerances& tol,
                            MeshPtr mesh0, double tau0, double final_time,
                            int degree, const AdaptiveCallbacks& cb = {},
                            const NewtonSettings& newton = {},
                            bool track_error = true);

struct PrepareResult {
    MeshPtr mesh;
    double tau = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Iterates first-step solves from a very coarse mesh, refining marked
/// elements and halving tau, until the first step meets both tolerances
/// (capped at 30 rounds).
PrepareResult prepare_initial_mesh(const ProblemSpec& prob,
                                   const Tolerances& tol, MeshPtr coarse,
                                   double tau0, int degree,
                                   const NewtonSettings& newton = {});

} // namespace adr
