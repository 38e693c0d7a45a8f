#pragma once

#include "adr/geometry.hpp"
#include "adr/mesh.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace adr {

/// Semi-linear advection-diffusion-reaction system
///   du_i/dt - div(eps_i grad u_i) + beta_i . grad u_i + r_i(u) = f_i.
/// All callables are pure; component count J >= 1.
struct ProblemSpec {
    std::string name;
    int n_components = 1;
    Rect domain;

    std::vector<std::function<Mat2(const Vec2&)>> diffusion;
    std::vector<std::function<Vec2(const Vec2&, double)>> velocity;
    std::vector<std::function<double(const Vec2&, double)>> velocity_div;
    bool static_velocity = true; // operators cached per mesh when true

    /// r_i(x, u) and d r_i / d u_j.
    std::function<double(const Vec2&, const Eigen::VectorXd&, int)> reaction;
    std::function<double(const Vec2&, const Eigen::VectorXd&, int, int)> reaction_jac;

    std::vector<std::function<double(const Vec2&, double)>> source;
    std::vector<std::function<double(const Vec2&, double)>> dirichlet;
    BoundaryClassifier boundary; // null = all Dirichlet
    std::vector<std::function<double(const Vec2&)>> initial;

    double kappa = 0.0;
    double final_time = 1.0;

    bool has_exact = false;
    std::vector<std::function<double(const Vec2&, double)>> exact;
    std::vector<std::function<Vec2(const Vec2&, double)>> exact_grad;
    std::vector<std::function<double(const Vec2&, double)>> exact_dt;

    double eps_min(const Vec2& x, int comp) const {
        Mat2 e = diffusion[comp](x);
        double a = e(0, 0), c = e(1, 1), b = 0.5 * (e(0, 1) + e(1, 0));
        double m = 0.5 * (a + c);
        return m - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    }

    double reaction_at(const Vec2& x, const Eigen::VectorXd& u, int i) const {
        return reaction ? reaction(x, u, i) : 0.0;
    }
    double reaction_jac_at(const Vec2& x, const Eigen::VectorXd& u, int i,
                           int j) const {
        return reaction_jac ? reaction_jac(x, u, i, j) : 0.0;
    }
};

} // namespace adr
