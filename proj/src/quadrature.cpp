#include "adr/quadrature.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <map>
#include <stdexcept>

namespace adr {

namespace {

struct Nodes {
    std::vector<double> x, w;
};

/// Golub-Welsch from symmetric-tridiagonal recurrence coefficients.
Nodes golub_welsch(const std::vector<double>& diag,
                   const std::vector<double>& subdiag, double mu0) {
    const int n = static_cast<int>(diag.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) J(i, i) = diag[i];
    for (int i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = subdiag[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    Nodes out;
    out.x.resize(n);
    out.w.resize(n);
    for (int i = 0; i < n; ++i) {
        out.x[i] = es.eigenvalues()(i);
        double v0 = es.eigenvectors()(0, i);
        out.w[i] = mu0 * v0 * v0;
    }
    return out;
}

/// Gauss-Legendre on [-1,1].
Nodes gauss_legendre(int n) {
    std::vector<double> diag(n, 0.0), sub(n - 1);
    for (int j = 1; j < n; ++j)
        sub[j - 1] = j / std::sqrt(4.0 * j * j - 1.0);
    return golub_welsch(diag, sub, 2.0);
}

/// Gauss-Jacobi on [-1,1] with weight (1-x)^alpha, beta = 0.
Nodes gauss_jacobi(int n, double alpha) {
    const double beta = 0.0;
    std::vector<double> diag(n), sub(n > 1 ? n - 1 : 0);
    for (int j = 0; j < n; ++j) {
        double den = (2.0 * j + alpha + beta) * (2.0 * j + alpha + beta + 2.0);
        diag[j] = den == 0.0 ? (beta - alpha) / (alpha + beta + 2.0)
                             : (beta * beta - alpha * alpha) / den;
    }
    for (int j = 1; j < n; ++j) {
        double num = 4.0 * j * (j + alpha) * (j + beta) * (j + alpha + beta);
        double den = std::pow(2.0 * j + alpha + beta, 2) *
                     (2.0 * j + alpha + beta + 1.0) *
                     (2.0 * j + alpha + beta - 1.0);
        sub[j - 1] = std::sqrt(num / den);
    }
    double mu0 = std::pow(2.0, alpha + beta + 1.0) * std::tgamma(alpha + 1.0) *
                 std::tgamma(beta + 1.0) / std::tgamma(alpha + beta + 2.0);
    return golub_welsch(diag, sub, mu0);
}

QuadratureRule make_edge_rule(int exactness) {
    int n = (exactness + 2) / 2; // 2n-1 >= exactness
    Nodes gl = gauss_legendre(n);
    QuadratureRule rule;
    rule.exactness = 2 * n - 1;
    for (int i = 0; i < n; ++i) {
        rule.points.emplace_back(0.5 * (gl.x[i] + 1.0), 0.0);
        rule.weights.push_back(0.5 * gl.w[i]);
    }
    return rule;
}

/// Conical-product rule: Gauss-Legendre x Gauss-Jacobi(1,0) collapsed onto
/// the triangle via r = (1+a)(1-b)/4, s = (1+b)/2.
QuadratureRule make_triangle_rule(int exactness) {
    int n = (exactness + 2) / 2;
    Nodes gl = gauss_legendre(n);
    Nodes gj = gauss_jacobi(n, 1.0);
    QuadratureRule rule;
    rule.exactness = 2 * n - 1;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double a = gl.x[i], b = gj.x[j];
            rule.points.emplace_back(0.25 * (1.0 + a) * (1.0 - b),
                                     0.5 * (1.0 + b));
            rule.weights.push_back(gl.w[i] * gj.w[j] / 8.0);
        }
    return rule;
}

} // namespace

const QuadratureRule& quadrature(RuleKind kind, int exactness) {
    if (exactness < 1) throw std::invalid_argument("quadrature: exactness >= 1");
    if (exactness > 20)
        throw std::invalid_argument("quadrature: exactness capped at 20");
    static std::map<std::pair<int, int>, QuadratureRule> cache;
    auto key = std::make_pair(static_cast<int>(kind), exactness);
    auto it = cache.find(key);
    if (it == cache.end()) {
        QuadratureRule rule = kind == RuleKind::Edge
                                  ? make_edge_rule(exactness)
                                  : make_triangle_rule(exactness);
        it = cache.emplace(key, std::move(rule)).first;
    }
    return it->second;
}

} // namespace adr
