#pragma once

#include "adr/geometry.hpp"
#include "adr/quadrature.hpp"

#include <map>
#include <vector>

namespace adr {

inline int nloc(int k) {
    if (k < 0) throw std::invalid_argument("nloc: negative degree");
    return (k + 1) * (k + 2) / 2;
}

/// L2-orthonormal (Dubiner-type) basis on the reference triangle, stored as
/// monomial coefficient tables so values and derivatives evaluate without
/// collapsed-coordinate singularities.
class ReferenceBasis {
public:
    explicit ReferenceBasis(int degree);

    int degree() const { return k_; }
    int size() const { return n_; }

    double value(int l, const Vec2& p) const;
    Vec2 gradient(int l, const Vec2& p) const;
    Mat2 hessian(int l, const Vec2& p) const;

    void values(const Vec2& p, double* out) const; // out[size()]

    /// Tabulated values/gradients at the points of a rule (cached).
    struct Tab {
        // [point][basis]
        std::vector<std::vector<double>> val;
        std::vector<std::vector<Vec2>> grad;
        std::vector<std::vector<Mat2>> hess;
    };
    const Tab& tabulate(const QuadratureRule& rule) const;

    static const ReferenceBasis& get(int degree); // cached per degree

private:
    struct Poly {
        int deg;
        std::vector<double> c; // c[i*(deg+1)+j] for r^i s^j
        double at(int i, int j) const { return c[i * (deg + 1) + j]; }
        double& at(int i, int j) { return c[i * (deg + 1) + j]; }
    };
    Poly dr(const Poly& p) const;
    Poly ds(const Poly& p) const;
    double eval(const Poly& p, double r, double s) const;

    int k_, n_;
    std::vector<Poly> val_, dr_, ds_, drr_, drs_, dss_;
    mutable std::map<const QuadratureRule*, Tab> tabs_; // node-stable
};

} // namespace adr
