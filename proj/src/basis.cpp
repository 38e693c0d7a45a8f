#include "adr/basis.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace adr {

namespace {

struct P2 { // scratch polynomial with fixed max degree
    int n;                  // side length = max_deg + 1
    std::vector<double> c;  // c[i*n+j] for r^i s^j
    explicit P2(int max_deg) : n(max_deg + 1), c(n * n, 0.0) {}
    double& at(int i, int j) { return c[i * n + j]; }
    double at(int i, int j) const { return c[i * n + j]; }
};

P2 mul(const P2& a, const P2& b) {
    P2 out(a.n - 1);
    for (int i = 0; i < a.n; ++i)
        for (int j = 0; j < a.n; ++j) {
            if (a.at(i, j) == 0.0) continue;
            for (int p = 0; p + i < a.n; ++p)
                for (int q = 0; q + j < a.n; ++q) {
                    if (b.at(p, q) == 0.0) continue;
                    out.at(i + p, j + q) += a.at(i, j) * b.at(p, q);
                }
        }
    return out;
}

P2 axpy(double alpha, const P2& a, double beta, const P2& b) {
    P2 out(a.n - 1);
    for (size_t i = 0; i < out.c.size(); ++i)
        out.c[i] = alpha * a.c[i] + beta * b.c[i];
    return out;
}

} // namespace

ReferenceBasis::ReferenceBasis(int degree) : k_(degree), n_(nloc(degree)) {
    if (degree < 0) throw std::invalid_argument("ReferenceBasis: degree >= 0");
    const int N = k_ + 1;

    // Homogenized Legendre Q_p(a,b) = P_p(a/b) b^p with a = 2r+s-1, b = 1-s.
    P2 A(k_), B(k_);
    if (k_ >= 1) {
        A.at(1, 0) = 2.0;
        A.at(0, 1) = 1.0;
        B.at(0, 1) = -1.0;
    }
    A.at(0, 0) = -1.0;
    B.at(0, 0) = 1.0;

    std::vector<P2> Q;
    Q.emplace_back(k_);
    Q[0].at(0, 0) = 1.0;
    if (k_ >= 1) Q.push_back(A);
    for (int p = 2; p <= k_; ++p) {
        P2 t1 = mul(A, Q[p - 1]);
        P2 t2 = mul(mul(B, B), Q[p - 2]);
        Q.push_back(axpy((2.0 * p - 1.0) / p, t1, -(p - 1.0) / p, t2));
    }

    // Jacobi P_q^{(alpha,0)}(2s-1) in s.
    auto jacobi_in_s = [&](int q, double alpha) {
        std::vector<P2> J;
        P2 z(k_); // 2s - 1
        z.at(0, 0) = -1.0;
        if (k_ >= 1) z.at(0, 1) = 2.0;
        J.emplace_back(k_);
        J[0].at(0, 0) = 1.0;
        if (q >= 1) {
            P2 j1(k_);
            // ((alpha+2) z + alpha) / 2
            j1 = axpy(0.5 * (alpha + 2.0), z, 0.0, z);
            j1.at(0, 0) += 0.5 * alpha;
            J.push_back(j1);
        }
        for (int m = 2; m <= q; ++m) {
            double a1 = 2.0 * m * (m + alpha) * (2.0 * m + alpha - 2.0);
            double a2 = (2.0 * m + alpha - 1.0) * alpha * alpha;
            double a3 = (2.0 * m + alpha - 2.0) * (2.0 * m + alpha - 1.0) *
                        (2.0 * m + alpha);
            double a4 = 2.0 * (m + alpha - 1.0) * (m - 1.0) * (2.0 * m + alpha);
            P2 t = mul(z, J[m - 1]);
            P2 next = axpy(a3 / a1, t, a2 / a1, J[m - 1]);
            next = axpy(1.0, next, -a4 / a1, J[m - 2]);
            J.push_back(next);
        }
        return J[q];
    };

    auto to_poly = [&](const P2& p) {
        Poly out;
        out.deg = k_;
        out.c.assign(N * N, 0.0);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) out.at(i, j) = p.at(i, j);
        return out;
    };

    for (int d = 0; d <= k_; ++d)
        for (int p = 0; p <= d; ++p) {
            int q = d - p;
            double c = std::sqrt(2.0 * (2.0 * p + 1.0) * (p + q + 1.0));
            P2 phi = mul(Q[p], jacobi_in_s(q, 2.0 * p + 1.0));
            for (auto& v : phi.c) v *= c;
            val_.push_back(to_poly(phi));
        }

    for (const Poly& p : val_) {
        dr_.push_back(dr(p));
        ds_.push_back(ds(p));
        drr_.push_back(dr(dr_.back()));
        drs_.push_back(ds(dr_.back()));
        dss_.push_back(ds(ds_.back()));
    }
}

ReferenceBasis::Poly ReferenceBasis::dr(const Poly& p) const {
    Poly out;
    out.deg = p.deg;
    out.c.assign(p.c.size(), 0.0);
    for (int i = 1; i <= p.deg; ++i)
        for (int j = 0; j <= p.deg - i; ++j) out.at(i - 1, j) = i * p.at(i, j);
    return out;
}

ReferenceBasis::Poly ReferenceBasis::ds(const Poly& p) const {
    Poly out;
    out.deg = p.deg;
    out.c.assign(p.c.size(), 0.0);
    for (int i = 0; i <= p.deg; ++i)
        for (int j = 1; j <= p.deg - i; ++j) out.at(i, j - 1) = j * p.at(i, j);
    return out;
}

double ReferenceBasis::eval(const Poly& p, double r, double s) const {
    // Horner in r with inner Horner in s.
    double acc = 0.0;
    for (int i = p.deg; i >= 0; --i) {
        double row = 0.0;
        for (int j = p.deg; j >= 0; --j) row = row * s + p.at(i, j);
        acc = acc * r + row;
    }
    return acc;
}

double ReferenceBasis::value(int l, const Vec2& p) const {
    return eval(val_[l], p.x(), p.y());
}

Vec2 ReferenceBasis::gradient(int l, const Vec2& p) const {
    return {eval(dr_[l], p.x(), p.y()), eval(ds_[l], p.x(), p.y())};
}

Mat2 ReferenceBasis::hessian(int l, const Vec2& p) const {
    Mat2 h;
    h(0, 0) = eval(drr_[l], p.x(), p.y());
    h(0, 1) = h(1, 0) = eval(drs_[l], p.x(), p.y());
    h(1, 1) = eval(dss_[l], p.x(), p.y());
    return h;
}

void ReferenceBasis::values(const Vec2& p, double* out) const {
    for (int l = 0; l < n_; ++l) out[l] = value(l, p);
}

const ReferenceBasis::Tab& ReferenceBasis::tabulate(const QuadratureRule& rule) const {
    auto found = tabs_.find(&rule);
    if (found != tabs_.end()) return found->second;
    Tab tab;
    const int nq = rule.size();
    tab.val.resize(nq);
    tab.grad.resize(nq);
    tab.hess.resize(nq);
    for (int q = 0; q < nq; ++q) {
        tab.val[q].resize(n_);
        tab.grad[q].resize(n_);
        tab.hess[q].resize(n_);
        for (int l = 0; l < n_; ++l) {
            tab.val[q][l] = value(l, rule.points[q]);
            tab.grad[q][l] = gradient(l, rule.points[q]);
            tab.hess[q][l] = hessian(l, rule.points[q]);
        }
    }
    return tabs_.emplace(&rule, std::move(tab)).first->second;
}

const ReferenceBasis& ReferenceBasis::get(int degree) {
    static std::map<int, ReferenceBasis> cache;
    auto it = cache.find(degree);
    if (it == cache.end()) it = cache.emplace(degree, ReferenceBasis(degree)).first;
    return it->second;
}

} // namespace adr
