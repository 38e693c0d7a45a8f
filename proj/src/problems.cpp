#include "adr/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace adr {

namespace {

double sech(double x) { return 1.0 / std::cosh(x); }

std::function<Mat2(const Vec2&)> const_diffusion(double eps) {
    return [eps](const Vec2&) { return Mat2(eps * Mat2::Identity()); };
}

std::function<Vec2(const Vec2&, double)> const_velocity(double bx, double by) {
    return [bx, by](const Vec2&, double) { return Vec2(bx, by); };
}

std::function<double(const Vec2&, double)> zero_div() {
    return [](const Vec2&, double) { return 0.0; };
}

} // namespace

PermeabilityField PermeabilityField::three_streaks() {
    PermeabilityField f;
    f.background = 1e-3;
    f.multiplier = 100.0;
    for (double yc : {0.5, 1.0, 1.5})
        f.streaks.push_back(Rect{0.4, yc - 0.1, 2.6, yc + 0.1});
    return f;
}

ProblemSpec example1(double eps) {
    ProblemSpec p;
    p.name = "ex1";
    p.n_components = 1;
    p.domain = {0.0, 0.0, 1.0, 1.0};
    p.diffusion = {const_diffusion(eps)};
    p.velocity = {const_velocity(2.0, 3.0)};
    p.velocity_div = {zero_div()};
    p.reaction = [](const Vec2&, const Eigen::VectorXd& u, int) {
        return u[0] * u[0] * u[0] * u[0];
    };
    p.reaction_jac = [](const Vec2&, const Eigen::VectorXd& u, int, int) {
        return 4.0 * u[0] * u[0] * u[0];
    };
    p.kappa = 0.0;
    p.final_time = 0.5;

    const double rsq = 0.25 * 0.25;
    const double se = 2.0 / std::sqrt(eps);
    // u = A(t) B(x) C(x),  C = 1/2 + atan(z)/pi,  z = se (rsq - |x-c|^2).
    struct Fields {
        double B, Bx, By, LB, C, Cx, Cy, LC;
    };
    auto space_part = [se, rsq](const Vec2& x) {
        Fields f;
        double x1 = x.x(), x2 = x.y();
        f.B = x1 * (1 - x1) * x2 * (1 - x2);
        f.Bx = (1 - 2 * x1) * x2 * (1 - x2);
        f.By = x1 * (1 - x1) * (1 - 2 * x2);
        f.LB = -2 * x2 * (1 - x2) - 2 * x1 * (1 - x1);
        double dx = x1 - 0.5, dy = x2 - 0.5;
        double z = se * (rsq - dx * dx - dy * dy);
        double zx = -2 * se * dx, zy = -2 * se * dy, lz = -4 * se;
        double den = 1 + z * z;
        f.C = 0.5 + std::atan(z) / M_PI;
        f.Cx = zx / (M_PI * den);
        f.Cy = zy / (M_PI * den);
        f.LC = (lz * den - 2 * z * (zx * zx + zy * zy)) / (M_PI * den * den);
        return f;
    };

    p.has_exact = true;
    p.exact = {[space_part](const Vec2& x, double t) {
        Fields f = space_part(x);
        return 16 * std::sin(M_PI * t) * f.B * f.C;
    }};
    p.exact_grad = {[space_part](const Vec2& x, double t) {
        Fields f = space_part(x);
        double a = 16 * std::sin(M_PI * t);
        return Vec2(a * (f.Bx * f.C + f.B * f.Cx), a * (f.By * f.C + f.B * f.Cy));
    }};
    p.exact_dt = {[space_part](const Vec2& x, double t) {
        Fields f = space_part(x);
        return 16 * M_PI * std::cos(M_PI * t) * f.B * f.C;
    }};
    p.source = {[space_part, eps](const Vec2& x, double t) {
        Fields f = space_part(x);
        double a = 16 * std::sin(M_PI * t);
        double u = a * f.B * f.C;
        double ut = 16 * M_PI * std::cos(M_PI * t) * f.B * f.C;
        double lap = a * (f.LB * f.C + 2 * (f.Bx * f.Cx + f.By * f.Cy) + f.B * f.LC);
        double conv = a * (2 * (f.Bx * f.C + f.B * f.Cx) +
                           3 * (f.By * f.C + f.B * f.Cy));
        return ut - eps * lap + conv + u * u * u * u;
    }};
    p.dirichlet = {[](const Vec2&, double) { return 0.0; }};
    p.initial = {[](const Vec2&) { return 0.0; }};
    return p;
}

ProblemSpec example2() {
    ProblemSpec p;
    p.name = "ex2";
    p.n_components = 2;
    p.domain = {0.0, 0.0, 1.0, 1.0};
    const double eps = 1e-5;
    p.diffusion = {const_diffusion(eps), const_diffusion(eps)};
    p.velocity = {const_velocity(1.0, 0.0), const_velocity(-1.0, 0.0)};
    p.velocity_div = {zero_div(), zero_div()};
    p.reaction = [](const Vec2&, const Eigen::VectorXd& u, int) {
        return u[0] * u[1];
    };
    p.reaction_jac = [](const Vec2&, const Eigen::VectorXd& u, int, int j) {
        return j == 0 ? u[1] : u[0];
    };
    p.kappa = 0.0;
    p.final_time = 1.0;

    const double d = 1.0 / std::sqrt(5.0 * eps);
    auto s1 = [d](const Vec2& x, double t) { return (2 * x.x() - 0.2 * t - 0.8) * d; };
    auto s2 = [d](const Vec2& x, double t) { return (2 * x.x() + 0.2 * t - 0.9) * d; };
    auto u1 = [s1](const Vec2& x, double t) { return 0.5 * (1 - std::tanh(s1(x, t))); };
    auto u2 = [s2](const Vec2& x, double t) { return 0.5 * (1 + std::tanh(s2(x, t))); };

    p.has_exact = true;
    p.exact = {u1, u2};
    p.exact_grad = {
        [s1, d](const Vec2& x, double t) {
            double c = sech(s1(x, t));
            return Vec2(-d * c * c, 0.0);
        },
        [s2, d](const Vec2& x, double t) {
            double c = sech(s2(x, t));
            return Vec2(d * c * c, 0.0);
        }};
    p.exact_dt = {
        [s1, d](const Vec2& x, double t) {
            double c = sech(s1(x, t));
            return 0.1 * d * c * c;
        },
        [s2, d](const Vec2& x, double t) {
            double c = sech(s2(x, t));
            return 0.1 * d * c * c;
        }};
    p.source = {
        [s1, u1, u2, d, eps](const Vec2& x, double t) {
            double s = s1(x, t), c = sech(s);
            double ut = 0.1 * d * c * c;
            double lap = 4 * d * d * c * c * std::tanh(s);
            double conv = -d * c * c; // beta1 = (1,0)
            return ut - eps * lap + conv + u1(x, t) * u2(x, t);
        },
        [s2, u1, u2, d, eps](const Vec2& x, double t) {
            double s = s2(x, t), c = sech(s);
            double ut = 0.1 * d * c * c;
            double lap = -4 * d * d * c * c * std::tanh(s);
            double conv = -d * c * c; // beta2 = (-1,0), du2/dx = +d c^2
            return ut - eps * lap + conv + u1(x, t) * u2(x, t);
        }};
    p.dirichlet = {u1, u2};
    p.initial = {[u1](const Vec2& x) { return u1(x, 0.0); },
                 [u2](const Vec2& x) { return u2(x, 0.0); }};
    return p;
}

ProblemSpec example3() {
    ProblemSpec p;
    p.name = "ex3";
    p.n_components = 1;
    p.domain = {0.0, 0.0, 1.0, 1.0};
    const double eps = 1e-4, gamma = 100.0;
    const double a = std::sqrt(gamma / (4.0 * eps)); // 500
    const double b = -0.02 + std::sqrt(gamma * eps); // 0.08
    p.diffusion = {const_diffusion(eps)};
    p.velocity = {const_velocity(-0.01, -0.01)};
    p.velocity_div = {zero_div()};
    p.reaction = [gamma](const Vec2&, const Eigen::VectorXd& u, int) {
        return gamma * u[0] * u[0] * (u[0] - 1.0);
    };
    p.reaction_jac = [gamma](const Vec2&, const Eigen::VectorXd& u, int, int) {
        return gamma * (3.0 * u[0] * u[0] - 2.0 * u[0]);
    };
    p.kappa = 0.0;
    p.final_time = 1.0;

    auto w = [a, b](const Vec2& x, double t) {
        return a * (x.x() + x.y() - b * t) + a * (b - 1.0);
    };
    auto uex = [w](const Vec2& x, double t) {
        return 0.5 * (1.0 - std::tanh(0.5 * w(x, t)));
    };
    // e^w u^2 without overflow: q = e^w/(1+e^w)^2 = sech^2(w/2)/4.
    auto q = [w](const Vec2& x, double t) {
        double c = sech(0.5 * w(x, t));
        return 0.25 * c * c;
    };

    p.has_exact = true;
    p.exact = {uex};
    p.exact_grad = {[q, a](const Vec2& x, double t) {
        double v = -a * q(x, t);
        return Vec2(v, v);
    }};
    p.exact_dt = {[q, a, b](const Vec2& x, double t) { return a * b * q(x, t); }};
    p.source = {[](const Vec2&, double) { return 0.0; }};
    p.dirichlet = {uex};
    p.initial = {[uex](const Vec2& x) { return uex(x, 0.0); }};
    return p;
}

DarcyResult example4_darcy(const Example4Options& opts) {
    Rect domain{0.0, 0.0, 3.0, 2.0};
    MeshPtr mesh = build_structured(domain, opts.darcy_nx, opts.darcy_ny);
    PermeabilityField perm = opts.permeability;
    return darcy_solve([perm](const Vec2& x) { return perm(x); }, opts.mu, mesh,
                       opts.darcy_degree);
}

ProblemSpec example4(const Example4Options& opts) {
    ProblemSpec p;
    p.name = "ex4";
    p.n_components = 1;
    p.domain = {0.0, 0.0, 3.0, 2.0};
    p.diffusion = {[](const Vec2&) {
        Mat2 e = Mat2::Zero();
        e(0, 0) = 1e-3;
        e(1, 1) = 1e-4;
        return e;
    }};
    auto darcy = std::make_shared<DarcyResult>(example4_darcy(opts));
    p.velocity = {[darcy](const Vec2& x, double) { return darcy->velocity(x); }};
    p.velocity_div = {zero_div()}; // divergence-free by construction
    p.static_velocity = true;
    p.reaction = [](const Vec2&, const Eigen::VectorXd& u, int) {
        return u[0] / (1.0 + u[0]);
    };
    p.reaction_jac = [](const Vec2&, const Eigen::VectorXd& u, int, int) {
        double d = 1.0 + u[0];
        return 1.0 / (d * d);
    };
    p.source = {[](const Vec2&, double) { return 0.0; }};
    p.dirichlet = {[](const Vec2&, double) { return 1.0; }};
    p.boundary = [](const Vec2& mid) {
        return std::abs(mid.x()) < 1e-10 ? EdgeKind::Dirichlet : EdgeKind::Neumann;
    };
    p.initial = {[](const Vec2&) { return 0.0; }};
    p.kappa = 0.0;
    p.final_time = 1.0;
    return p;
}

ProblemSpec stationary_snapshot(const ProblemSpec& prob, double t) {
    if (!prob.has_exact || prob.exact_dt.empty())
        throw std::invalid_argument("stationary_snapshot: needs exact_dt");
    ProblemSpec p = prob;
    p.name = prob.name + "-stationary";
    for (int c = 0; c < prob.n_components; ++c) {
        auto f = prob.source[c];
        auto dt = prob.exact_dt[c];
        p.source[c] = [f, dt, t](const Vec2& x, double) {
            return f(x, t) - dt(x, t);
        };
        auto ex = prob.exact[c];
        p.dirichlet[c] = [ex, t](const Vec2& x, double) { return ex(x, t); };
        p.exact[c] = [ex, t](const Vec2& x, double) { return ex(x, t); };
        auto exg = prob.exact_grad[c];
        p.exact_grad[c] = [exg, t](const Vec2& x, double) { return exg(x, t); };
        p.exact_dt[c] = [](const Vec2&, double) { return 0.0; };
    }
    return p;
}

} // namespace adr
