#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "dnr/dnmap.hpp"
#include "dnr/fields.hpp"
#include "dnr/forward.hpp"

namespace dnr {

/// Geometric-optics probe: phase parameters and the two mollified amplitudes
///   b1 = exp(-i(t tau + x.xi)) (1 - exp(-rho^(1/3) t)) exp(-E1/2),
///   b2 = (1 - exp(-rho^(1/3)(T - t))) exp(+E2/2),
/// where E_j integrates the mollified A_j along the half-line in direction
/// omega.  b1 vanishes on the bottom cap and b2 on the top cap.
struct GOProbe {
    double rho = 0;
    Vec2 omega{1, 0};
    Vec2 xi{0, 0};
    double tau = 0;
    SpaceTimeField<Complex> b1, b2;
    std::string id;
};

namespace detail {

inline void check_probe_params(double rho, const Vec2& omega, const Vec2& xi) {
    if (rho <= 1.0) throw ParameterError("go probe: rho must exceed 1");
    if (std::abs(omega.norm() - 1.0) > 1e-12)
        throw ParameterError("go probe: omega must be a unit vector");
    if (std::abs(xi.dot(omega)) > 1e-12)
        throw ParameterError("go probe: xi must be orthogonal to omega");
}

/// Ray-box exit parameter: sup { s >= 0 : p + s w inside [x0,x1]x[y0,y1] }.
inline double ray_exit(double px, double py, const Vec2& w, double x0, double x1,
                       double y0, double y1) {
    double s = std::numeric_limits<double>::infinity();
    if (w[0] > 1e-15) s = std::min(s, (x1 - px) / w[0]);
    if (w[0] < -1e-15) s = std::min(s, (x0 - px) / w[0]);
    if (w[1] > 1e-15) s = std::min(s, (y1 - py) / w[1]);
    if (w[1] < -1e-15) s = std::min(s, (y0 - py) / w[1]);
    return std::max(0.0, s);
}

/// Half-line integral of the mollified field along omega starting at (x, y),
/// trapezoid with step ~ min(h)/2, truncated at the support-box exit.
inline double halfline_integral(const BoxField<double>& ax, const BoxField<double>& ay,
                                const Vec2& omega, double x, double y, int kbox,
                                double step) {
    const double sexit =
        ray_exit(x, y, omega, ax.x0, ax.x_max(), ax.y0, ax.y_max());
    if (sexit <= 0) return 0.0;
    const int m = std::max(2, static_cast<int>(std::ceil(sexit / step)));
    const double h = sexit / m;
    auto f = [&](double s) {
        const double px = x + s * omega[0], py = y + s * omega[1];
        return ax.sample_xy(px, py, kbox) * omega[0] +
               ay.sample_xy(px, py, kbox) * omega[1];
    };
    double acc = 0.5 * (f(0.0) + f(sexit));
    for (int a = 1; a < m; ++a) acc += f(a * h);
    return acc * h;
}

/// E(x, t) = int_0^inf A_rho(x + s omega, t) . omega ds on all grid nodes.
inline SpaceTimeField<double> halfline_exponent(const SpaceTimeGrid& g,
                                                const MollifiedVector& am,
                                                const Vec2& omega) {
    SpaceTimeField<double> e(g);
    const double step = 0.5 * std::min(g.hx, g.hy);
    const int kt0 = static_cast<int>(std::llround(-am.x.t0 / am.x.dt));
    for (int k = 0; k <= g.nt; ++k) {
        const int kbox = k + kt0;
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i)
                e(i, j, k) =
                    halfline_integral(am.x, am.y, omega, g.x(i), g.y(j), kbox, step);
    }
    return e;
}

}  // namespace detail

/// Forward amplitude b1 for the convection field A1.
inline SpaceTimeField<Complex> amplitude_b1(const SpaceTimeGrid& g, double rho,
                                            const Vec2& omega, const Vec2& xi,
                                            double tau, const VectorField<double>& A1) {
    detail::check_probe_params(rho, omega, xi);
    const MollifiedVector am = mollify(A1, rho);
    const SpaceTimeField<double> e = detail::halfline_exponent(g, am, omega);
    const double r13 = std::pow(rho, 1.0 / 3.0);
    SpaceTimeField<Complex> b(g);
    for (int k = 0; k <= g.nt; ++k) {
        const double t = g.t(k);
        const double tf = 1.0 - std::exp(-r13 * t);
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) {
                const double phase = -(t * tau + g.x(i) * xi[0] + g.y(j) * xi[1]);
                b(i, j, k) = std::polar(tf * std::exp(-0.5 * e(i, j, k)), phase);
            }
    }
    return b;
}

/// Adjoint amplitude b2 for the convection field A2 (opposite exponent sign,
/// no oscillatory factor).
inline SpaceTimeField<Complex> amplitude_b2(const SpaceTimeGrid& g, double rho,
                                            const Vec2& omega, const Vec2& xi,
                                            double tau, const VectorField<double>& A2) {
    detail::check_probe_params(rho, omega, xi);
    const MollifiedVector am = mollify(A2, rho);
    const SpaceTimeField<double> e = detail::halfline_exponent(g, am, omega);
    const double r13 = std::pow(rho, 1.0 / 3.0);
    SpaceTimeField<Complex> b(g);
    for (int k = 0; k <= g.nt; ++k) {
        const double tf = 1.0 - std::exp(-r13 * (g.T - g.t(k)));
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i)
                b(i, j, k) = Complex(tf * std::exp(0.5 * e(i, j, k)), 0.0);
    }
    return b;
}

inline GOProbe make_go_probe(const SpaceTimeGrid& g, double rho, const Vec2& omega,
                             const Vec2& xi, double tau, const VectorField<double>& A1,
                             const VectorField<double>& A2) {
    GOProbe p;
    p.rho = rho;
    p.omega = omega;
    p.xi = xi;
    p.tau = tau;
    p.b1 = amplitude_b1(g, rho, omega, xi, tau, A1);
    p.b2 = amplitude_b2(g, rho, omega, xi, tau, A2);
    return p;
}

/// GO boundary data: conjugated traces of the principal parts together with
/// the log-scale normalization exp(rho^2 t + rho x.omega) they were divided
/// by.  Raw (unnormalized) values are only representable for small rho.
struct GOBoundaryData {
    SpaceTimeField<Complex> g_plus;   // trace of b1, forward datum
    SpaceTimeField<Complex> g_minus;  // trace of b2, adjoint datum
    double rho = 0;
    Vec2 omega{1, 0};
    double normalization_log = 0;  // max over the closed cylinder

    double log_factor(double x, double y, double t) const {
        return rho * rho * t + rho * (x * omega[0] + y * omega[1]);
    }
    Complex raw_plus(const SpaceTimeGrid& g, int i, int j, int k) const {
        if (normalization_log > 700.0)
            throw ParameterError("go boundary data: raw values overflow; use the "
                                 "normalized traces and the recorded factor");
        return g_plus(i, j, k) * std::exp(log_factor(g.x(i), g.y(j), g.t(k)));
    }
};

inline GOBoundaryData go_boundary_data(const SpaceTimeGrid& g, const GOProbe& p) {
    GOBoundaryData d;
    d.g_plus = p.b1;
    d.g_minus = p.b2;
    d.rho = p.rho;
    d.omega = p.omega;
    double mx = 0;
    for (const Vec2& c :
         {Vec2(0, 0), Vec2(g.Lx, 0), Vec2(0, g.Ly), Vec2(g.Lx, g.Ly)})
        mx = std::max(mx, p.omega.dot(c));
    d.normalization_log = p.rho * p.rho * g.T + p.rho * mx;
    return d;
}

/// L2(Q) norm of the transport residual (-2 s omega.grad + A.omega) b with
/// s = +1 for forward amplitudes and s = -1 for adjoint ones.
inline double transport_residual(const SpaceTimeField<Complex>& b,
                                 const VectorField<double>& A, const Vec2& omega,
                                 int sign) {
    const SpaceTimeGrid& g = b.grid;
    const double v = integrate_q<double>(g, [&](int i, int j, int k) {
        const Complex gx = ddx(b, i, j, k);
        const Complex gy = ddy(b, i, j, k);
        const double aw = A.x(i, j, k) * omega[0] + A.y(i, j, k) * omega[1];
        const Complex r =
            -2.0 * sign * (omega[0] * gx + omega[1] * gy) + aw * b(i, j, k);
        return std::norm(r);
    });
    return std::sqrt(v);
}

/// Pairing of GO data through the conjugated solves: the exponential factors
/// of u1 and u2 cancel in every representation-formula term, with the rho
/// omega drift restored in grad u1.
inline DNPairingSample go_pairing(const CoefficientSet& c1, const CoefficientSet& c2,
                                  const GOProbe& p, const SchemeOptions& opts = {}) {
    const CoefficientSet cf = conjugate_forward(c1, p.rho, p.omega);
    const CoefficientSet ca = conjugate_adjoint(c2, p.rho, p.omega);
    const Solution<Complex> v1 = solve_forward<Complex>(cf, p.b1, opts);
    const Solution<Complex> v2 = solve_adjoint<Complex>(ca, p.b2, nullptr, opts);
    DNPairingSample s =
        detail::pairing_terms(c1, c2, v1.values, v2.values, p.rho, p.omega);
    s.probe_id = p.id;
    return s;
}

/// Direct-integral channel rho^{-1} * rho int (A.omega) b1 b2 evaluated on the
/// grid; the cross-check companion of the scaled DN pairing.
inline Complex go_direct_integral(const CoefficientSet& c1, const CoefficientSet& c2,
                                  const GOProbe& p) {
    const SpaceTimeGrid& g = c1.grid();
    return integrate_q<Complex>(g, [&](int i, int j, int k) {
        const double aw = (c1.A.x(i, j, k) - c2.A.x(i, j, k)) * p.omega[0] +
                          (c1.A.y(i, j, k) - c2.A.y(i, j, k)) * p.omega[1];
        if (aw == 0.0) return Complex(0, 0);
        return aw * p.b1(i, j, k) * p.b2(i, j, k);
    });
}

// ---------------------------------------------------------------------------
// Remainder decay audit
// ---------------------------------------------------------------------------

struct RemainderAuditRow {
    double rho;
    double norm_l2;           // || w ||_{L2(Q)}
    double norm_weighted_h1;  // rho^{-1} || w ||_{L2(0,T;H1)}
    double normalization_log;
    int nx, nt;
};

struct RemainderAudit {
    std::vector<RemainderAuditRow> rows;
    bool pass = false;
};

using CoefficientProvider = std::function<CoefficientSet(const SpaceTimeGrid&)>;

struct RemainderAuditOptions {
    bool scale_grid_with_rho = true;
    double rho_h_max = 0.5;  // keep rho * h below this
    int max_nx = 255;
    SchemeOptions scheme{};
};

/// Per-rho grid sized so the conjugated drift stays resolved.
inline SpaceTimeGrid grid_for_rho(const GridConfig& base, double rho,
                                  const RemainderAuditOptions& opt) {
    GridConfig c = base;
    if (opt.scale_grid_with_rho) {
        const int need = static_cast<int>(std::ceil(rho * c.Lx / opt.rho_h_max)) - 1;
        c.nx = std::min(opt.max_nx, std::max(c.nx, need));
        c.ny = std::min(opt.max_nx, std::max(c.ny, need));
        c.nt = std::max(c.nt, c.nx + 1);
    }
    return build_grid(c);
}

/// Realizes the GO remainder as the defect of an honest conjugated solve with
/// the principal-part trace, and reports its decay over the rho sweep.  The
/// pass rule ignores the first (coarsest) transition.
inline RemainderAudit remainder_decay_audit(const CoefficientProvider& provider,
                                            const GridConfig& base,
                                            const std::vector<double>& rho_list,
                                            const Vec2& omega, const Vec2& xi,
                                            double tau,
                                            const RemainderAuditOptions& opt = {}) {
    if (rho_list.size() < 3)
        throw AuditError("remainder_decay_audit: need an increasing list of >= 3 rho");
    for (size_t i = 1; i < rho_list.size(); ++i)
        if (rho_list[i] <= rho_list[i - 1])
            throw AuditError("remainder_decay_audit: rho list must increase");

    RemainderAudit audit;
    for (double rho : rho_list) {
        const SpaceTimeGrid g = grid_for_rho(base, rho, opt);
        const CoefficientSet c = provider(g);
        GOProbe p = make_go_probe(g, rho, omega, xi, tau, c.A, c.A);
        const CoefficientSet cf = conjugate_forward(c, rho, omega);
        const Solution<Complex> v = solve_forward<Complex>(cf, p.b1, opt.scheme);
        SpaceTimeField<Complex> w(g);
        for (int k = 0; k <= g.nt; ++k)
            w.slices[k] = v.values.slices[k] - p.b1.slices[k];
        const double l2 = l2_norm_q(w);
        const double h1sq = integrate_q<double>(g, [&](int i, int j, int k) {
            return std::norm(w(i, j, k)) + std::norm(ddx(w, i, j, k)) +
                   std::norm(ddy(w, i, j, k));
        });
        const GOBoundaryData bd = go_boundary_data(g, p);
        audit.rows.push_back(
            {rho, l2, std::sqrt(h1sq) / rho, bd.normalization_log, g.nx, g.nt});
    }
    audit.pass = true;
    for (size_t i = 2; i < audit.rows.size(); ++i) {
        if (audit.rows[i].norm_l2 > audit.rows[i - 1].norm_l2) audit.pass = false;
        if (audit.rows[i].norm_weighted_h1 > audit.rows[i - 1].norm_weighted_h1)
            audit.pass = false;
    }
    return audit;
}

}  // namespace dnr
