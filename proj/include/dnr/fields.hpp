#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "dnr/field.hpp"
#include "dnr/grid.hpp"

namespace dnr {

/// Coefficient triple (A, B, q) of the convection-diffusion operator
///   du/dt - Lap u + A.grad u + (div B) u + q u.
struct CoefficientSet {
    VectorField<double> A, B;
    SpaceTimeField<double> q;

    CoefficientSet() = default;
    explicit CoefficientSet(const SpaceTimeGrid& g) : A(g), B(g), q(g) {}

    const SpaceTimeGrid& grid() const { return q.grid; }

    /// True when every coefficient slice repeats over time; lets the
    /// steppers reuse one factorization.
    bool time_invariant() const {
        const int m = q.grid.num_levels();
        for (int k = 1; k < m; ++k) {
            if ((A.x.slices[k] != A.x.slices[0]).any()) return false;
            if ((A.y.slices[k] != A.y.slices[0]).any()) return false;
            if ((B.x.slices[k] != B.x.slices[0]).any()) return false;
            if ((B.y.slices[k] != B.y.slices[0]).any()) return false;
            if ((q.slices[k] != q.slices[0]).any()) return false;
        }
        return true;
    }
};

/// Gauge function phi with phi = 0 on the lateral boundary, carried together
/// with its space gradient and time derivative.
struct GaugeFunction {
    SpaceTimeField<double> phi;
    VectorField<double> grad_phi;
    SpaceTimeField<double> dt_phi;

    GaugeFunction() = default;
    explicit GaugeFunction(const SpaceTimeGrid& g) : phi(g), grad_phi(g), dt_phi(g) {}

    const SpaceTimeGrid& grid() const { return phi.grid; }

    double boundary_sup() const {
        const SpaceTimeGrid& g = phi.grid;
        double m = 0;
        for (int k = 0; k <= g.nt; ++k)
            for (int j = 0; j < g.npy(); ++j)
                for (int i = 0; i < g.npx(); ++i)
                    if (g.on_spatial_boundary(i, j))
                        m = std::max(m, std::abs(phi(i, j, k)));
        return m;
    }
};

/// Build a gauge function from closures with analytic derivatives.
inline GaugeFunction make_gauge(const SpaceTimeGrid& g, const FieldFn& phi,
                                const VectorFn& grad, const FieldFn& dt) {
    GaugeFunction out(g);
    out.phi = sample(g, phi);
    out.grad_phi = sample(g, grad);
    out.dt_phi = sample(g, dt);
    return out;
}

/// Coefficient change (A, B, q) -> (A + 2 grad phi, B + grad phi,
/// q - dphi/dt - |grad phi|^2 - A1 . grad phi) that leaves the DN map fixed.
/// The convection field entering the q update defaults to c.A.
inline CoefficientSet gauge_transform(const CoefficientSet& c, const GaugeFunction& g,
                                      const VectorField<double>* a1_for_q = nullptr) {
    const SpaceTimeGrid& gr = c.grid();
    if (gr.nx != g.grid().nx || gr.ny != g.grid().ny || gr.nt != g.grid().nt)
        throw ShapeError("gauge_transform: grid mismatch between coefficients and gauge");
    const VectorField<double>& a1 = a1_for_q ? *a1_for_q : c.A;
    CoefficientSet out(gr);
    for (int k = 0; k <= gr.nt; ++k) {
        out.A.x.slices[k] = c.A.x.slices[k] + 2.0 * g.grad_phi.x.slices[k];
        out.A.y.slices[k] = c.A.y.slices[k] + 2.0 * g.grad_phi.y.slices[k];
        out.B.x.slices[k] = c.B.x.slices[k] + g.grad_phi.x.slices[k];
        out.B.y.slices[k] = c.B.y.slices[k] + g.grad_phi.y.slices[k];
        out.q.slices[k] = c.q.slices[k] - g.dt_phi.slices[k] -
                          g.grad_phi.x.slices[k].square() -
                          g.grad_phi.y.slices[k].square() -
                          a1.x.slices[k] * g.grad_phi.x.slices[k] -
                          a1.y.slices[k] * g.grad_phi.y.slices[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mollifier
// ---------------------------------------------------------------------------

/// Tensor-product C^inf bump kernel at smoothing scale rho^(-1/3) per axis,
/// discretely normalized to unit mass.
struct MollifierKernel {
    double rho = 0;
    double support_radius = 0;  // rho^(-1/3) in each of x, y, t
    std::vector<double> wx, wy, wt;  // per-axis tap weights, each summing to 1

    static double bump(double r) {
        const double r2 = r * r;
        return r2 < 1.0 ? std::exp(-1.0 / (1.0 - r2)) : 0.0;
    }

    /// Analytic kernel value (unit total mass up to quadrature tolerance).
    double value(double x, double y, double t) const {
        const double s = 1.0 / support_radius;
        return norm_const * bump(x * s) * bump(y * s) * bump(t * s) * s * s * s;
    }

    double norm_const = 1.0;
};

namespace detail {
// Composite Simpson of the 1-D bump over [-1,1]; the integrand is smooth.
inline double bump_mass_1d() {
    const int n = 2048;
    const double h = 2.0 / n;
    double acc = MollifierKernel::bump(-1.0) + MollifierKernel::bump(1.0);
    for (int i = 1; i < n; ++i)
        acc += MollifierKernel::bump(-1.0 + i * h) * ((i % 2) ? 4.0 : 2.0);
    return acc * h / 3.0;
}

inline std::vector<double> axis_taps(double radius, double h) {
    const int m = static_cast<int>(std::ceil(radius / h));
    std::vector<double> w(2 * m + 1);
    double sum = 0;
    for (int a = -m; a <= m; ++a) {
        w[a + m] = MollifierKernel::bump(a * h / radius);
        sum += w[a + m];
    }
    for (double& v : w) v /= sum;
    return w;
}
}  // namespace detail

inline MollifierKernel make_mollifier(double rho, const SpaceTimeGrid& g) {
    if (rho <= 1.0) throw ParameterError("make_mollifier: rho must exceed 1");
    MollifierKernel k;
    k.rho = rho;
    k.support_radius = std::pow(rho, -1.0 / 3.0);
    const double m1 = detail::bump_mass_1d();
    k.norm_const = 1.0 / (m1 * m1 * m1);
    k.wx = detail::axis_taps(k.support_radius, g.hx);
    k.wy = detail::axis_taps(k.support_radius, g.hy);
    k.wt = detail::axis_taps(k.support_radius, g.dt);
    return k;
}

namespace detail {
template <typename Scalar>
BoxField<Scalar> convolve_separable(const BoxField<Scalar>& in,
                                    const std::vector<double>& wx,
                                    const std::vector<double>& wy,
                                    const std::vector<double>& wt) {
    const int mx = (static_cast<int>(wx.size()) - 1) / 2;
    const int my = (static_cast<int>(wy.size()) - 1) / 2;
    const int mt = (static_cast<int>(wt.size()) - 1) / 2;
    BoxField<Scalar> tmp = in, out = in;
    // x pass
    for (int k = 0; k < in.npt; ++k) {
        tmp.slices[k].setZero();
        for (int a = -mx; a <= mx; ++a) {
            const double w = wx[a + mx];
            const int lo = std::max(0, -a), hi = std::min(in.npx, in.npx - a);
            tmp.slices[k].block(lo, 0, hi - lo, in.npy) +=
                static_cast<Scalar>(w) * in.slices[k].block(lo + a, 0, hi - lo, in.npy);
        }
    }
    // y pass
    for (int k = 0; k < in.npt; ++k) {
        out.slices[k].setZero();
        for (int b = -my; b <= my; ++b) {
            const double w = wy[b + my];
            const int lo = std::max(0, -b), hi = std::min(in.npy, in.npy - b);
            out.slices[k].block(0, lo, in.npx, hi - lo) +=
                static_cast<Scalar>(w) * tmp.slices[k].block(0, lo + b, in.npx, hi - lo);
        }
    }
    // t pass
    for (int k = 0; k < in.npt; ++k) {
        tmp.slices[k].setZero();
        for (int c = -mt; c <= mt; ++c) {
            const int kk = k + c;
            if (kk < 0 || kk >= in.npt) continue;
            tmp.slices[k] += static_cast<Scalar>(wt[c + mt]) * out.slices[kk];
        }
    }
    return tmp;
}
}  // namespace detail

/// Discrete convolution with the scale-rho mollifier after zero extension.
/// The result lives on a box enlarged by the kernel support.  The samples on
/// the rim of the cylinder carry tensor-trapezoid half weights so the
/// discrete convolution quadrature matches the zero-extended continuum mass
/// (the jump of A 1_Q sits between the last sample and the extension).
inline BoxField<double> mollify(const SpaceTimeField<double>& f, double rho) {
    if (rho <= 1.0) throw ParameterError("mollify: rho must exceed 1");
    const MollifierKernel k = make_mollifier(rho, f.grid);
    BoxField<double> ext = zero_extend(f, 2 * k.support_radius, 2 * k.support_radius,
                                       2 * k.support_radius);
    const SpaceTimeGrid& g = f.grid;
    const int mx = static_cast<int>(std::llround(-ext.x0 / g.hx));
    const int my = static_cast<int>(std::llround(-ext.y0 / g.hy));
    const int mt = static_cast<int>(std::llround(-ext.t0 / g.dt));
    Slice<double> rim = Slice<double>::Ones(g.npx(), g.npy());
    rim.row(0) *= 0.5;
    rim.row(g.npx() - 1) *= 0.5;
    rim.col(0) *= 0.5;
    rim.col(g.npy() - 1) *= 0.5;
    for (int kk = 0; kk <= g.nt; ++kk) {
        const double wt = (kk == 0 || kk == g.nt) ? 0.5 : 1.0;
        ext.slices[kk + mt].block(mx, my, g.npx(), g.npy()) =
            wt * rim * f.slices[kk];
    }
    return detail::convolve_separable(ext, k.wx, k.wy, k.wt);
}

struct MollifiedVector {
    BoxField<double> x, y;
};

inline MollifiedVector mollify(const VectorField<double>& f, double rho) {
    return {mollify(f.x, rho), mollify(f.y, rho)};
}

/// L1 norm over the box (cell-volume weights; the field vanishes near the rim).
inline double l1_norm_box(const BoxField<double>& b) {
    double acc = 0;
    for (const auto& s : b.slices) acc += s.abs().sum();
    return acc * b.hx * b.hy * b.dt;
}

/// L1 distance between a mollified box field and the zero-extended original.
inline double mollify_l1_error(const SpaceTimeField<double>& f, double rho) {
    const BoxField<double> m = mollify(f, rho);
    double acc = 0;
    for (int k = 0; k < m.npt; ++k)
        for (int j = 0; j < m.npy; ++j)
            for (int i = 0; i < m.npx; ++i) {
                // original = zero outside the grid box
                double orig = 0;
                const double xq = m.x(i), yq = m.y(j), tq = m.t(k);
                const SpaceTimeGrid& g = f.grid;
                if (xq >= -1e-14 && xq <= g.Lx + 1e-14 && yq >= -1e-14 &&
                    yq <= g.Ly + 1e-14 && tq >= -1e-14 && tq <= g.T + 1e-14) {
                    const int ii = static_cast<int>(std::round(xq / g.hx));
                    const int jj = static_cast<int>(std::round(yq / g.hy));
                    const int kk = static_cast<int>(std::round(tq / g.dt));
                    if (ii >= 0 && ii < g.npx() && jj >= 0 && jj < g.npy() && kk >= 0 &&
                        kk <= g.nt)
                        orig = f(ii, jj, kk);
                }
                acc += std::abs(m.at(i, j, k) - orig);
            }
    return acc * m.hx * m.hy * m.dt;
}

// ---------------------------------------------------------------------------
// Mollifier scaling audit
// ---------------------------------------------------------------------------

struct MollifierAuditRow {
    double rho;
    double w1_norm;  // sup norm of first differences
    double w2_norm;  // sup norm of second differences
};

struct MollifierAudit {
    std::vector<MollifierAuditRow> rows;
    double slope_k1 = 0;  // fitted exponent of log ||.||_{W^1} vs log rho
    double slope_k2 = 0;
    bool pass = false;
};

namespace detail {
inline double fit_slope(const std::vector<double>& lx, const std::vector<double>& ly) {
    const int n = static_cast<int>(lx.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::pair<double, double> box_diff_sup(const BoxField<double>& b) {
    double d1 = 0, d2 = 0;
    for (int k = 0; k < b.npt; ++k) {
        const auto& s = b.slices[k];
        for (int j = 0; j < b.npy; ++j)
            for (int i = 0; i < b.npx; ++i) {
                if (i + 1 < b.npx) d1 = std::max(d1, std::abs(s(i + 1, j) - s(i, j)) / b.hx);
                if (j + 1 < b.npy) d1 = std::max(d1, std::abs(s(i, j + 1) - s(i, j)) / b.hy);
                if (k + 1 < b.npt)
                    d1 = std::max(d1, std::abs(b.slices[k + 1](i, j) - s(i, j)) / b.dt);
                if (i > 0 && i + 1 < b.npx)
                    d2 = std::max(d2, std::abs(s(i + 1, j) - 2 * s(i, j) + s(i - 1, j)) /
                                          (b.hx * b.hx));
                if (j > 0 && j + 1 < b.npy)
                    d2 = std::max(d2, std::abs(s(i, j + 1) - 2 * s(i, j) + s(i, j - 1)) /
                                          (b.hy * b.hy));
                if (k > 0 && k + 1 < b.npt)
                    d2 = std::max(d2, std::abs(b.slices[k + 1](i, j) - 2 * s(i, j) +
                                               b.slices[k - 1](i, j)) /
                                          (b.dt * b.dt));
            }
    }
    return {d1, d2};
}
}  // namespace detail

/// Measures W^{k,inf} norms of the mollified field over a rho sweep and fits
/// the growth exponents; passes when slope_k <= k/3 + 0.1 for k = 1, 2.
inline MollifierAudit mollifier_norm_audit(const SpaceTimeField<double>& f,
                                           const std::vector<double>& rho_list) {
    if (rho_list.size() < 3)
        throw AuditError("mollifier_norm_audit: need at least 3 rho samples");
    if (rho_list.back() / rho_list.front() < 4.0)
        throw AuditError("mollifier_norm_audit: rho sweep must span a factor >= 4");
    MollifierAudit audit;
    std::vector<double> lr, l1, l2;
    for (double rho : rho_list) {
        const BoxField<double> m = mollify(f, rho);
        const auto [d1, d2] = detail::box_diff_sup(m);
        audit.rows.push_back({rho, d1, d2});
        lr.push_back(std::log(rho));
        l1.push_back(std::log(std::max(d1, 1e-300)));
        l2.push_back(std::log(std::max(d2, 1e-300)));
    }
    audit.slope_k1 = detail::fit_slope(lr, l1);
    audit.slope_k2 = detail::fit_slope(lr, l2);
    audit.pass = audit.slope_k1 <= 1.0 / 3.0 + 0.1 && audit.slope_k2 <= 2.0 / 3.0 + 0.1;
    return audit;
}

// ---------------------------------------------------------------------------
// Curl and gauge potential
// ---------------------------------------------------------------------------

/// The single 2-D component d1 a2 - d2 a1 of the 2-form dA.
inline SpaceTimeField<double> curl_2form(const VectorField<double>& A) {
    const SpaceTimeGrid& g = A.grid();
    SpaceTimeField<double> out(g);
    for (int k = 0; k <= g.nt; ++k)
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i)
                out(i, j, k) = ddx(A.y, i, j, k) - ddy(A.x, i, j, k);
    return out;
}

struct GaugePotentialOptions {
    double curl_threshold_factor = 10.0;  // threshold = factor * max(hx, hy)
    int ray_nodes = 64;                   // Simpson nodes per ray (even)
    std::optional<Vec2> chart_origin;     // defaults to the domain center
};

/// Gauge potential phi(., t) with grad phi = -A/2 for a discretely curl-free,
/// compactly supported A, via Simpson quadrature along rays from the chart
/// origin, then shifted so phi vanishes on the lateral boundary.
inline SpaceTimeField<double> gauge_potential_from_curl_free(
    const VectorField<double>& A, const GaugePotentialOptions& opt = {}) {
    const SpaceTimeGrid& g = A.grid();
    const double thresh = opt.curl_threshold_factor * std::max(g.hx, g.hy);
    const SpaceTimeField<double> curl = curl_2form(A);
    double curl_sup = 0;
    for (int k = 0; k <= g.nt; ++k)
        for (int j = 1; j <= g.ny; ++j)
            for (int i = 1; i <= g.nx; ++i)
                curl_sup = std::max(curl_sup, std::abs(curl(i, j, k)));
    if (curl_sup > thresh)
        throw NotCurlFreeError("gauge_potential_from_curl_free: field is not "
                               "discretely curl-free (residual " +
                                   std::to_string(curl_sup) + ", threshold " +
                                   std::to_string(thresh) + ")",
                               curl_sup);

    const Vec2 c = opt.chart_origin.value_or(Vec2(0.5 * g.Lx, 0.5 * g.Ly));
    int m = opt.ray_nodes;
    if (m % 2) ++m;
    SpaceTimeField<double> phi(g);
    const BoxField<double> ax = zero_extend(A.x, 0, 0, 0);
    const BoxField<double> ay = zero_extend(A.y, 0, 0, 0);
    for (int k = 0; k <= g.nt; ++k) {
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) {
                const Vec2 d(g.x(i) - c[0], g.y(j) - c[1]);
                // Simpson along s in [0,1] of A(c + s d, t) . d
                auto f = [&](double s) {
                    const double px = c[0] + s * d[0], py = c[1] + s * d[1];
                    return ax.sample_xy(px, py, k) * d[0] + ay.sample_xy(px, py, k) * d[1];
                };
                const double h = 1.0 / m;
                double acc = f(0.0) + f(1.0);
                for (int a = 1; a < m; ++a) acc += f(a * h) * ((a % 2) ? 4.0 : 2.0);
                phi(i, j, k) = -acc * h / 3.0 / 2.0;
            }
        // normalize so phi vanishes outside the support: subtract its value
        // at the domain corner, which lies outside supp(A)
        const double ref = phi(0, 0, k);
        phi.slices[k] -= ref;
    }
    return phi;
}

/// Assemble a GaugeFunction from a curl-free difference field: grad phi is the
/// exact identity -A/2, the time derivative comes from centered differences.
inline GaugeFunction gauge_from_field(const VectorField<double>& A,
                                      const GaugePotentialOptions& opt = {}) {
    GaugeFunction out(A.grid());
    out.phi = gauge_potential_from_curl_free(A, opt);
    const SpaceTimeGrid& g = A.grid();
    for (int k = 0; k <= g.nt; ++k) {
        out.grad_phi.x.slices[k] = -0.5 * A.x.slices[k];
        out.grad_phi.y.slices[k] = -0.5 * A.y.slices[k];
    }
    for (int k = 0; k <= g.nt; ++k)
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i)
                out.dt_phi(i, j, k) = ddt(out.phi, i, j, k);
    return out;
}

}  // namespace dnr
