#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dnr/forward.hpp"
#include "dnr/quasilinear.hpp"

namespace dnr {

/// Value of the DN-difference bilinear form for one pair of boundary data,
/// with the three representation-formula terms kept separately.  The sum of
/// their moduli serves as the cancellation scale for gauge checks.
struct DNPairingSample {
    Complex value{0, 0};
    Complex term_conv{0, 0};  // int (A1-A2).grad u1 u2
    Complex term_flux{0, 0};  // -int (B1-B2).grad(u1 u2)
    Complex term_zero{0, 0};  // int (q1-q2) u1 u2
    double normal_scale = 0;
    double quadrature_residual = 0;
    std::string probe_id;
};

/// Variational DN functional: the discrete quadrature of
///   int_Q [ dt(u) w + grad u . grad w + (A.grad u) w + (div B) u w + q u w ]
/// with u = solve_forward(c, g, 0).  The time term is evaluated in the
/// du/dt form (equal to the -u dw/dt form plus the bottom-cap term; the two
/// coincide for the zero initial cap of the DN setting), and the convection,
/// divergence and zero-order terms reuse the solver stencil, so the value is
/// independent of the extension of w away from the lateral boundary up to the
/// solver tolerance.
inline double dn_apply(const CoefficientSet& c, const SpaceTimeField<double>& g,
                       const SpaceTimeField<double>& w, const SchemeOptions& opts = {}) {
    const SpaceTimeGrid& gr = c.grid();
    if (gr.nx != w.grid.nx || gr.ny != w.grid.ny || gr.nt != w.grid.nt)
        throw ShapeError("dn_apply: test function grid mismatch");
    double top = 0;
    for (int j = 0; j < gr.npy(); ++j)
        for (int i = 0; i < gr.npx(); ++i) top = std::max(top, std::abs(w(i, j, gr.nt)));
    if (top > 1e-12)
        throw DataError("dn_apply: test function must vanish on the top cap");

    SchemeOptions o = opts;
    o.theta = 1.0;  // the functional form below pairs with the implicit step
    const Solution<double> sol = solve_forward<double>(c, g, o);
    const SpaceTimeField<double>& u = sol.values;

    const double cell = gr.hx * gr.hy;
    double t_time = 0;
    for (int k = 1; k <= gr.nt; ++k) {
        const auto& uk = u.slices[k];
        const auto& up = u.slices[k - 1];
        const auto& wk = w.slices[k];
        t_time += ((uk - up) * wk).sum() * cell;
    }

    double t_diff = 0;
    for (int k = 1; k <= gr.nt; ++k) {
        const auto& uk = u.slices[k];
        const auto& wk = w.slices[k];
        double sx = 0, sy = 0;
        for (int j = 1; j <= gr.ny; ++j)
            for (int i = 0; i <= gr.nx; ++i)
                sx += (uk(i + 1, j) - uk(i, j)) * (wk(i + 1, j) - wk(i, j));
        for (int i = 1; i <= gr.nx; ++i)
            for (int j = 0; j <= gr.ny; ++j)
                sy += (uk(i, j + 1) - uk(i, j)) * (wk(i, j + 1) - wk(i, j));
        t_diff += gr.dt * (sx * gr.hy / gr.hx + sy * gr.hx / gr.hy);
    }

    // first- and zero-order terms through the solver stencil
    OperatorSpec spec;
    spec.conv = &c.A;
    spec.flux = &c.B;
    spec.q = &c.q;
    spec.peclet_threshold = o.peclet_threshold;
    spec.include_laplacian = false;
    const bool inv = c.time_invariant();
    DiscreteOperator shared;
    if (inv) shared = build_operator(gr, spec, 1);
    double t_vol = 0;
    for (int k = 1; k <= gr.nt; ++k) {
        const DiscreteOperator op = inv ? shared : build_operator(gr, spec, k);
        const auto ui = detail::interior_vec<double>(gr, u.slices[k]);
        const auto ur = detail::ring_vec<double>(gr, u.slices[k]);
        const auto wi = detail::interior_vec<double>(gr, w.slices[k]);
        t_vol += gr.dt * cell *
                 ((op.interior * ui + op.ring * ur).array() * wi.array()).sum();
    }
    return t_time + t_diff + t_vol;
}

namespace detail {

/// Three-term representation quadrature for solution fields u1 (forward) and
/// u2 (adjoint).  For conjugated geometric-optics fields the forward gradient
/// carries the extra rho*omega drift.
template <typename Scalar>
DNPairingSample pairing_terms(const CoefficientSet& c1, const CoefficientSet& c2,
                              const SpaceTimeField<Scalar>& u1,
                              const SpaceTimeField<Scalar>& u2, double rho_shift = 0.0,
                              Vec2 omega = Vec2::Zero()) {
    const SpaceTimeGrid& g = c1.grid();
    SpaceTimeField<Scalar> prod(g);
    for (int k = 0; k <= g.nt; ++k) prod.slices[k] = u1.slices[k] * u2.slices[k];

    auto cplx = [](Scalar v) { return Complex(v); };
    DNPairingSample s;
    s.term_conv = integrate_q<Complex>(g, [&](int i, int j, int k) {
        const double dax = c1.A.x(i, j, k) - c2.A.x(i, j, k);
        const double day = c1.A.y(i, j, k) - c2.A.y(i, j, k);
        if (dax == 0.0 && day == 0.0) return Complex(0, 0);
        const Complex gx = cplx(ddx(u1, i, j, k)) + rho_shift * omega[0] * cplx(u1(i, j, k));
        const Complex gy = cplx(ddy(u1, i, j, k)) + rho_shift * omega[1] * cplx(u1(i, j, k));
        return (dax * gx + day * gy) * cplx(u2(i, j, k));
    });
    s.term_flux = integrate_q<Complex>(g, [&](int i, int j, int k) {
        const double dbx = c1.B.x(i, j, k) - c2.B.x(i, j, k);
        const double dby = c1.B.y(i, j, k) - c2.B.y(i, j, k);
        if (dbx == 0.0 && dby == 0.0) return Complex(0, 0);
        return -(dbx * cplx(ddx(prod, i, j, k)) + dby * cplx(ddy(prod, i, j, k)));
    });
    s.term_zero = integrate_q<Complex>(g, [&](int i, int j, int k) {
        const double dq = c1.q(i, j, k) - c2.q(i, j, k);
        if (dq == 0.0) return Complex(0, 0);
        return dq * cplx(prod(i, j, k));
    });
    s.value = s.term_conv + s.term_flux + s.term_zero;
    s.normal_scale =
        std::abs(s.term_conv) + std::abs(s.term_flux) + std::abs(s.term_zero);
    return s;
}

}  // namespace detail

/// DN-difference pairing through the representation formula: u1 solves the
/// forward problem for c1 with datum g_plus, u2 the adjoint problem for c2
/// with datum g_minus, and the value is
///   int (A1-A2).grad u1 u2 - int (B1-B2).grad(u1 u2) + int (q1-q2) u1 u2.
inline DNPairingSample dn_pairing_difference(const CoefficientSet& c1,
                                             const CoefficientSet& c2,
                                             const SpaceTimeField<double>& g_plus,
                                             const SpaceTimeField<double>& g_minus,
                                             const SchemeOptions& opts = {}) {
    const SpaceTimeGrid& g = c1.grid();
    if (g.nx != c2.grid().nx || g.ny != c2.grid().ny || g.nt != c2.grid().nt)
        throw ShapeError("dn_pairing_difference: coefficient grids disagree");
    const Solution<double> u1 = solve_forward<double>(c1, g_plus, opts);
    const Solution<double> u2 = solve_adjoint<double>(c2, g_minus, nullptr, opts);
    return detail::pairing_terms(c1, c2, u1.values, u2.values);
}

/// Open subset of the lateral boundary described by tangential spans of the
/// rectangle edges.
struct BoundaryRegion {
    struct Span {
        Edge edge;
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
    };
    std::vector<Span> spans;

    static BoundaryRegion full() {
        BoundaryRegion r;
        for (auto e : {Edge::West, Edge::East, Edge::South, Edge::North})
            r.spans.push_back({e, 0.0, std::numeric_limits<double>::infinity()});
        return r;
    }

    bool contains(const SpaceTimeGrid& g, int i, int j) const {
        for (const auto& s : spans) {
            switch (s.edge) {
                case Edge::West:
                    if (i == 0 && g.y(j) >= s.lo && g.y(j) <= s.hi) return true;
                    break;
                case Edge::East:
                    if (i == g.nx + 1 && g.y(j) >= s.lo && g.y(j) <= s.hi) return true;
                    break;
                case Edge::South:
                    if (j == 0 && g.x(i) >= s.lo && g.x(i) <= s.hi) return true;
                    break;
                case Edge::North:
                    if (j == g.ny + 1 && g.x(i) >= s.lo && g.x(i) <= s.hi) return true;
                    break;
            }
        }
        return false;
    }
};

/// Partial-boundary pairing: data must be supported in gamma1 x [0,T] and
/// gamma2 x [0,T]; support is then enforced by masking and the full pairing
/// machinery runs on the masked data.
inline DNPairingSample dn_restrict(const CoefficientSet& c1, const CoefficientSet& c2,
                                   const SpaceTimeField<double>& g_plus,
                                   const SpaceTimeField<double>& g_minus,
                                   const BoundaryRegion& gamma1,
                                   const BoundaryRegion& gamma2,
                                   const SchemeOptions& opts = {}) {
    const SpaceTimeGrid& g = c1.grid();
    auto check_and_mask = [&](const SpaceTimeField<double>& datum,
                              const BoundaryRegion& region, const char* name) {
        SpaceTimeField<double> masked = datum;
        for (int k = 0; k <= g.nt; ++k)
            for (const auto& [i, j] : detail::ring_nodes(g)) {
                if (region.contains(g, i, j)) continue;
                if (std::abs(datum(i, j, k)) > 1e-12)
                    throw DataError(std::string("dn_restrict: ") + name +
                                    " is supported outside its boundary subset");
                masked(i, j, k) = 0.0;
            }
        return masked;
    };
    const SpaceTimeField<double> gp = check_and_mask(g_plus, gamma1, "g_plus");
    const SpaceTimeField<double> gm = check_and_mask(g_minus, gamma2, "g_minus");
    return dn_pairing_difference(c1, c2, gp, gm, opts);
}

/// Conormal flux samples on every lateral-boundary face and time level.
struct FluxTrace {
    std::vector<BoundaryFace> faces;
    Eigen::MatrixXd values;  // faces x time levels

    double max_abs() const { return values.cwiseAbs().maxCoeff(); }
};

template <typename Scalar>
FluxTrace flux_trace(const Solution<Scalar>& sol) {
    static_assert(std::is_same_v<Scalar, double>,
                  "flux traces are reported for real solutions");
    const SpaceTimeGrid& g = sol.grid();
    FluxTrace tr;
    tr.faces = boundary_faces(g);
    tr.values.resize(static_cast<int>(tr.faces.size()), g.num_levels());
    for (int f = 0; f < static_cast<int>(tr.faces.size()); ++f)
        for (int k = 0; k <= g.nt; ++k)
            tr.values(f, k) = sol.conormal_flux(tr.faces[f], k);
    return tr;
}

/// Nonlinear DN map: conormal derivative of the quasi-linear solution with
/// parabolic-boundary datum G.
inline FluxTrace nonlinear_dn(const QuasiLinearModel& m, const SpaceTimeField<double>& G,
                              const NewtonOptions& nopt = {}) {
    const Solution<double> u = solve_quasilinear(m, G, nopt);
    return flux_trace(u);
}

}  // namespace dnr
