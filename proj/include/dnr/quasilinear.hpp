#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dnr/errors.hpp"
#include "dnr/forward.hpp"

namespace dnr {

/// Quasi-linear right-hand side F(x, t, u, grad u) with analytic first
/// derivatives and the growth constants of its admissible class.
struct QuasiLinearModel {
    using Fn = std::function<double(double x, double y, double t, double u, double vx,
                                    double vy)>;
    using VecFn = std::function<Vec2(double x, double y, double t, double u, double vx,
                                     double vy)>;
    Fn F;
    Fn dF_du;
    VecFn dF_dv;
    double c0 = 1.0, c1 = 1.0, c2 = 1.0, c3 = 10.0;
    std::string name = "model";
};

struct ValidationLattice {
    std::vector<double> u_samples{-2.0, -1.0, 0.0, 0.5, 1.0, 2.0};
    std::vector<double> v_samples{-2.0, -1.0, 0.0, 1.0, 2.0};
    int space_stride = 4;  // subsample the grid when checking pointwise bounds
};

/// Growth conditions of the admissible class:
///   u F >= -c0 |v|^2 - c1 |u|^2 - c2   and   |F| <= c3 (1 + |v|)^2,
/// sampled on a space-time/(u,v) lattice.  Throws naming the failed bound.
inline void validate_growth(const QuasiLinearModel& m, const SpaceTimeGrid& g,
                            const ValidationLattice& lat = {}) {
    for (int k = 0; k <= g.nt; k += std::max(1, g.nt / 8))
        for (int j = 0; j < g.npy(); j += lat.space_stride)
            for (int i = 0; i < g.npx(); i += lat.space_stride)
                for (double u : lat.u_samples)
                    for (double vx : lat.v_samples)
                        for (double vy : lat.v_samples) {
                            const double x = g.x(i), y = g.y(j), t = g.t(k);
                            const double f = m.F(x, y, t, u, vx, vy);
                            const double v2 = vx * vx + vy * vy;
                            if (u * f < -m.c0 * v2 - m.c1 * u * u - m.c2 - 1e-12)
                                throw ModelClassError(
                                    m.name + ": coercivity bound u*F >= -c0|v|^2 - "
                                             "c1|u|^2 - c2 fails on the lattice");
                            const double vb = 1.0 + std::sqrt(v2);
                            if (std::abs(f) > m.c3 * vb * vb + 1e-12)
                                throw ModelClassError(
                                    m.name +
                                    ": growth bound |F| <= c3 (1+|v|)^2 fails on the "
                                    "lattice");
                        }
}

/// Boundary conditions of the class: F(x, 0, u, v) = 0 on the spatial
/// boundary, and (for the slice-recovery theorems) vanishing of the first and
/// second x-derivatives there, probed by finite differences.
inline void validate_boundary_flatness(const QuasiLinearModel& m, const SpaceTimeGrid& g,
                                       const ValidationLattice& lat = {},
                                       double tol = 1e-8) {
    const double d = std::min(g.hx, g.hy);
    for (const auto& [i, j] : detail::ring_nodes(g)) {
        const double x = g.x(i), y = g.y(j);
        for (double u : lat.u_samples)
            for (double vx : lat.v_samples)
                for (double vy : lat.v_samples) {
                    auto f = [&](double px, double py) {
                        return m.F(px, py, 0.0, u, vx, vy);
                    };
                    if (std::abs(f(x, y)) > tol)
                        throw ModelClassError(m.name +
                                              ": F(x,0,u,v) != 0 on the boundary");
                    const double fx = (f(x + d, y) - f(x - d, y)) / (2 * d);
                    const double fy = (f(x, y + d) - f(x, y - d)) / (2 * d);
                    const double fxx = (f(x + d, y) - 2 * f(x, y) + f(x - d, y)) / (d * d);
                    const double fyy = (f(x, y + d) - 2 * f(x, y) + f(x, y - d)) / (d * d);
                    const double fxy = (f(x + d, y + d) - f(x + d, y - d) -
                                        f(x - d, y + d) + f(x - d, y - d)) /
                                       (4 * d * d);
                    const double worst =
                        std::max({std::abs(fx), std::abs(fy), std::abs(fxx),
                                  std::abs(fyy), std::abs(fxy)});
                    if (worst > tol * 10 / d)
                        throw ModelClassError(
                            m.name + ": x-derivatives of F(.,0,u,v) do not vanish on "
                                     "the boundary");
                }
    }
}

/// Compatibility of the parabolic-boundary datum at the t = 0 corner:
/// dG/dt(x,0) = Lap G(x,0) on the spatial boundary.
inline void check_parabolic_compatibility(const SpaceTimeField<double>& G,
                                          double tol = 1e-8) {
    const SpaceTimeGrid& g = G.grid;
    for (const auto& [i, j] : detail::ring_nodes(g)) {
        const double gt =
            (-3.0 * G(i, j, 0) + 4.0 * G(i, j, 1) - G(i, j, 2)) / (2 * g.dt);
        // one-sided second differences where the stencil leaves the grid
        auto d2 = [&](int a, int n, auto val) {
            if (a == 0) return (val(0) - 2 * val(1) + val(2));
            if (a == n - 1) return (val(n - 1) - 2 * val(n - 2) + val(n - 3));
            return (val(a - 1) - 2 * val(a) + val(a + 1));
        };
        const double lxx =
            d2(i, g.npx(), [&](int a) { return G(a, j, 0); }) / (g.hx * g.hx);
        const double lyy =
            d2(j, g.npy(), [&](int a) { return G(i, a, 0); }) / (g.hy * g.hy);
        if (std::abs(gt - lxx - lyy) > tol)
            throw DataError("quasilinear datum: dG/dt(x,0) != Lap G(x,0) on the "
                            "boundary (deviation " +
                            std::to_string(std::abs(gt - lxx - lyy)) + ")");
    }
}

struct NewtonOptions {
    double tol = 1e-10;
    int max_iterations = 50;
    int max_halvings = 12;
};

namespace detail {

/// Centered interior gradient of a slice (used by the quasi-linear residual
/// and its Jacobian; boundary values enter through the stencil).
inline void interior_gradient(const SpaceTimeGrid& g, const Slice<double>& s, int i,
                              int j, double& gx, double& gy) {
    gx = (s(i + 1, j) - s(i - 1, j)) / (2 * g.hx);
    gy = (s(i, j + 1) - s(i, j - 1)) / (2 * g.hy);
}

}  // namespace detail

/// Implicit-Euler time stepping for
///   du/dt - Lap u + F(x, t, u, grad u) = 0,  u = G on the parabolic boundary,
/// with a damped Newton iteration per step (analytic Jacobian).
inline Solution<double> solve_quasilinear(const QuasiLinearModel& m,
                                          const SpaceTimeField<double>& G,
                                          const NewtonOptions& nopt = {},
                                          const SchemeOptions& sopt = {}) {
    const SpaceTimeGrid& g = G.grid;
    validate_growth(m, g);
    check_parabolic_compatibility(G, 1e-8);

    Solution<double> sol(g);
    sol.values.slices[0] = G.slices[0];
    const auto ring = detail::ring_nodes(g);
    for (int k = 1; k <= g.nt; ++k)
        for (const auto& [i, j] : ring) sol.values(i, j, k) = G(i, j, k);

    const detail::NodeIndexer ix{g.nx, g.ny};
    const int n_int = ix.num_interior();
    const double ihx2 = 1.0 / (g.hx * g.hx), ihy2 = 1.0 / (g.hy * g.hy);

    Eigen::VectorXd resid(n_int);
    auto residual = [&](const Slice<double>& s, const Slice<double>& prev, double t,
                        Eigen::VectorXd& out) {
        for (int j = 1; j <= g.ny; ++j)
            for (int i = 1; i <= g.nx; ++i) {
                const double lap = (2 * s(i, j) - s(i - 1, j) - s(i + 1, j)) * ihx2 +
                                   (2 * s(i, j) - s(i, j - 1) - s(i, j + 1)) * ihy2;
                double gx, gy;
                detail::interior_gradient(g, s, i, j, gx, gy);
                out(ix.interior(i, j)) = (s(i, j) - prev(i, j)) / g.dt + lap +
                                         m.F(g.x(i), g.y(j), t, s(i, j), gx, gy);
            }
    };

    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 1; k <= g.nt; ++k) {
        Slice<double> u = sol.values.slices[k];  // ring already holds G
        // warm start from the previous level's interior
        for (int j = 1; j <= g.ny; ++j)
            for (int i = 1; i <= g.nx; ++i) u(i, j) = sol.values(i, j, k - 1);
        const Slice<double>& prev = sol.values.slices[k - 1];
        const double t = g.t(k);

        residual(u, prev, t, resid);
        double rnorm = resid.cwiseAbs().maxCoeff();
        int it = 0;
        while (rnorm > nopt.tol) {
            if (++it > nopt.max_iterations)
                throw NonlinearSolverError(
                    "solve_quasilinear: Newton failed to converge at step " +
                        std::to_string(k) + " (residual " + std::to_string(rnorm) + ")",
                    rnorm);
            trip.clear();
            for (int j = 1; j <= g.ny; ++j)
                for (int i = 1; i <= g.nx; ++i) {
                    const int row = ix.interior(i, j);
                    double gx, gy;
                    detail::interior_gradient(g, u, i, j, gx, gy);
                    const double qu =
                        m.dF_du(g.x(i), g.y(j), t, u(i, j), gx, gy);
                    const Vec2 av = m.dF_dv(g.x(i), g.y(j), t, u(i, j), gx, gy);
                    const double cc = 1.0 / g.dt + 2 * ihx2 + 2 * ihy2 + qu;
                    const double cw = -ihx2 - av[0] / (2 * g.hx);
                    const double ce = -ihx2 + av[0] / (2 * g.hx);
                    const double cs = -ihy2 - av[1] / (2 * g.hy);
                    const double cn = -ihy2 + av[1] / (2 * g.hy);
                    trip.emplace_back(row, row, cc);
                    if (g.interior(i - 1, j)) trip.emplace_back(row, ix.interior(i - 1, j), cw);
                    if (g.interior(i + 1, j)) trip.emplace_back(row, ix.interior(i + 1, j), ce);
                    if (g.interior(i, j - 1)) trip.emplace_back(row, ix.interior(i, j - 1), cs);
                    if (g.interior(i, j + 1)) trip.emplace_back(row, ix.interior(i, j + 1), cn);
                }
            Eigen::SparseMatrix<double> J(n_int, n_int);
            J.setFromTriplets(trip.begin(), trip.end());
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
            if (lu.info() != Eigen::Success)
                throw SolverError("solve_quasilinear: Jacobian factorization failed");
            Eigen::VectorXd delta = lu.solve(-resid);

            // damping by halving on residual increase
            double lambda = 1.0;
            Slice<double> trial = u;
            Eigen::VectorXd rtrial(n_int);
            for (int h = 0;; ++h) {
                trial = u;
                for (int j = 1; j <= g.ny; ++j)
                    for (int i = 1; i <= g.nx; ++i)
                        trial(i, j) += lambda * delta(ix.interior(i, j));
                residual(trial, prev, t, rtrial);
                const double rt = rtrial.cwiseAbs().maxCoeff();
                if (rt < rnorm || h >= nopt.max_halvings) {
                    u = trial;
                    resid = rtrial;
                    rnorm = rt;
                    break;
                }
                lambda *= 0.5;
            }
        }
        sol.values.slices[k] = u;
    }
    return sol;
}

/// Frozen coefficients of the linearization along a base solution.
struct LinearizedProblem {
    VectorField<double> A_FG;
    SpaceTimeField<double> q_FG;
};

inline LinearizedProblem freeze_linearization(const QuasiLinearModel& m,
                                              const Solution<double>& base) {
    const SpaceTimeGrid& g = base.grid();
    LinearizedProblem lp{VectorField<double>(g), SpaceTimeField<double>(g)};
    for (int k = 0; k <= g.nt; ++k)
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) {
                const double gx = ddx(base.values, i, j, k);
                const double gy = ddy(base.values, i, j, k);
                const double u = base.values(i, j, k);
                const Vec2 av = m.dF_dv(g.x(i), g.y(j), g.t(k), u, gx, gy);
                lp.A_FG.x(i, j, k) = av[0];
                lp.A_FG.y(i, j, k) = av[1];
                lp.q_FG(i, j, k) = m.dF_du(g.x(i), g.y(j), g.t(k), u, gx, gy);
            }
    return lp;
}

/// Linearized problem dw/dt - Lap w + A_FG.grad w + q_FG w = 0 with datum H
/// on the parabolic boundary.  The convection term stays centered so the
/// solve is the exact derivative of the discrete quasi-linear map.
inline Solution<double> solve_linearized(const QuasiLinearModel& m,
                                         const Solution<double>& base,
                                         const SpaceTimeField<double>& H,
                                         const SchemeOptions& sopt = {}) {
    const SpaceTimeGrid& g = base.grid();
    if (g.nx != H.grid.nx || g.ny != H.grid.ny || g.nt != H.grid.nt)
        throw ShapeError("solve_linearized: datum grid mismatch");
    // interior gradient convention of the Newton residual, not the one-sided
    // boundary closure, so freeze with the same centered stencil
    LinearizedProblem lp = freeze_linearization(m, base);
    OperatorSpec spec;
    spec.conv = &lp.A_FG;
    spec.q = &lp.q_FG;
    spec.peclet_threshold = std::numeric_limits<double>::infinity();
    SchemeOptions o = sopt;
    o.theta = 1.0;
    detail::check_compatibility(g, H, H.slices[0], o.compat_tol, "solve_linearized");
    return detail::run_theta_scheme<double>(g, spec, H, H.slices[0], nullptr, o, false);
}

struct FrechetSample {
    double eps;
    double remainder;  // || u_{F,G+eps H} - u_{F,G} - eps w || in L2(Q)
};

struct FrechetReport {
    std::vector<FrechetSample> samples;
    double slope = 0;
    bool exact_linear = false;
    bool pass = false;
};

/// Convergence-order check of the DN linearization: the remainder of the
/// first-order expansion must shrink like eps^2 (slope in [1.8, 2.2]), with an
/// exact branch for linear F where the remainder sits at solver tolerance.
inline FrechetReport frechet_check(const QuasiLinearModel& m,
                                   const SpaceTimeField<double>& G,
                                   const SpaceTimeField<double>& H,
                                   const std::vector<double>& epsilons,
                                   const NewtonOptions& nopt = {}) {
    if (epsilons.size() < 3)
        throw AuditError("frechet_check: need at least 3 decreasing epsilon values");
    const SpaceTimeGrid& g = G.grid;
    const Solution<double> base = solve_quasilinear(m, G, nopt);
    const Solution<double> w = solve_linearized(m, base, H);

    FrechetReport rep;
    for (double eps : epsilons) {
        SpaceTimeField<double> Ge(g);
        for (int k = 0; k <= g.nt; ++k)
            Ge.slices[k] = G.slices[k] + eps * H.slices[k];
        const Solution<double> ue = solve_quasilinear(m, Ge, nopt);
        SpaceTimeField<double> diff(g);
        for (int k = 0; k <= g.nt; ++k)
            diff.slices[k] =
                ue.values.slices[k] - base.values.slices[k] - eps * w.values.slices[k];
        rep.samples.push_back({eps, l2_norm_q(diff)});
    }

    double rmax = 0;
    for (const auto& s : rep.samples) rmax = std::max(rmax, s.remainder);
    if (rmax <= 1e-9) {
        rep.exact_linear = true;
        rep.pass = true;
        return rep;
    }
    std::vector<double> lx, ly;
    for (const auto& s : rep.samples) {
        lx.push_back(std::log(s.eps));
        ly.push_back(std::log(std::max(s.remainder, 1e-300)));
    }
    rep.slope = detail::fit_slope(lx, ly);
    rep.pass = rep.slope >= 1.8 && rep.slope <= 2.2;
    return rep;
}

}  // namespace dnr
