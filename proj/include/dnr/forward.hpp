#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <memory>
#include <optional>
#include <type_traits>
#include <vector>

#include "dnr/errors.hpp"
#include "dnr/field.hpp"
#include "dnr/fields.hpp"
#include "dnr/grid.hpp"

namespace dnr {

struct SchemeOptions {
    double theta = 1.0;             // 1 = implicit Euler, 0.5 = Crank-Nicolson
    double peclet_threshold = 2.0;  // switch A.grad to first-order upwind above this
    double solver_tol = 1e-10;      // per-step algebraic residual bound
    double compat_tol = 1e-10;      // boundary/initial compatibility
};

/// Spatial operator in the form
///   L u = -Lap u + conv . grad u + div(flux u) - flux . grad u + q u,
/// i.e. the zero-order divergence term (div flux) u handled in conservative
/// flux form.  The forward problem uses conv = A, flux = B; the adjoint uses
/// conv = -A, flux = B - A.
struct OperatorSpec {
    const VectorField<double>* conv = nullptr;
    const VectorField<double>* flux = nullptr;
    const SpaceTimeField<double>* q = nullptr;
    double peclet_threshold = 2.0;
    bool include_laplacian = true;
};

namespace detail {

struct NodeIndexer {
    int nx, ny;
    int interior(int i, int j) const { return (j - 1) * nx + (i - 1); }
    int num_interior() const { return nx * ny; }
};

/// Enumeration of the boundary ring nodes of a slice, fixed order.
inline std::vector<std::pair<int, int>> ring_nodes(const SpaceTimeGrid& g) {
    std::vector<std::pair<int, int>> r;
    for (int j = 0; j < g.npy(); ++j)
        for (int i = 0; i < g.npx(); ++i)
            if (g.on_spatial_boundary(i, j)) r.emplace_back(i, j);
    return r;
}

inline Eigen::ArrayXXi ring_index_map(const SpaceTimeGrid& g) {
    Eigen::ArrayXXi m = Eigen::ArrayXXi::Constant(g.npx(), g.npy(), -1);
    const auto ring = ring_nodes(g);
    for (int r = 0; r < static_cast<int>(ring.size()); ++r)
        m(ring[r].first, ring[r].second) = r;
    return m;
}

}  // namespace detail

/// Sparse form of a spatial operator at one time level: interior-to-interior
/// block plus the coupling of boundary-ring values into interior rows.
struct DiscreteOperator {
    Eigen::SparseMatrix<double> interior;  // num_interior x num_interior
    Eigen::SparseMatrix<double> ring;      // num_interior x num_ring
};

/// Assemble the five-point stencil of `spec` at time level k.
inline DiscreteOperator build_operator(const SpaceTimeGrid& g, const OperatorSpec& spec,
                                       int k) {
    const detail::NodeIndexer ix{g.nx, g.ny};
    const Eigen::ArrayXXi rix = detail::ring_index_map(g);
    const int n_int = ix.num_interior();
    const int n_ring = 2 * (g.npx() + g.npy()) - 4;

    std::vector<Eigen::Triplet<double>> ti, tr;
    ti.reserve(5 * n_int);
    tr.reserve(2 * (g.npx() + g.npy()));

    const double ihx2 = 1.0 / (g.hx * g.hx), ihy2 = 1.0 / (g.hy * g.hy);
    const double ihx = 1.0 / g.hx, ihy = 1.0 / g.hy;

    auto add = [&](int row, int i, int j, double v) {
        if (v == 0.0) return;
        if (g.interior(i, j))
            ti.emplace_back(row, ix.interior(i, j), v);
        else
            tr.emplace_back(row, rix(i, j), v);
    };

    for (int j = 1; j <= g.ny; ++j)
        for (int i = 1; i <= g.nx; ++i) {
            const int row = ix.interior(i, j);
            double cc = 0, cw = 0, ce = 0, cs = 0, cn = 0;
            if (spec.include_laplacian) {
                cc += 2 * ihx2 + 2 * ihy2;
                cw -= ihx2;
                ce -= ihx2;
                cs -= ihy2;
                cn -= ihy2;
            }
            if (spec.conv) {
                const double ax = spec.conv->x(i, j, k);
                const double ay = spec.conv->y(i, j, k);
                if (std::abs(ax) * g.hx * 0.5 > spec.peclet_threshold) {
                    if (ax > 0) {
                        cc += ax * ihx;
                        cw -= ax * ihx;
                    } else {
                        ce += ax * ihx;
                        cc -= ax * ihx;
                    }
                } else {
                    ce += 0.5 * ax * ihx;
                    cw -= 0.5 * ax * ihx;
                }
                if (std::abs(ay) * g.hy * 0.5 > spec.peclet_threshold) {
                    if (ay > 0) {
                        cc += ay * ihy;
                        cs -= ay * ihy;
                    } else {
                        cn += ay * ihy;
                        cc -= ay * ihy;
                    }
                } else {
                    cn += 0.5 * ay * ihy;
                    cs -= 0.5 * ay * ihy;
                }
            }
            if (spec.flux) {
                // div(flux u) with centered face averages, minus flux . grad u
                const double bw = spec.flux->x(i - 1, j, k), bc = spec.flux->x(i, j, k),
                             be = spec.flux->x(i + 1, j, k);
                ce += 0.25 * (be + bc) * ihx;
                cc += 0.25 * (be + bc) * ihx - 0.25 * (bc + bw) * ihx;
                cw -= 0.25 * (bc + bw) * ihx;
                ce -= 0.5 * bc * ihx;
                cw += 0.5 * bc * ihx;
                const double bs = spec.flux->y(i, j - 1, k), byc = spec.flux->y(i, j, k),
                             bn = spec.flux->y(i, j + 1, k);
                cn += 0.25 * (bn + byc) * ihy;
                cc += 0.25 * (bn + byc) * ihy - 0.25 * (byc + bs) * ihy;
                cs -= 0.25 * (byc + bs) * ihy;
                cn -= 0.5 * byc * ihy;
                cs += 0.5 * byc * ihy;
            }
            if (spec.q) cc += (*spec.q)(i, j, k);

            add(row, i, j, cc);
            add(row, i - 1, j, cw);
            add(row, i + 1, j, ce);
            add(row, i, j - 1, cs);
            add(row, i, j + 1, cn);
        }

    DiscreteOperator op;
    op.interior.resize(n_int, n_int);
    op.interior.setFromTriplets(ti.begin(), ti.end());
    op.ring.resize(n_int, n_ring);
    op.ring.setFromTriplets(tr.begin(), tr.end());
    return op;
}

namespace detail {

template <typename Scalar>
constexpr int rhs_cols() {
    return std::is_same_v<Scalar, Complex> ? 2 : 1;
}

template <typename Scalar>
Eigen::Matrix<double, Eigen::Dynamic, rhs_cols<Scalar>()> interior_vec(
    const SpaceTimeGrid& g, const Slice<Scalar>& s) {
    Eigen::Matrix<double, Eigen::Dynamic, rhs_cols<Scalar>()> v(g.nx * g.ny,
                                                                rhs_cols<Scalar>());
    const NodeIndexer ix{g.nx, g.ny};
    for (int j = 1; j <= g.ny; ++j)
        for (int i = 1; i <= g.nx; ++i) {
            if constexpr (std::is_same_v<Scalar, Complex>) {
                v(ix.interior(i, j), 0) = s(i, j).real();
                v(ix.interior(i, j), 1) = s(i, j).imag();
            } else {
                v(ix.interior(i, j), 0) = s(i, j);
            }
        }
    return v;
}

template <typename Scalar>
Eigen::Matrix<double, Eigen::Dynamic, rhs_cols<Scalar>()> ring_vec(
    const SpaceTimeGrid& g, const Slice<Scalar>& s) {
    const auto ring = ring_nodes(g);
    Eigen::Matrix<double, Eigen::Dynamic, rhs_cols<Scalar>()> v(
        static_cast<int>(ring.size()), rhs_cols<Scalar>());
    for (int r = 0; r < static_cast<int>(ring.size()); ++r) {
        const auto [i, j] = ring[r];
        if constexpr (std::is_same_v<Scalar, Complex>) {
            v(r, 0) = s(i, j).real();
            v(r, 1) = s(i, j).imag();
        } else {
            v(r, 0) = s(i, j);
        }
    }
    return v;
}

template <typename Scalar>
void scatter_interior(const SpaceTimeGrid& g,
                      const Eigen::Matrix<double, Eigen::Dynamic, rhs_cols<Scalar>()>& v,
                      Slice<Scalar>& s) {
    const NodeIndexer ix{g.nx, g.ny};
    for (int j = 1; j <= g.ny; ++j)
        for (int i = 1; i <= g.nx; ++i) {
            if constexpr (std::is_same_v<Scalar, Complex>) {
                s(i, j) = Complex(v(ix.interior(i, j), 0), v(ix.interior(i, j), 1));
            } else {
                s(i, j) = v(ix.interior(i, j), 0);
            }
        }
}

}  // namespace detail

template <typename Scalar>
struct Solution {
    SpaceTimeField<Scalar> values;

    explicit Solution(const SpaceTimeGrid& g) : values(g) {}
    Solution() = default;

    const SpaceTimeGrid& grid() const { return values.grid; }

    /// Second-order one-sided conormal derivative at a boundary face.
    Scalar conormal_flux(const BoundaryFace& f, int k) const {
        const SpaceTimeGrid& g = values.grid;
        const auto& s = values.slices[k];
        switch (f.edge) {
            case Edge::West:
                return -(-3.0 * s(0, f.j) + 4.0 * s(1, f.j) - s(2, f.j)) / (2 * g.hx);
            case Edge::East: {
                const int n = g.npx();
                return (3.0 * s(n - 1, f.j) - 4.0 * s(n - 2, f.j) + s(n - 3, f.j)) /
                       (2 * g.hx);
            }
            case Edge::South:
                return -(-3.0 * s(f.i, 0) + 4.0 * s(f.i, 1) - s(f.i, 2)) / (2 * g.hy);
            default: {
                const int n = g.npy();
                return (3.0 * s(f.i, n - 1) - 4.0 * s(f.i, n - 2) + s(f.i, n - 3)) /
                       (2 * g.hy);
            }
        }
    }
};

namespace detail {

template <typename Scalar>
Solution<Scalar> run_theta_scheme(const SpaceTimeGrid& g, const OperatorSpec& spec,
                                  const SpaceTimeField<Scalar>& dirichlet,
                                  const Slice<Scalar>& initial,
                                  const SpaceTimeField<Scalar>* source,
                                  const SchemeOptions& opts, bool time_invariant) {
    const double th = opts.theta;
    const int n_int = g.nx * g.ny;
    Solution<Scalar> sol(g);

    // initial cap, then overwrite ring values with the Dirichlet trace
    sol.values.slices[0] = initial;
    const auto ring = ring_nodes(g);
    for (int k = 0; k <= g.nt; ++k)
        for (const auto& [i, j] : ring) sol.values(i, j, k) = dirichlet(i, j, k);
    // t = 0 keeps the initial cap on the ring too (compatibility was checked)
    for (const auto& [i, j] : ring) sol.values(i, j, 0) = initial(i, j);

    Eigen::SparseMatrix<double> ident(n_int, n_int);
    ident.setIdentity();

    std::optional<DiscreteOperator> shared;
    if (time_invariant) shared = build_operator(g, spec, 1);

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    Eigen::SparseMatrix<double> m;  // current implicit matrix
    bool factored = false;
    DiscreteOperator op_prev;  // operator at level k-1 for the explicit part
    if (th < 1.0) op_prev = time_invariant ? *shared : build_operator(g, spec, 0);

    auto prev_int = interior_vec<Scalar>(g, sol.values.slices[0]);
    auto prev_ring = ring_vec<Scalar>(g, sol.values.slices[0]);

    for (int k = 1; k <= g.nt; ++k) {
        const DiscreteOperator op_k =
            time_invariant ? *shared : build_operator(g, spec, k);
        if (!factored || !time_invariant) {
            m = ident / g.dt + th * op_k.interior;
            m.makeCompressed();
            lu.compute(m);
            if (lu.info() != Eigen::Success)
                throw SolverError("theta scheme: factorization failed at step " +
                                  std::to_string(k));
            factored = true;
        }

        auto g_ring = ring_vec<Scalar>(g, sol.values.slices[k]);
        Eigen::Matrix<double, Eigen::Dynamic, rhs_cols<Scalar>()> rhs =
            prev_int / g.dt - th * (op_k.ring * g_ring);
        if (th < 1.0)
            rhs -= (1.0 - th) * (op_prev.interior * prev_int + op_prev.ring * prev_ring);
        if (source) {
            const auto fk = interior_vec<Scalar>(g, source->slices[k]);
            if (th < 1.0) {
                const auto fk1 = interior_vec<Scalar>(g, source->slices[k - 1]);
                rhs += th * fk + (1.0 - th) * fk1;
            } else {
                rhs += fk;
            }
        }

        Eigen::Matrix<double, Eigen::Dynamic, rhs_cols<Scalar>()> x = lu.solve(rhs);
        if (lu.info() != Eigen::Success)
            throw SolverError("theta scheme: solve failed at step " + std::to_string(k));
        const double res = (m * x - rhs).cwiseAbs().maxCoeff();
        const double scale = rhs.cwiseAbs().maxCoeff() + 1.0;
        if (!(res <= opts.solver_tol * scale))
            throw SolverError("theta scheme: step residual " + std::to_string(res) +
                              " exceeds tolerance at step " + std::to_string(k));

        scatter_interior<Scalar>(g, x, sol.values.slices[k]);
        prev_int = x;
        prev_ring = g_ring;
        if (th < 1.0) op_prev = op_k;
    }
    return sol;
}

template <typename Scalar>
void check_compatibility(const SpaceTimeGrid& g, const SpaceTimeField<Scalar>& dirichlet,
                         const Slice<Scalar>& initial, double tol, const char* who) {
    double dev = 0;
    for (const auto& [i, j] : ring_nodes(g))
        dev = std::max(dev, std::abs(dirichlet(i, j, 0) - initial(i, j)));
    if (dev > tol)
        throw DataError(std::string(who) +
                        ": boundary datum at t=0 incompatible with the initial cap "
                        "(deviation " +
                        std::to_string(dev) + ")");
}

}  // namespace detail

/// Solve  du/dt - Lap u + A.grad u + (div B) u + q u = f  on Q with Dirichlet
/// trace `g` and initial cap `u0`.
template <typename Scalar = double>
Solution<Scalar> solve_forward(const CoefficientSet& c, const SpaceTimeField<Scalar>& g,
                               const Slice<Scalar>& u0,
                               const SpaceTimeField<Scalar>* f = nullptr,
                               const SchemeOptions& opts = {}) {
    const SpaceTimeGrid& gr = c.grid();
    detail::check_compatibility(gr, g, u0, opts.compat_tol, "solve_forward");
    OperatorSpec spec;
    spec.conv = &c.A;
    spec.flux = &c.B;
    spec.q = &c.q;
    spec.peclet_threshold = opts.peclet_threshold;
    return detail::run_theta_scheme(gr, spec, g, u0, f, opts, c.time_invariant());
}

template <typename Scalar = double>
Solution<Scalar> solve_forward(const CoefficientSet& c, const SpaceTimeField<Scalar>& g,
                               const SchemeOptions& opts = {}) {
    Slice<Scalar> zero = Slice<Scalar>::Zero(c.grid().npx(), c.grid().npy());
    return solve_forward<Scalar>(c, g, zero, nullptr, opts);
}

namespace detail {

template <typename Scalar>
SpaceTimeField<Scalar> reverse_time(const SpaceTimeField<Scalar>& f) {
    SpaceTimeField<Scalar> out(f.grid);
    const int m = f.grid.num_levels();
    for (int k = 0; k < m; ++k) out.slices[k] = f.slices[m - 1 - k];
    return out;
}

inline VectorField<double> reverse_time(const VectorField<double>& f) {
    VectorField<double> out(f.grid());
    out.x = reverse_time(f.x);
    out.y = reverse_time(f.y);
    return out;
}

}  // namespace detail

/// Solve the adjoint problem
///   -du/dt - Lap u - A.grad u + (q + div(B - A)) u = f,  u(.,T) = 0,
/// stepped backward in time (realized as a forward sweep in reversed time).
template <typename Scalar = double>
Solution<Scalar> solve_adjoint(const CoefficientSet& c, const SpaceTimeField<Scalar>& g,
                               const SpaceTimeField<Scalar>* f = nullptr,
                               const SchemeOptions& opts = {}) {
    const SpaceTimeGrid& gr = c.grid();
    // reversed-time coefficient fields for the adjoint spatial operator
    VectorField<double> conv_rev(gr), flux_rev(gr);
    for (int k = 0; k <= gr.nt; ++k) {
        const int kr = gr.nt - k;
        conv_rev.x.slices[k] = -c.A.x.slices[kr];
        conv_rev.y.slices[k] = -c.A.y.slices[kr];
        flux_rev.x.slices[k] = c.B.x.slices[kr] - c.A.x.slices[kr];
        flux_rev.y.slices[k] = c.B.y.slices[kr] - c.A.y.slices[kr];
    }
    SpaceTimeField<double> q_rev = detail::reverse_time(c.q);
    SpaceTimeField<Scalar> g_rev = detail::reverse_time(g);
    SpaceTimeField<Scalar> f_rev;
    if (f) f_rev = detail::reverse_time(*f);

    Slice<Scalar> zero = Slice<Scalar>::Zero(gr.npx(), gr.npy());
    detail::check_compatibility(gr, g_rev, zero, opts.compat_tol, "solve_adjoint");

    OperatorSpec spec;
    spec.conv = &conv_rev;
    spec.flux = &flux_rev;
    spec.q = &q_rev;
    spec.peclet_threshold = opts.peclet_threshold;

    bool inv = c.time_invariant();
    Solution<Scalar> rev = detail::run_theta_scheme(gr, spec, g_rev, zero,
                                                    f ? &f_rev : nullptr, opts, inv);
    Solution<Scalar> out(gr);
    out.values = detail::reverse_time(rev.values);
    return out;
}

/// Conjugated coefficient set for a geometric-optics solve at (rho, omega):
/// substituting u = exp(rho^2 t + rho x.omega) v into the forward problem for
/// `c` gives the forward problem for this set; the rho^2 terms cancel.
inline CoefficientSet conjugate_forward(const CoefficientSet& c, double rho,
                                        const Vec2& omega) {
    const SpaceTimeGrid& g = c.grid();
    CoefficientSet out(g);
    for (int k = 0; k <= g.nt; ++k) {
        out.A.x.slices[k] = c.A.x.slices[k] - 2.0 * rho * omega[0];
        out.A.y.slices[k] = c.A.y.slices[k] - 2.0 * rho * omega[1];
        out.B.x.slices[k] = c.B.x.slices[k];
        out.B.y.slices[k] = c.B.y.slices[k];
        out.q.slices[k] = c.q.slices[k] + rho * (omega[0] * c.A.x.slices[k] +
                                                 omega[1] * c.A.y.slices[k]);
    }
    return out;
}

/// Conjugated set for the adjoint geometric-optics solve: u = exp(-rho^2 t -
/// rho x.omega) v turns the adjoint problem for `c` into the adjoint problem
/// for this set.
inline CoefficientSet conjugate_adjoint(const CoefficientSet& c, double rho,
                                        const Vec2& omega) {
    const SpaceTimeGrid& g = c.grid();
    CoefficientSet out(g);
    for (int k = 0; k <= g.nt; ++k) {
        out.A.x.slices[k] = c.A.x.slices[k] - 2.0 * rho * omega[0];
        out.A.y.slices[k] = c.A.y.slices[k] - 2.0 * rho * omega[1];
        out.B.x.slices[k] = c.B.x.slices[k] - 2.0 * rho * omega[0];
        out.B.y.slices[k] = c.B.y.slices[k] - 2.0 * rho * omega[1];
        out.q.slices[k] = c.q.slices[k] + rho * (omega[0] * c.A.x.slices[k] +
                                                 omega[1] * c.A.y.slices[k]);
    }
    return out;
}

}  // namespace dnr
