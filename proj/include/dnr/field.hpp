#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include "dnr/errors.hpp"
#include "dnr/grid.hpp"

namespace dnr {

using Complex = std::complex<double>;

template <typename Scalar>
using Slice = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Scalar field sampled on every node and time level of a SpaceTimeGrid.
/// Each time slice is a dense (nx+2) x (ny+2) Eigen array indexed (i, j).
template <typename Scalar>
struct SpaceTimeField {
    SpaceTimeGrid grid;
    std::vector<Slice<Scalar>> slices;

    SpaceTimeField() = default;
    explicit SpaceTimeField(const SpaceTimeGrid& g)
        : grid(g), slices(g.num_levels(), Slice<Scalar>::Zero(g.npx(), g.npy())) {}

    Scalar& operator()(int i, int j, int k) { return slices[k](i, j); }
    const Scalar& operator()(int i, int j, int k) const { return slices[k](i, j); }

    Slice<Scalar>& slice(int k) { return slices[k]; }
    const Slice<Scalar>& slice(int k) const { return slices[k]; }

    void set_zero() {
        for (auto& s : slices) s.setZero();
    }

    double sup_norm() const {
        double m = 0;
        for (const auto& s : slices) m = std::max(m, s.abs().maxCoeff());
        return m;
    }

    bool same_shape(const SpaceTimeField& o) const {
        return grid.nx == o.grid.nx && grid.ny == o.grid.ny && grid.nt == o.grid.nt;
    }
};

template <typename Scalar>
struct VectorField {
    SpaceTimeField<Scalar> x, y;

    VectorField() = default;
    explicit VectorField(const SpaceTimeGrid& g) : x(g), y(g) {}

    const SpaceTimeGrid& grid() const { return x.grid; }
    void set_zero() {
        x.set_zero();
        y.set_zero();
    }
    double sup_norm() const { return std::max(x.sup_norm(), y.sup_norm()); }
};

using FieldFn = std::function<double(double x, double y, double t)>;
using VectorFn = std::function<Vec2(double x, double y, double t)>;

inline SpaceTimeField<double> sample(const SpaceTimeGrid& g, const FieldFn& f) {
    SpaceTimeField<double> out(g);
    for (int k = 0; k <= g.nt; ++k)
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i)
                out(i, j, k) = f(g.x(i), g.y(j), g.t(k));
    return out;
}

inline VectorField<double> sample(const SpaceTimeGrid& g, const VectorFn& f) {
    VectorField<double> out(g);
    for (int k = 0; k <= g.nt; ++k)
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) {
                const Vec2 v = f(g.x(i), g.y(j), g.t(k));
                out.x(i, j, k) = v[0];
                out.y(i, j, k) = v[1];
            }
    return out;
}

/// Centered differences in the interior, second-order one-sided at the
/// boundary ring.
template <typename Scalar>
Scalar ddx(const SpaceTimeField<Scalar>& f, int i, int j, int k) {
    const auto& s = f.slices[k];
    const double h = f.grid.hx;
    const int n = f.grid.npx();
    if (i == 0) return (-3.0 * s(0, j) + 4.0 * s(1, j) - s(2, j)) / (2 * h);
    if (i == n - 1) return (3.0 * s(n - 1, j) - 4.0 * s(n - 2, j) + s(n - 3, j)) / (2 * h);
    return (s(i + 1, j) - s(i - 1, j)) / (2 * h);
}

template <typename Scalar>
Scalar ddy(const SpaceTimeField<Scalar>& f, int i, int j, int k) {
    const auto& s = f.slices[k];
    const double h = f.grid.hy;
    const int n = f.grid.npy();
    if (j == 0) return (-3.0 * s(i, 0) + 4.0 * s(i, 1) - s(i, 2)) / (2 * h);
    if (j == n - 1) return (3.0 * s(i, n - 1) - 4.0 * s(i, n - 2) + s(i, n - 3)) / (2 * h);
    return (s(i, j + 1) - s(i, j - 1)) / (2 * h);
}

template <typename Scalar>
Scalar ddt(const SpaceTimeField<Scalar>& f, int i, int j, int k) {
    const double d = f.grid.dt;
    const int m = f.grid.num_levels();
    if (k == 0) return (-3.0 * f(i, j, 0) + 4.0 * f(i, j, 1) - f(i, j, 2)) / (2 * d);
    if (k == m - 1)
        return (3.0 * f(i, j, m - 1) - 4.0 * f(i, j, m - 2) + f(i, j, m - 3)) / (2 * d);
    return (f(i, j, k + 1) - f(i, j, k - 1)) / (2 * d);
}

/// Trapezoid weight of a spatial node (boundary nodes carry 1/2 per axis).
inline double trapezoid_weight(const SpaceTimeGrid& g, int i, int j) {
    double w = g.hx * g.hy;
    if (i == 0 || i == g.nx + 1) w *= 0.5;
    if (j == 0 || j == g.ny + 1) w *= 0.5;
    return w;
}

inline double time_weight(const SpaceTimeGrid& g, int k) {
    return (k == 0 || k == g.nt) ? 0.5 * g.dt : g.dt;
}

/// Tensor-trapezoid space-time quadrature of a node-wise integrand.
template <typename Scalar, typename F>
Scalar integrate_q(const SpaceTimeGrid& g, F&& integrand) {
    Scalar acc{};
    for (int k = 0; k <= g.nt; ++k) {
        const double wt = time_weight(g, k);
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i)
                acc += static_cast<Scalar>(wt * trapezoid_weight(g, i, j)) *
                       integrand(i, j, k);
    }
    return acc;
}

template <typename Scalar>
double l2_norm_q(const SpaceTimeField<Scalar>& f) {
    const double v = integrate_q<double>(
        f.grid, [&](int i, int j, int k) { return std::norm(Complex(f(i, j, k))); });
    return std::sqrt(v);
}

inline double l2_norm_q(const SpaceTimeField<double>& f) {
    const double v =
        integrate_q<double>(f.grid, [&](int i, int j, int k) {
            const double z = f(i, j, k);
            return z * z;
        });
    return std::sqrt(v);
}

/// Field on an axis-aligned box that may extend beyond the base cylinder;
/// holds its own origin and spacings.  Used for zero-extended and mollified
/// coefficients.
template <typename Scalar>
struct BoxField {
    double x0 = 0, y0 = 0, t0 = 0;
    double hx = 0, hy = 0, dt = 0;
    int npx = 0, npy = 0, npt = 0;
    std::vector<Slice<Scalar>> slices;

    double x(int i) const { return x0 + i * hx; }
    double y(int j) const { return y0 + j * hy; }
    double t(int k) const { return t0 + k * dt; }
    double x_max() const { return x(npx - 1); }
    double y_max() const { return y(npy - 1); }
    double t_max() const { return t(npt - 1); }

    Scalar& at(int i, int j, int k) { return slices[k](i, j); }
    const Scalar& at(int i, int j, int k) const { return slices[k](i, j); }

    /// Bilinear interpolation in space on the time slice nearest to t;
    /// zero outside the box.
    Scalar sample_xy(double xq, double yq, int k) const {
        if (k < 0 || k >= npt) return Scalar(0);
        const double sx = (xq - x0) / hx;
        const double sy = (yq - y0) / hy;
        if (sx < 0 || sy < 0 || sx > npx - 1 || sy > npy - 1) return Scalar(0);
        int i = std::min(static_cast<int>(sx), npx - 2);
        int j = std::min(static_cast<int>(sy), npy - 2);
        if (i < 0) i = 0;
        if (j < 0) j = 0;
        const double fx = sx - i, fy = sy - j;
        const auto& s = slices[k];
        return static_cast<Scalar>((1 - fx) * (1 - fy)) * s(i, j) +
               static_cast<Scalar>(fx * (1 - fy)) * s(i + 1, j) +
               static_cast<Scalar>((1 - fx) * fy) * s(i, j + 1) +
               static_cast<Scalar>(fx * fy) * s(i + 1, j + 1);
    }
};

/// Zero-extend a grid field into a box padded by (pad_x, pad_y, pad_t).
template <typename Scalar>
BoxField<Scalar> zero_extend(const SpaceTimeField<Scalar>& f, double pad_x,
                             double pad_y, double pad_t) {
    const SpaceTimeGrid& g = f.grid;
    BoxField<Scalar> b;
    b.hx = g.hx;
    b.hy = g.hy;
    b.dt = g.dt;
    const int mx = static_cast<int>(std::ceil(pad_x / g.hx));
    const int my = static_cast<int>(std::ceil(pad_y / g.hy));
    const int mt = static_cast<int>(std::ceil(pad_t / g.dt));
    b.x0 = -mx * g.hx;
    b.y0 = -my * g.hy;
    b.t0 = -mt * g.dt;
    b.npx = g.npx() + 2 * mx;
    b.npy = g.npy() + 2 * my;
    b.npt = g.num_levels() + 2 * mt;
    b.slices.assign(b.npt, Slice<Scalar>::Zero(b.npx, b.npy));
    for (int k = 0; k <= g.nt; ++k)
        b.slices[k + mt].block(mx, my, g.npx(), g.npy()) = f.slices[k];
    return b;
}

}  // namespace dnr
