#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dnr/errors.hpp"
#include "dnr/field.hpp"
#include "dnr/fields.hpp"
#include "dnr/grid.hpp"

namespace dnr {

enum class CarlemanSide { Plus, Minus };

/// Parameters of the perturbed weight
///   phi_{+-,s}(x,t) = +-(rho^2 t + rho omega.x) - s ((x + x0).omega)^2 / 2
/// with the shift chosen so x0.omega = 2 + sup_{x in Omega} |x|.
struct WeightParams {
    double s = 2.0;
    double rho = 10.0;
    Vec2 omega{1, 0};
    Vec2 x0{0, 0};

    static WeightParams make(double s, double rho, const Vec2& omega,
                             const SpaceTimeGrid& g) {
        if (!(rho > s && s > 1.0))
            throw ParameterError("carleman weight: need rho > s > 1");
        if (std::abs(omega.norm() - 1.0) > 1e-12)
            throw ParameterError("carleman weight: omega must be a unit vector");
        WeightParams p;
        p.s = s;
        p.rho = rho;
        p.omega = omega;
        p.x0 = (2.0 + g.sup_radius()) * omega;
        return p;
    }

    double shifted(double x, double y) const {
        return (x + x0[0]) * omega[0] + (y + x0[1]) * omega[1];
    }
};

inline double weight_phi(const WeightParams& p, CarlemanSide side, double x, double y,
                         double t) {
    const double lin = p.rho * p.rho * t + p.rho * (x * p.omega[0] + y * p.omega[1]);
    const double sgn = side == CarlemanSide::Plus ? 1.0 : -1.0;
    const double sh = p.shifted(x, y);
    return sgn * lin - 0.5 * p.s * sh * sh;
}

/// Analytic test preset: v together with its symbolic derivatives.
struct CarlemanPreset {
    std::string name;
    FieldFn v, vt, vx, vy, vxx, vyy;

    double lap(double x, double y, double t) const { return vxx(x, y, t) + vyy(x, y, t); }
};

/// (t/T)^pt * sin(kx pi x / Lx) * sin(ky pi y / Ly); vanishes on the lateral
/// boundary and on the bottom cap for pt >= 1.
inline CarlemanPreset preset_poly_trig(const SpaceTimeGrid& g, int pt, int kx, int ky,
                                       std::string name) {
    const double ax = kx * M_PI / g.Lx, ay = ky * M_PI / g.Ly, T = g.T;
    auto tp = [pt, T](double t) { return std::pow(t / T, pt); };
    auto tdp = [pt, T](double t) {
        return pt == 0 ? 0.0 : pt * std::pow(t / T, pt - 1) / T;
    };
    CarlemanPreset p;
    p.name = std::move(name);
    p.v = [=](double x, double y, double t) {
        return tp(t) * std::sin(ax * x) * std::sin(ay * y);
    };
    p.vt = [=](double x, double y, double t) {
        return tdp(t) * std::sin(ax * x) * std::sin(ay * y);
    };
    p.vx = [=](double x, double y, double t) {
        return tp(t) * ax * std::cos(ax * x) * std::sin(ay * y);
    };
    p.vy = [=](double x, double y, double t) {
        return tp(t) * std::sin(ax * x) * ay * std::cos(ay * y);
    };
    p.vxx = [=](double x, double y, double t) {
        return -ax * ax * p.v(x, y, t);
    };
    p.vyy = [=](double x, double y, double t) {
        return -ay * ay * p.v(x, y, t);
    };
    return p;
}

/// v(x, T - t): turns a bottom-cap preset into a top-cap one and conversely.
inline CarlemanPreset time_reversed(const CarlemanPreset& in, double T) {
    CarlemanPreset p;
    p.name = in.name + "-reversed";
    p.v = [=](double x, double y, double t) { return in.v(x, y, T - t); };
    p.vt = [=](double x, double y, double t) { return -in.vt(x, y, T - t); };
    p.vx = [=](double x, double y, double t) { return in.vx(x, y, T - t); };
    p.vy = [=](double x, double y, double t) { return in.vy(x, y, T - t); };
    p.vxx = [=](double x, double y, double t) { return in.vxx(x, y, T - t); };
    p.vyy = [=](double x, double y, double t) { return in.vyy(x, y, T - t); };
    return p;
}

namespace detail {

inline void check_preset_side(const SpaceTimeGrid& g, const CarlemanPreset& v,
                              CarlemanSide side) {
    double lateral = 0, cap = 0;
    for (int k = 0; k <= g.nt; ++k)
        for (const auto& [i, j] : ring_nodes(g))
            lateral = std::max(lateral, std::abs(v.v(g.x(i), g.y(j), g.t(k))));
    const double tcap = side == CarlemanSide::Plus ? 0.0 : g.T;
    for (int j = 0; j < g.npy(); ++j)
        for (int i = 0; i < g.npx(); ++i)
            cap = std::max(cap, std::abs(v.v(g.x(i), g.y(j), tcap)));
    if (lateral > 1e-12)
        throw PresetError("carleman preset '" + v.name +
                          "' does not vanish on the lateral boundary");
    if (cap > 1e-12)
        throw PresetError("carleman preset '" + v.name +
                          "' does not vanish on the required cap");
}

}  // namespace detail

/// The three parts of the conjugated operator applied to an analytic preset:
///   P1 v = -Lap v + [side dphi/dt - |grad phi|^2 + Lap phi] v
///   P2 v = side dv/dt - 2 grad phi . grad v - 2 (Lap phi) v
///   P3 v = side (A . grad v) + side (A . grad phi) v  [+ q v when included]
struct ConjugatedParts {
    SpaceTimeField<double> p1, p2, p3;
};

inline ConjugatedParts conjugated_apply(const SpaceTimeGrid& g, const WeightParams& p,
                                        CarlemanSide side,
                                        const VectorField<double>* A,
                                        const CarlemanPreset& v,
                                        const SpaceTimeField<double>* q = nullptr) {
    ConjugatedParts out{SpaceTimeField<double>(g), SpaceTimeField<double>(g),
                        SpaceTimeField<double>(g)};
    const double sgn = side == CarlemanSide::Plus ? 1.0 : -1.0;
    for (int k = 0; k <= g.nt; ++k) {
        const double t = g.t(k);
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) {
                const double x = g.x(i), y = g.y(j);
                const double sh = p.shifted(x, y);
                // grad phi = [sgn rho - s sh] omega, dphi/dt = sgn rho^2,
                // Lap phi = -s
                const double gradco = sgn * p.rho - p.s * sh;
                const double dtphi = sgn * p.rho * p.rho;
                const double zero1 = sgn * dtphi - gradco * gradco - p.s;
                const double vv = v.v(x, y, t);
                const double wgrad = p.omega[0] * v.vx(x, y, t) + p.omega[1] * v.vy(x, y, t);
                out.p1(i, j, k) = -v.lap(x, y, t) + zero1 * vv;
                out.p2(i, j, k) = sgn * v.vt(x, y, t) - 2.0 * gradco * wgrad + 2.0 * p.s * vv;
                double p3 = 0;
                if (A) {
                    const double adv =
                        A->x(i, j, k) * v.vx(x, y, t) + A->y(i, j, k) * v.vy(x, y, t);
                    const double aw =
                        A->x(i, j, k) * p.omega[0] + A->y(i, j, k) * p.omega[1];
                    p3 = sgn * adv + sgn * gradco * aw * vv;
                }
                if (q) p3 += (*q)(i, j, k) * vv;
                out.p3(i, j, k) = p3;
            }
    }
    return out;
}

/// Direct conjugation e^{-phi} L_{+-}(e^{phi} v) in log-safe arithmetic: the
/// weight never gets exponentiated; its derivatives enter through centered
/// differences of the sampled phi.
inline SpaceTimeField<double> conjugated_direct(const SpaceTimeGrid& g,
                                                const WeightParams& p, CarlemanSide side,
                                                const VectorField<double>* A,
                                                const CarlemanPreset& v,
                                                const SpaceTimeField<double>* q = nullptr) {
    SpaceTimeField<double> phi = sample(g, [&](double x, double y, double t) {
        return weight_phi(p, side, x, y, t);
    });
    const double sgn = side == CarlemanSide::Plus ? 1.0 : -1.0;
    SpaceTimeField<double> out(g);
    for (int k = 0; k <= g.nt; ++k) {
        const double t = g.t(k);
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) {
                const double x = g.x(i), y = g.y(j);
                const double px = ddx(phi, i, j, k), py = ddy(phi, i, j, k);
                const double pt = ddt(phi, i, j, k);
                // centered second differences, one-sided at the rim
                auto d2 = [&](int a, int n, auto val, double h) {
                    if (a == 0) return (val(0) - 2 * val(1) + val(2)) / (h * h);
                    if (a == n - 1)
                        return (val(n - 1) - 2 * val(n - 2) + val(n - 3)) / (h * h);
                    return (val(a - 1) - 2 * val(a) + val(a + 1)) / (h * h);
                };
                const double pxx =
                    d2(i, g.npx(), [&](int a) { return phi(a, j, k); }, g.hx);
                const double pyy =
                    d2(j, g.npy(), [&](int a) { return phi(i, a, k); }, g.hy);
                const double vv = v.v(x, y, t);
                const double vx = v.vx(x, y, t), vy = v.vy(x, y, t);
                double r = sgn * (v.vt(x, y, t) + pt * vv);
                r -= v.lap(x, y, t) + 2.0 * (px * vx + py * vy) +
                     (pxx + pyy + px * px + py * py) * vv;
                if (A) {
                    r += sgn * (A->x(i, j, k) * (vx + px * vv) +
                                A->y(i, j, k) * (vy + py * vv));
                }
                if (q) r += (*q)(i, j, k) * vv;
                out(i, j, k) = r;
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Estimate audit
// ---------------------------------------------------------------------------

struct CarlemanAuditRow {
    double s, rho;
    double lhs_boundary, lhs_cap, lhs_lap, lhs_l2, lhs_total;
    double rhs_p_norm, rhs_boundary, rhs_total;
    double ratio;
};

struct CarlemanAudit {
    std::vector<CarlemanAuditRow> rows;
    double ratio_spread = 0;  // max/min of the ratio at fixed s over the rho sweep
    bool pass = false;
};

/// Quadratures of every term of the weighted estimate for one preset and one
/// side, swept over rho at fixed s.  Passes when the empirical constant
/// LHS/RHS stays within a factor 3 across the sweep.
inline CarlemanAudit estimate_audit(const SpaceTimeGrid& g, double s,
                                    const std::vector<double>& rho_list,
                                    const Vec2& omega, const CarlemanPreset& preset,
                                    CarlemanSide side,
                                    const VectorField<double>* A = nullptr,
                                    const SpaceTimeField<double>* q = nullptr) {
    detail::check_preset_side(g, preset, side);
    const BoundaryPartition part = partition_boundary(g, omega);
    CarlemanAudit audit;
    for (double rho : rho_list) {
        const WeightParams p = WeightParams::make(s, rho, omega, g);
        const ConjugatedParts parts = conjugated_apply(g, p, side, A, preset, q);

        auto boundary_term = [&](const std::vector<BoundaryFace>& faces) {
            double acc = 0;
            for (int k = 0; k <= g.nt; ++k) {
                const double wt = time_weight(g, k);
                for (const auto& f : faces) {
                    const double dn = f.normal[0] * preset.vx(f.position[0], f.position[1],
                                                              g.t(k)) +
                                      f.normal[1] * preset.vy(f.position[0], f.position[1],
                                                              g.t(k));
                    acc += wt * f.area * dn * dn * std::abs(f.omega_dot_nu);
                }
            }
            return acc;
        };

        CarlemanAuditRow row{};
        row.s = s;
        row.rho = rho;
        const auto& lhs_faces =
            side == CarlemanSide::Plus ? part.sigma_plus : part.sigma_minus;
        const auto& rhs_faces =
            side == CarlemanSide::Plus ? part.sigma_minus : part.sigma_plus;
        row.lhs_boundary = rho * boundary_term(lhs_faces);
        row.rhs_boundary = rho * boundary_term(rhs_faces);

        const double tcap = side == CarlemanSide::Plus ? g.T : 0.0;
        double cap = 0;
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) {
                const double vv = preset.v(g.x(i), g.y(j), tcap);
                cap += trapezoid_weight(g, i, j) * vv * vv;
            }
        row.lhs_cap = s * rho * cap;

        row.lhs_lap = integrate_q<double>(g, [&](int i, int j, int k) {
                          const double l = preset.lap(g.x(i), g.y(j), g.t(k));
                          return l * l;
                      }) / s;
        row.lhs_l2 = s * rho * rho * integrate_q<double>(g, [&](int i, int j, int k) {
                         const double vv = preset.v(g.x(i), g.y(j), g.t(k));
                         return vv * vv;
                     });
        row.rhs_p_norm = integrate_q<double>(g, [&](int i, int j, int k) {
            const double pv = parts.p1(i, j, k) + parts.p2(i, j, k) + parts.p3(i, j, k);
            return pv * pv;
        });
        row.lhs_total = row.lhs_boundary + row.lhs_cap + row.lhs_lap + row.lhs_l2;
        row.rhs_total = row.rhs_p_norm + row.rhs_boundary;
        row.ratio = row.rhs_total > 0 ? row.lhs_total / row.rhs_total : 0.0;
        audit.rows.push_back(row);
    }
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0;
    for (const auto& r : audit.rows) {
        rmin = std::min(rmin, r.ratio);
        rmax = std::max(rmax, r.ratio);
    }
    audit.ratio_spread = rmin > 0 ? rmax / rmin : std::numeric_limits<double>::infinity();
    audit.pass = audit.ratio_spread <= 3.0;
    return audit;
}

}  // namespace dnr
