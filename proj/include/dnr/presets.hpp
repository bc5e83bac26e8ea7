#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "dnr/errors.hpp"
#include "dnr/field.hpp"
#include "dnr/fields.hpp"
#include "dnr/grid.hpp"

namespace dnr {

/// Named parameters of a coefficient preset (amplitude, center, radius, ...).
struct PresetParams {
    std::map<std::string, double> values;

    double get(const std::string& key, double fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
};

namespace detail {

/// Standard C^inf bump, normalized to peak 1 at the center.
inline double bump_profile(double r, double radius) {
    const double s = r / radius;
    if (s >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

/// Radial derivative of the bump profile.
inline double bump_profile_deriv(double r, double radius) {
    const double s = r / radius;
    if (s >= 1.0) return 0.0;
    const double d = 1.0 - s * s;
    return bump_profile(r, radius) * (-2.0 * s / (d * d)) / radius;
}

inline double time_profile(int kind, double t, double T) {
    switch (kind) {
        case 1: return t / T;
        case 2: return std::sin(M_PI * t / T);
        default: return 1.0;
    }
}

}  // namespace detail

inline std::vector<std::string> scalar_preset_names() {
    return {"zero", "constant", "bump", "sine", "indicator"};
}

inline std::vector<std::string> vector_preset_names() {
    return {"zero", "constant", "bump", "vortex", "gradient-of-bump",
            "solenoidal-bump"};
}

/// Scalar coefficient preset by name.  Common parameters: amp, cx, cy, r,
/// tdep (0 constant, 1 linear, 2 sine in t).
inline FieldFn scalar_preset(const std::string& name, const PresetParams& par,
                             const SpaceTimeGrid& g) {
    const double amp = par.get("amp", 1.0);
    const double cx = par.get("cx", 0.5 * g.Lx), cy = par.get("cy", 0.5 * g.Ly);
    const double r = par.get("r", 0.3 * std::min(g.Lx, g.Ly));
    const int tdep = static_cast<int>(par.get("tdep", 0));
    const double T = g.T;
    if (name == "zero") return [](double, double, double) { return 0.0; };
    if (name == "constant")
        return [=](double, double, double t) {
            return amp * detail::time_profile(tdep, t, T);
        };
    if (name == "bump")
        return [=](double x, double y, double t) {
            const double rr = std::hypot(x - cx, y - cy);
            return amp * detail::bump_profile(rr, r) * detail::time_profile(tdep, t, T);
        };
    if (name == "sine") {
        const double kx = par.get("kx", 1.0), ky = par.get("ky", 1.0);
        const double Lx = g.Lx, Ly = g.Ly;
        return [=](double x, double y, double t) {
            return amp * std::sin(kx * M_PI * x / Lx) * std::sin(ky * M_PI * y / Ly) *
                   detail::time_profile(tdep, t, T);
        };
    }
    if (name == "indicator")
        return [=](double x, double y, double t) {
            const double rr = std::hypot(x - cx, y - cy);
            return rr < r ? amp * detail::time_profile(tdep, t, T) : 0.0;
        };
    throw ConfigError("unknown scalar preset '" + name + "'");
}

/// Vector coefficient preset by name.  "vortex" is the rotational bump field,
/// "gradient-of-bump" its curl-free companion, "solenoidal-bump" the
/// divergence-free rotation of the bump gradient.
inline VectorFn vector_preset(const std::string& name, const PresetParams& par,
                              const SpaceTimeGrid& g) {
    const double amp = par.get("amp", 1.0);
    const double cx = par.get("cx", 0.5 * g.Lx), cy = par.get("cy", 0.5 * g.Ly);
    const double r = par.get("r", 0.3 * std::min(g.Lx, g.Ly));
    const int tdep = static_cast<int>(par.get("tdep", 0));
    const double T = g.T;
    if (name == "zero") return [](double, double, double) { return Vec2(0, 0); };
    if (name == "constant") {
        const double ax = par.get("ax", 1.0), ay = par.get("ay", 0.0);
        return [=](double, double, double t) -> Vec2 {
            const double tp = amp * detail::time_profile(tdep, t, T);
            return Vec2(ax * tp, ay * tp);
        };
    }
    if (name == "bump") {
        const double dx = par.get("dirx", 1.0), dy = par.get("diry", 0.0);
        return [=](double x, double y, double t) {
            const double rr = std::hypot(x - cx, y - cy);
            const double b =
                amp * detail::bump_profile(rr, r) * detail::time_profile(tdep, t, T);
            return Vec2(b * dx, b * dy);
        };
    }
    if (name == "vortex")
        return [=](double x, double y, double t) {
            const double rr = std::hypot(x - cx, y - cy);
            const double b =
                amp * detail::bump_profile(rr, r) * detail::time_profile(tdep, t, T);
            return Vec2(-b * (y - cy), b * (x - cx));
        };
    if (name == "gradient-of-bump")
        return [=](double x, double y, double t) {
            const double rr = std::hypot(x - cx, y - cy);
            if (rr < 1e-14) return Vec2(0, 0);
            const double d = amp * detail::bump_profile_deriv(rr, r) *
                             detail::time_profile(tdep, t, T);
            return Vec2(d * (x - cx) / rr, d * (y - cy) / rr);
        };
    if (name == "solenoidal-bump")
        return [=](double x, double y, double t) {
            const double rr = std::hypot(x - cx, y - cy);
            if (rr < 1e-14) return Vec2(0, 0);
            const double d = amp * detail::bump_profile_deriv(rr, r) *
                             detail::time_profile(tdep, t, T);
            return Vec2(-d * (y - cy) / rr, d * (x - cx) / rr);
        };
    throw ConfigError("unknown vector preset '" + name + "'");
}

}  // namespace dnr
