#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dnr/errors.hpp"

namespace dnr {

using Vec2 = Eigen::Vector2d;

/// Uniform tensor grid on the space-time cylinder (0,Lx)x(0,Ly)x(0,T).
///
/// Interior point counts are nx, ny per axis; the stored fields also carry the
/// boundary ring, so a spatial slice has (nx+2)*(ny+2) nodes at coordinates
/// x_i = i*hx (i = 0..nx+1) and y_j = j*hy.  Time levels are t_k = k*dt for
/// k = 0..nt.
struct SpaceTimeGrid {
    int n = 2;  // spatial dimension, fixed at 2
    int nx = 0, ny = 0, nt = 0;
    double Lx = 1.0, Ly = 1.0, T = 1.0;
    double hx = 0.0, hy = 0.0, dt = 0.0;

    int npx() const { return nx + 2; }  // nodes per x row, boundary included
    int npy() const { return ny + 2; }
    int num_nodes() const { return npx() * npy(); }
    int num_levels() const { return nt + 1; }

    double x(int i) const { return i * hx; }
    double y(int j) const { return j * hy; }
    double t(int k) const { return k * dt; }

    bool interior(int i, int j) const {
        return i >= 1 && i <= nx && j >= 1 && j <= ny;
    }
    bool on_spatial_boundary(int i, int j) const {
        return i == 0 || i == nx + 1 || j == 0 || j == ny + 1;
    }

    double sup_radius() const {
        // sup_{x in Omega} |x|, attained at the far corner
        return std::sqrt(Lx * Lx + Ly * Ly);
    }

    /// Refinement by factor 2: halves hx, hy, dt exactly.
    SpaceTimeGrid refined() const;
};

struct GridConfig {
    int nx = 0, ny = 0, nt = 0;
    double Lx = 1.0, Ly = 1.0, T = 1.0;
};

inline SpaceTimeGrid build_grid(const GridConfig& cfg) {
    if (cfg.nx < 1 || cfg.ny < 1 || cfg.nt < 1)
        throw ConfigError("build_grid: non-positive dimension");
    if (cfg.Lx <= 0 || cfg.Ly <= 0 || cfg.T <= 0)
        throw ConfigError("build_grid: lengths and final time must be positive");
    SpaceTimeGrid g;
    g.nx = cfg.nx;
    g.ny = cfg.ny;
    g.nt = cfg.nt;
    g.Lx = cfg.Lx;
    g.Ly = cfg.Ly;
    g.T = cfg.T;
    g.hx = cfg.Lx / (cfg.nx + 1);
    g.hy = cfg.Ly / (cfg.ny + 1);
    g.dt = cfg.T / cfg.nt;
    return g;
}

inline SpaceTimeGrid SpaceTimeGrid::refined() const {
    GridConfig c;
    c.nx = 2 * nx + 1;
    c.ny = 2 * ny + 1;
    c.nt = 2 * nt;
    c.Lx = Lx;
    c.Ly = Ly;
    c.T = T;
    return build_grid(c);
}

enum class Edge : std::uint8_t { West = 0, East = 1, South = 2, North = 3 };

inline Vec2 edge_normal(Edge e) {
    switch (e) {
        case Edge::West: return {-1.0, 0.0};
        case Edge::East: return {1.0, 0.0};
        case Edge::South: return {0.0, -1.0};
        default: return {0.0, 1.0};
    }
}

inline const char* edge_name(Edge e) {
    switch (e) {
        case Edge::West: return "west";
        case Edge::East: return "east";
        case Edge::South: return "south";
        default: return "north";
    }
}

/// One quadrature face of the lateral boundary: a node on one edge together
/// with its outward normal and trapezoid length weight.  Corner nodes appear
/// once per adjacent edge with half weight.
struct BoundaryFace {
    Edge edge;
    int i, j;        // node indices in the full grid
    Vec2 normal;
    Vec2 position;
    double area;     // tangential length carried by the node
    double omega_dot_nu = 0.0;
};

/// Lateral-boundary faces of the rectangle, edge by edge, with trapezoid
/// weights.  Every edge contributes all of its nodes including corners.
inline std::vector<BoundaryFace> boundary_faces(const SpaceTimeGrid& g) {
    std::vector<BoundaryFace> faces;
    faces.reserve(2 * (g.npx() + g.npy()));
    auto push = [&](Edge e, int i, int j, double area) {
        BoundaryFace f;
        f.edge = e;
        f.i = i;
        f.j = j;
        f.normal = edge_normal(e);
        f.position = {g.x(i), g.y(j)};
        f.area = area;
        faces.push_back(f);
    };
    for (int j = 0; j <= g.ny + 1; ++j) {
        const double w = (j == 0 || j == g.ny + 1) ? 0.5 * g.hy : g.hy;
        push(Edge::West, 0, j, w);
        push(Edge::East, g.nx + 1, j, w);
    }
    for (int i = 0; i <= g.nx + 1; ++i) {
        const double w = (i == 0 || i == g.nx + 1) ? 0.5 * g.hx : g.hx;
        push(Edge::South, i, 0, w);
        push(Edge::North, i, g.ny + 1, w);
    }
    return faces;
}

/// Partition of the lateral boundary by the sign of omega . nu.
/// Faces with omega . nu == 0 belong to neither part.
struct BoundaryPartition {
    Vec2 omega;
    std::vector<BoundaryFace> sigma_plus;   // omega . nu > 0
    std::vector<BoundaryFace> sigma_minus;  // omega . nu < 0
    std::vector<int> omega0, omegaT;        // node indices of the caps
};

inline BoundaryPartition partition_boundary(const SpaceTimeGrid& g, const Vec2& omega) {
    if (std::abs(omega.norm() - 1.0) > 1e-12)
        throw ParameterError("partition_boundary: omega must be a unit vector");
    BoundaryPartition p;
    p.omega = omega;
    for (BoundaryFace f : boundary_faces(g)) {
        const double d = omega.dot(f.normal);
        f.omega_dot_nu = d;
        if (d > 1e-14)
            p.sigma_plus.push_back(f);
        else if (d < -1e-14)
            p.sigma_minus.push_back(f);
    }
    p.omega0.reserve(g.num_nodes());
    p.omegaT.reserve(g.num_nodes());
    for (int idx = 0; idx < g.num_nodes(); ++idx) {
        p.omega0.push_back(idx);
        p.omegaT.push_back(idx);
    }
    return p;
}

}  // namespace dnr
