#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dnr/errors.hpp"
#include "dnr/field.hpp"
#include "dnr/grid.hpp"

namespace dnr {

/// Floats printed with 17 significant digits so files round-trip exactly.
inline std::string format_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : out_(path) {
        if (!out_) throw ConfigError("cannot open '" + path + "' for writing");
        for (size_t i = 0; i < header.size(); ++i)
            out_ << (i ? "," : "") << header[i];
        out_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

    void row_floats(const std::vector<double>& cells) {
        for (size_t i = 0; i < cells.size(); ++i)
            out_ << (i ? "," : "") << format_float(cells[i]);
        out_ << "\n";
    }

  private:
    std::ofstream out_;
};

inline void write_solution_csv(const std::string& path, const SpaceTimeField<double>& u,
                               int stride = 1) {
    CsvWriter csv(path, {"x", "y", "t", "value"});
    const SpaceTimeGrid& g = u.grid;
    for (int k = 0; k <= g.nt; k += stride)
        for (int j = 0; j < g.npy(); j += stride)
            for (int i = 0; i < g.npx(); i += stride)
                csv.row_floats({g.x(i), g.y(j), g.t(k), u(i, j, k)});
}

/// Tabulated field file with x, y, t, value columns covering a tensor grid;
/// sampled with bilinear interpolation in space and nearest level in time.
inline SpaceTimeField<double> load_field_csv(const std::string& path,
                                             const SpaceTimeGrid& g) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open field file '" + path + "'");
    std::string line;
    std::getline(in, line);  // header
    SpaceTimeField<double> out(g);
    Slice<double> seen = Slice<double>::Zero(g.npx(), g.npy());
    std::vector<Slice<double>> seen_all(g.num_levels(), seen);
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        double x, y, t, v;
        char c;
        if (!(ss >> x >> c >> y >> c >> t >> c >> v))
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": expected x,y,t,value");
        const int i = static_cast<int>(std::lround(x / g.hx));
        const int j = static_cast<int>(std::lround(y / g.hy));
        const int k = static_cast<int>(std::lround(t / g.dt));
        if (i < 0 || i >= g.npx() || j < 0 || j >= g.npy() || k < 0 || k > g.nt)
            continue;
        if (std::abs(x - g.x(i)) > 0.25 * g.hx || std::abs(y - g.y(j)) > 0.25 * g.hy ||
            std::abs(t - g.t(k)) > 0.25 * g.dt)
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": sample does not sit on a grid node");
        out(i, j, k) = v;
        seen_all[k](i, j) = 1.0;
    }
    for (int k = 0; k <= g.nt; ++k)
        if ((seen_all[k] == 0.0).any())
            throw ConfigError(path + ": tabulated field does not cover every node of "
                              "the requested grid");
    return out;
}

}  // namespace dnr
