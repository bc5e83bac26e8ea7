#include "pipelines.hpp"

#include <filesystem>
#include <fstream>

#include "dnr/carleman.hpp"
#include "dnr/io.hpp"

namespace dnr::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Gauge functions and pairing data
// ---------------------------------------------------------------------------

GaugeFunction random_gauge(const SpaceTimeGrid& g, std::mt19937_64& rng,
                           double amplitude) {
    struct Mode {
        double coef;
        int kx, ky, mt;
    };
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::vector<Mode> modes;
    for (int m = 0; m < 3; ++m) {
        Mode mo;
        mo.coef = amplitude * unit(rng);
        mo.kx = 1 + static_cast<int>(std::floor((unit(rng) + 1.0) * 1.5));  // 1..3
        mo.ky = 1 + static_cast<int>(std::floor((unit(rng) + 1.0) * 1.5));
        mo.mt = static_cast<int>(std::floor((unit(rng) + 1.0)));  // 0..1
        modes.push_back(mo);
    }
    const double Lx = g.Lx, Ly = g.Ly, T = g.T;
    auto phi = [=](double x, double y, double t) {
        double v = 0;
        for (const Mode& m : modes)
            v += m.coef * std::sin(m.kx * M_PI * x / Lx) *
                 std::sin(m.ky * M_PI * y / Ly) * std::cos(m.mt * M_PI * t / T);
        return v;
    };
    auto grad = [=](double x, double y, double t) {
        Vec2 v(0, 0);
        for (const Mode& m : modes) {
            const double tt = std::cos(m.mt * M_PI * t / T);
            v[0] += m.coef * (m.kx * M_PI / Lx) * std::cos(m.kx * M_PI * x / Lx) *
                    std::sin(m.ky * M_PI * y / Ly) * tt;
            v[1] += m.coef * std::sin(m.kx * M_PI * x / Lx) * (m.ky * M_PI / Ly) *
                    std::cos(m.ky * M_PI * y / Ly) * tt;
        }
        return v;
    };
    auto dt = [=](double x, double y, double t) {
        double v = 0;
        for (const Mode& m : modes)
            v += -m.coef * (m.mt * M_PI / T) * std::sin(m.kx * M_PI * x / Lx) *
                 std::sin(m.ky * M_PI * y / Ly) * std::sin(m.mt * M_PI * t / T);
        return v;
    };
    return make_gauge(g, phi, grad, dt);
}

SpaceTimeField<double> pairing_forward_datum(const SpaceTimeGrid& g, unsigned variant) {
    const double Lx = g.Lx, Ly = g.Ly, T = g.T;
    const double a = 1.0 + 0.3 * static_cast<double>(variant % 5);
    const double b = 0.5 + 0.2 * static_cast<double>((variant / 5) % 5);
    return sample(g, [=](double x, double y, double t) {
        return (t / T) *
               (std::sin(M_PI * x / Lx) + a * std::cos(2 * M_PI * y / Ly) +
                b * x * y / (Lx * Ly));
    });
}

SpaceTimeField<double> pairing_adjoint_datum(const SpaceTimeGrid& g, unsigned variant) {
    const double Lx = g.Lx, Ly = g.Ly, T = g.T;
    const double a = 0.8 + 0.25 * static_cast<double>(variant % 4);
    return sample(g, [=](double x, double y, double t) {
        return (1.0 - t / T) *
               (std::cos(M_PI * x / Lx) + a * std::sin(M_PI * y / Ly) + 0.2);
    });
}

GaugeCheckResult run_gauge_check(const GaugeCheckParams& p) {
    GaugeCheckResult res;
    std::mt19937_64 rng(p.seed);
    const SpaceTimeGrid g = build_grid(p.grid);
    const SpaceTimeGrid gr = g.refined();
    const CoefficientSet c = p.coefficients(g);
    const CoefficientSet cr = p.refine ? p.coefficients(gr) : CoefficientSet{};

    for (int n = 0; n < p.count; ++n) {
        // one RNG stream per case: the refined gauge must reuse the modes, so
        // draw them once through a forked generator
        std::mt19937_64 fork(rng());
        std::mt19937_64 fork2 = fork;
        const GaugeFunction phi = random_gauge(g, fork, p.amplitude);

        GaugeCheckCase cs;
        {
            const CoefficientSet c2 = gauge_transform(c, phi);
            const DNPairingSample s = dn_pairing_difference(
                c, c2, pairing_forward_datum(g, n), pairing_adjoint_datum(g, n),
                p.scheme);
            cs.deviation = std::abs(s.value) / std::max(s.normal_scale, 1e-300);
        }
        if (p.refine) {
            const GaugeFunction phir = random_gauge(gr, fork2, p.amplitude);
            const CoefficientSet c2r = gauge_transform(cr, phir);
            const DNPairingSample s = dn_pairing_difference(
                cr, c2r, pairing_forward_datum(gr, n), pairing_adjoint_datum(gr, n),
                p.scheme);
            cs.deviation_refined = std::abs(s.value) / std::max(s.normal_scale, 1e-300);
            cs.pass = cs.deviation <= p.tolerance && cs.deviation_refined <= p.tolerance;
        } else {
            cs.pass = cs.deviation <= p.tolerance;
        }
        res.cases.push_back(cs);
    }
    // the halving requirement is judged on the worst case over the batch: a
    // single case can sit at a sign crossing of the dt and h^2 error parts
    res.pass = !res.cases.empty();
    double dev_max = 0, ref_max = 0;
    for (const auto& cs : res.cases) {
        res.pass = res.pass && cs.pass;
        dev_max = std::max(dev_max, cs.deviation);
        ref_max = std::max(ref_max, cs.deviation_refined);
    }
    if (p.refine && res.pass) res.pass = ref_max <= p.halving_factor * dev_max;
    return res;
}

// ---------------------------------------------------------------------------
// Config-driven builders
// ---------------------------------------------------------------------------

namespace {

PresetParams params_for(const ConfigSection& sec, const std::string& prefix) {
    PresetParams par;
    for (const auto& [key, val] : sec.kv) {
        if (key.size() > prefix.size() + 1 && key.rfind(prefix + ".", 0) == 0) {
            try {
                par.values[key.substr(prefix.size() + 1)] = std::stod(val);
            } catch (const std::exception&) {
                throw ConfigError("line " + std::to_string(sec.lines.at(key)) +
                                  ": parameter '" + key + "' is not a number");
            }
        }
    }
    return par;
}

}  // namespace

CoefficientProvider coefficient_provider(const ConfigSection& sec) {
    const std::string a = sec.get("A", "zero");
    const std::string b = sec.get("B", "zero");
    const std::string q = sec.get("q", "zero");
    const PresetParams pa = params_for(sec, "A");
    const PresetParams pb = params_for(sec, "B");
    const PresetParams pq = params_for(sec, "q");
    return [=](const SpaceTimeGrid& g) {
        CoefficientSet c(g);
        if (a.rfind("file:", 0) == 0) {
            std::string rest = a.substr(5);
            const size_t comma = rest.find(',');
            if (comma == std::string::npos)
                throw ConfigError("vector coefficient files: 'file:<x.csv>,<y.csv>'");
            c.A.x = load_field_csv(rest.substr(0, comma), g);
            c.A.y = load_field_csv(rest.substr(comma + 1), g);
        } else {
            c.A = sample(g, vector_preset(a, pa, g));
        }
        if (b.rfind("file:", 0) == 0) {
            std::string rest = b.substr(5);
            const size_t comma = rest.find(',');
            if (comma == std::string::npos)
                throw ConfigError("vector coefficient files: 'file:<x.csv>,<y.csv>'");
            c.B.x = load_field_csv(rest.substr(0, comma), g);
            c.B.y = load_field_csv(rest.substr(comma + 1), g);
        } else {
            c.B = sample(g, vector_preset(b, pb, g));
        }
        if (q.rfind("file:", 0) == 0)
            c.q = load_field_csv(q.substr(5), g);
        else
            c.q = sample(g, scalar_preset(q, pq, g));
        return c;
    };
}

std::vector<std::string> model_names() {
    return {"zero", "linear", "sin-u", "linear-gauged"};
}

QuasiLinearModel make_model(const std::string& name, const ConfigSection& sec,
                            const SpaceTimeGrid& g) {
    QuasiLinearModel m;
    m.name = name;
    m.c0 = sec.get_double("c0", 50.0);
    m.c1 = sec.get_double("c1", 50.0);
    m.c2 = sec.get_double("c2", 1.0);
    m.c3 = sec.get_double("c3", 50.0);
    if (name == "zero") {
        m.F = [](double, double, double, double, double, double) { return 0.0; };
        m.dF_du = [](double, double, double, double, double, double) { return 0.0; };
        m.dF_dv = [](double, double, double, double, double, double) {
            return Vec2(0, 0);
        };
        return m;
    }
    if (name == "linear") {
        VectorFn afn = vector_preset(sec.get("a", "zero"), params_for(sec, "a"), g);
        FieldFn qfn = scalar_preset(sec.get("q", "zero"), params_for(sec, "q"), g);
        if (sec.has("a2")) {
            VectorFn a2 = vector_preset(sec.get("a2"), params_for(sec, "a2"), g);
            VectorFn base = afn;
            afn = [base, a2](double x, double y, double t) {
                return Vec2(base(x, y, t) + a2(x, y, t));
            };
        }
        m.F = [afn, qfn](double x, double y, double t, double u, double vx, double vy) {
            const Vec2 a = afn(x, y, t);
            return a[0] * vx + a[1] * vy + qfn(x, y, t) * u;
        };
        m.dF_du = [qfn](double x, double y, double t, double, double, double) {
            return qfn(x, y, t);
        };
        m.dF_dv = [afn](double x, double y, double t, double, double, double) {
            return afn(x, y, t);
        };
        return m;
    }
    if (name == "sin-u") {
        const double amp = sec.get_double("amp", 1.0);
        m.F = [amp](double, double, double, double u, double, double) {
            return amp * std::sin(u);
        };
        m.dF_du = [amp](double, double, double, double u, double, double) {
            return amp * std::cos(u);
        };
        m.dF_dv = [](double, double, double, double, double, double) {
            return Vec2(0, 0);
        };
        return m;
    }
    if (name == "linear-gauged") {
        // gauge companion of a linear model: a -> a + 2 grad phi with the
        // matching zero-order update, phi a time-independent bump
        VectorFn afn = vector_preset(sec.get("a", "zero"), params_for(sec, "a"), g);
        PresetParams pp = params_for(sec, "phi");
        const double amp = pp.get("amp", 0.2);
        const double cx = pp.get("cx", 0.5 * g.Lx), cy = pp.get("cy", 0.5 * g.Ly);
        const double r = pp.get("r", 0.3 * std::min(g.Lx, g.Ly));
        auto gradphi = [=](double x, double y) {
            const double rr = std::hypot(x - cx, y - cy);
            if (rr < 1e-14) return Vec2(0, 0);
            const double d = amp * detail::bump_profile_deriv(rr, r);
            return Vec2(d * (x - cx) / rr, d * (y - cy) / rr);
        };
        m.F = [afn, gradphi](double x, double y, double t, double u, double vx,
                             double vy) {
            const Vec2 a = afn(x, y, t);
            const Vec2 gp = gradphi(x, y);
            const double lin = a[0] * vx + a[1] * vy + 2.0 * (gp[0] * vx + gp[1] * vy);
            const double qq = -(gp.squaredNorm() + a.dot(gp));
            return lin + qq * u;
        };
        m.dF_du = [afn, gradphi](double x, double y, double t, double, double, double) {
            const Vec2 a = afn(x, y, t);
            const Vec2 gp = gradphi(x, y);
            return -(gp.squaredNorm() + a.dot(gp));
        };
        m.dF_dv = [afn, gradphi](double x, double y, double t, double, double, double) {
            const Vec2 gp = gradphi(x, y);
            return Vec2(afn(x, y, t) + 2.0 * gp);
        };
        return m;
    }
    throw ConfigError("unknown quasilinear model '" + name + "'");
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

namespace {

GridConfig grid_from(const Config& cfg) {
    const ConfigSection& s = cfg.require("grid");
    GridConfig g;
    g.nx = s.get_int("nx", 31);
    g.ny = s.get_int("ny", 31);
    g.nt = s.get_int("nt", 32);
    g.Lx = s.get_double("Lx", 1.0);
    g.Ly = s.get_double("Ly", 1.0);
    g.T = s.get_double("T", 1.0);
    return g;
}

void write_summary(const std::string& out_dir, const Json& summary) {
    std::ofstream out(fs::path(out_dir) / "summary.json");
    out << summary.dump(2) << "\n";
}

RunResult pipeline_forward(const Config& cfg, const std::string& out_dir) {
    const SpaceTimeGrid g = build_grid(grid_from(cfg));
    const CoefficientSet c = coefficient_provider(cfg.require("c1"))(g);
    const ConfigSection& data = cfg.section("data");
    SpaceTimeField<double> gdat(g);
    if (data.has("g"))
        gdat = sample(g, scalar_preset(data.get("g"), params_for(data, "g"), g));
    Slice<double> u0s = Slice<double>::Zero(g.npx(), g.npy());
    if (data.has("u0")) {
        const FieldFn f = scalar_preset(data.get("u0"), params_for(data, "u0"), g);
        for (int j = 0; j < g.npy(); ++j)
            for (int i = 0; i < g.npx(); ++i) u0s(i, j) = f(g.x(i), g.y(j), 0.0);
    }
    SpaceTimeField<double> src(g);
    const bool has_src = data.has("f");
    if (has_src) src = sample(g, scalar_preset(data.get("f"), params_for(data, "f"), g));

    SchemeOptions opts;
    opts.theta = cfg.section("scheme").get_double("theta", 1.0);
    const Solution<double> sol =
        solve_forward<double>(c, gdat, u0s, has_src ? &src : nullptr, opts);
    const int stride = cfg.section("output").get_int("stride", 1);
    write_solution_csv((fs::path(out_dir) / "solution.csv").string(), sol.values,
                       stride);

    RunResult r;
    r.pass = true;
    r.summary["pipeline"] = "forward";
    r.summary["sup_norm"] = sol.values.sup_norm();
    r.summary["pass"] = true;
    return r;
}

RunResult pipeline_gauge_check(const Config& cfg, const std::string& out_dir) {
    GaugeCheckParams p;
    p.grid = grid_from(cfg);
    p.coefficients = coefficient_provider(cfg.require("c1"));
    const ConfigSection& s = cfg.section("gauge");
    p.seed = static_cast<unsigned>(cfg.section("experiment").get_int("seed", 1));
    p.count = s.get_int("count", 3);
    p.amplitude = s.get_double("amplitude", 0.25);
    p.tolerance = s.get_double("tolerance", 0.02);
    p.halving_factor = s.get_double("halving_factor", 0.6);
    p.refine = s.get_bool("refine", true);
    const GaugeCheckResult res = run_gauge_check(p);

    CsvWriter csv((fs::path(out_dir) / "gauge_check.csv").string(),
                  {"case", "deviation", "deviation_refined", "pass"});
    for (size_t i = 0; i < res.cases.size(); ++i)
        csv.row({std::to_string(i), format_float(res.cases[i].deviation),
                 format_float(res.cases[i].deviation_refined),
                 res.cases[i].pass ? "1" : "0"});

    RunResult r;
    r.pass = res.pass;
    r.summary["pipeline"] = "gauge-check";
    Json cases = Json::array();
    for (const auto& cs : res.cases)
        cases.push_back({{"deviation", cs.deviation},
                         {"deviation_refined", cs.deviation_refined},
                         {"pass", cs.pass}});
    r.summary["cases"] = cases;
    r.summary["tolerance"] = p.tolerance;
    r.summary["pass"] = res.pass;
    return r;
}

RunResult pipeline_recover_da(const Config& cfg, const std::string& out_dir) {
    const GridConfig base = grid_from(cfg);
    const SpaceTimeGrid g = build_grid(base);
    const CoefficientProvider prov1 = coefficient_provider(cfg.require("c1"));
    const CoefficientProvider prov2 = coefficient_provider(cfg.require("c2"));
    const ConfigSection& ps = cfg.section("probes");

    CurlRecoveryOptions copt;
    copt.rho_list = ps.get_double_list("rho_list", {8, 16, 32, 64});
    copt.kmax_xi = ps.get_int("kmax_xi", 8);
    copt.kmax_tau = ps.get_int("kmax_tau", 8);
    copt.fit_transfer_min = ps.get_double("fit_transfer_min", 0.1);

    const CoefficientSet c1 = prov1(g), c2 = prov2(g);
    VectorField<double> A_diff(g);
    for (int k = 0; k <= g.nt; ++k) {
        A_diff.x.slices[k] = c1.A.x.slices[k] - c2.A.x.slices[k];
        A_diff.y.slices[k] = c1.A.y.slices[k] - c2.A.y.slices[k];
    }
    const CurlReport rep = recover_curl_direct(A_diff, copt);
    const FrequencyLattice& lat = rep.lattice;

    {
        CsvWriter csv((fs::path(out_dir) / "curl_recovered.csv").string(),
                      {"kx", "ky", "kt", "xi_x", "xi_y", "tau", "re_recovered",
                       "im_recovered", "re_truth", "im_truth", "flagged"});
        for (int kx = -lat.kmax_xi; kx <= lat.kmax_xi; ++kx)
            for (int ky = -lat.kmax_xi; ky <= lat.kmax_xi; ++ky)
                for (int kt = -lat.kmax_tau; kt <= lat.kmax_tau; ++kt) {
                    const int idx = lat.index(kx, ky, kt);
                    const Vec2 xi = lat.xi(kx, ky);
                    csv.row({std::to_string(kx), std::to_string(ky), std::to_string(kt),
                             format_float(xi[0]), format_float(xi[1]),
                             format_float(lat.tau(kt)),
                             format_float(rep.extrapolated[idx].real()),
                             format_float(rep.extrapolated[idx].imag()),
                             format_float(rep.truth[idx].real()),
                             format_float(rep.truth[idx].imag()),
                             rep.flagged[idx] ? "1" : "0"});
                }
    }

    // reduced-lattice DN channel with per-rho grids
    Json dn_rows = Json::array();
    double dn_max_gap = 0;
    {
        CsvWriter csv((fs::path(out_dir) / "pairings.csv").string(),
                      {"probe_id", "rho", "omega_x", "omega_y", "xi_x", "xi_y", "tau",
                       "re_value", "im_value"});
        CsvWriter csvd((fs::path(out_dir) / "pairings_direct.csv").string(),
                       {"probe_id", "rho", "omega_x", "omega_y", "xi_x", "xi_y", "tau",
                        "re_value", "im_value"});
        RemainderAuditOptions scale;
        scale.rho_h_max = ps.get_double("rho_h_max", 0.5);
        scale.max_nx = ps.get_int("max_nx", 127);
        const auto tuples = ps.get_tuples("dn_points");
        int pid = 0;
        for (const auto& tp : tuples) {
            if (tp.size() != 3)
                throw ConfigError("probes.dn_points expects 'kx,ky,kt' triples");
            const int kx = static_cast<int>(tp[0]), ky = static_cast<int>(tp[1]),
                      kt = static_cast<int>(tp[2]);
            if (kx == 0 && ky == 0)
                throw ConfigError("probes.dn_points: xi = 0 carries no ray direction");
            for (double rho : copt.rho_list) {
                const SpaceTimeGrid gr = grid_for_rho(base, rho, scale);
                const FrequencyLattice lr = FrequencyLattice::standard(gr);
                const CoefficientSet d1 = prov1(gr), d2 = prov2(gr);
                const Vec2 xi = lr.xi(kx, ky);
                const Vec2 omega = Vec2(-xi[1], xi[0]) / xi.norm();
                GOProbe probe =
                    make_go_probe(gr, rho, omega, xi, lr.tau(kt), d1.A, d2.A);
                probe.id = "p" + std::to_string(pid);
                const RayChannels ch = pairing_to_ray(d1, d2, probe);
                csv.row({probe.id, format_float(rho), format_float(omega[0]),
                         format_float(omega[1]), format_float(xi[0]),
                         format_float(xi[1]), format_float(lr.tau(kt)),
                         format_float(ch.pairing_over_rho.real()),
                         format_float(ch.pairing_over_rho.imag())});
                csvd.row({probe.id, format_float(rho), format_float(omega[0]),
                          format_float(omega[1]), format_float(xi[0]),
                          format_float(xi[1]), format_float(lr.tau(kt)),
                          format_float(ch.direct.real()),
                          format_float(ch.direct.imag())});
                const double gap = std::abs(ch.pairing_over_rho - ch.direct);
                dn_max_gap = std::max(dn_max_gap, gap);
                dn_rows.push_back({{"probe", probe.id},
                                   {"rho", rho},
                                   {"kx", kx},
                                   {"ky", ky},
                                   {"kt", kt},
                                   {"gap", gap}});
            }
            ++pid;
        }
    }

    // the decay criterion watches the uncompensated sweep, where the
    // mollification error genuinely shrinks with rho
    bool monotone = true;
    for (size_t r = 1; r < rep.err_per_rho_raw.size(); ++r)
        if (rep.err_per_rho_raw[r] > rep.err_per_rho_raw[r - 1] * (1.0 + 1e-12))
            monotone = false;
    const double tol = ps.get_double("tolerance", 0.10);
    const double herm_tol = ps.get_double("hermitian_tol", 1e-8);

    RunResult r;
    r.pass = rep.err_extrapolated <= tol && monotone &&
             rep.hermitian_deviation <= herm_tol;
    r.summary["pipeline"] = "recover-da";
    r.summary["rho_list"] = copt.rho_list;
    r.summary["err_per_rho"] = rep.err_per_rho;
    r.summary["err_per_rho_raw"] = rep.err_per_rho_raw;
    r.summary["err_extrapolated"] = rep.err_extrapolated;
    r.summary["err_monotone"] = monotone;
    r.summary["hermitian_deviation"] = rep.hermitian_deviation;
    r.summary["dn_channel"] = dn_rows;
    r.summary["dn_max_gap"] = dn_max_gap;
    r.summary["tolerance"] = tol;
    r.summary["pass"] = r.pass;
    return r;
}

RunResult pipeline_recover_q(const Config& cfg, const std::string& out_dir) {
    const GridConfig base = grid_from(cfg);
    const ConfigSection& zs = cfg.section("zero-order");
    ZeroOrderOptions opt;
    opt.rho_list = zs.get_double_list("rho_list", {8, 16, 32});
    opt.grid_scaling.rho_h_max = zs.get_double("rho_h_max", 0.5);
    opt.grid_scaling.max_nx = zs.get_int("max_nx", 127);
    std::vector<ZeroOrderPoint> points;
    for (const auto& tp : zs.get_tuples("points")) {
        if (tp.size() != 3)
            throw ConfigError("zero-order.points expects 'kx,ky,kt' triples");
        points.push_back({static_cast<int>(tp[0]), static_cast<int>(tp[1]),
                          static_cast<int>(tp[2])});
    }
    if (points.empty()) points = {{1, 0, 0}, {0, 1, 0}, {1, 1, 1}};

    const ZeroOrderReport rep =
        recover_zero_order(coefficient_provider(cfg.require("c1")),
                           coefficient_provider(cfg.require("c2")), base, points, opt);

    CsvWriter csv((fs::path(out_dir) / "zero_order.csv").string(),
                  {"kx", "ky", "kt", "re_pairing", "im_pairing", "re_direct",
                   "im_direct", "abs_diff"});
    for (const auto& row : rep.rows)
        csv.row({std::to_string(row.point.kx), std::to_string(row.point.ky),
                 std::to_string(row.point.kt),
                 format_float(row.pairing_extrapolated.real()),
                 format_float(row.pairing_extrapolated.imag()),
                 format_float(row.direct.real()), format_float(row.direct.imag()),
                 format_float(std::abs(row.pairing_extrapolated - row.direct))});

    const double rel_tol = zs.get_double("tolerance", 0.10);
    const double floor = zs.get_double("floor", 1e-6);
    const double allowed = std::max(rel_tol * rep.max_abs_direct, floor);

    RunResult r;
    r.pass = rep.max_abs_diff <= allowed;
    r.summary["pipeline"] = "recover-q";
    r.summary["max_abs_direct"] = rep.max_abs_direct;
    r.summary["max_abs_diff"] = rep.max_abs_diff;
    r.summary["allowed"] = allowed;
    r.summary["pass"] = r.pass;
    return r;
}

RunResult pipeline_quasilinear(const Config& cfg, const std::string& out_dir) {
    const SpaceTimeGrid g = build_grid(grid_from(cfg));
    const ConfigSection& qs = cfg.section("quasilinear");
    const QuasiLinearModel m1 =
        make_model(qs.get("m1", "linear"), cfg.section("m1"), g);
    const QuasiLinearModel m2 =
        make_model(qs.get("m2", "linear"), cfg.section("m2"), g);

    QuasiSliceOptions opt;
    opt.curl.rho_list = qs.get_double_list("rho_list", {8, 16, 32, 64});
    opt.curl.kmax_xi = qs.get_int("kmax_xi", 8);
    opt.curl.kmax_tau = qs.get_int("kmax_tau", 2);
    opt.interior_margin = qs.get_double("margin", 0.15);

    std::vector<QuasiSliceAnchor> anchors;
    for (const auto& tp : qs.get_tuples("anchors")) {
        if (tp.size() != 3)
            throw ConfigError("quasilinear.anchors expects 'a,vx,vy' triples");
        anchors.push_back({tp[0], Vec2(tp[1], tp[2])});
    }
    if (anchors.empty()) anchors = {{0.0, Vec2(1.0, 0.5)}};

    const QuasiSliceReport rep = quasilinear_slice_recover(m1, m2, g, anchors, opt);

    CsvWriter csv((fs::path(out_dir) / "slice_recovery.csv").string(),
                  {"a", "vx", "vy", "rel_err_interior", "frozen_time_variation"});
    for (const auto& ar : rep.anchors)
        csv.row_floats({ar.anchor.a, ar.anchor.v[0], ar.anchor.v[1],
                        ar.rel_err_interior, ar.frozen_time_variation});

    const double tol = qs.get_double("tolerance", 0.10);
    RunResult r;
    r.summary["pipeline"] = "quasilinear";
    r.summary["gauge_class_mode"] = rep.gauge_class_mode;
    if (rep.gauge_class_mode) {
        r.summary["hypothesis_note"] = rep.hypothesis_note;
        r.summary["curl_channel_rel"] = rep.curl_channel_rel;
        r.summary["gauge_identity_err"] = rep.gauge_identity_err;
        r.pass = true;  // flagged gauge-class output is a valid outcome
    } else {
        bool ok = true;
        Json arr = Json::array();
        for (const auto& ar : rep.anchors) {
            ok = ok && ar.rel_err_interior <= tol;
            arr.push_back({{"a", ar.anchor.a},
                           {"vx", ar.anchor.v[0]},
                           {"vy", ar.anchor.v[1]},
                           {"rel_err_interior", ar.rel_err_interior}});
        }
        r.summary["anchors"] = arr;
        r.pass = ok;
    }
    r.summary["tolerance"] = tol;
    r.summary["pass"] = r.pass;
    return r;
}

RunResult pipeline_carleman(const Config& cfg, const std::string& out_dir) {
    const SpaceTimeGrid g = build_grid(grid_from(cfg));
    const ConfigSection& cs = cfg.section("carleman");
    const double s = cs.get_double("s", 40.0);
    const std::vector<double> rho_list =
        cs.get_double_list("rho_list", {2000, 3557, 6325, 11247, 20000});
    Vec2 omega(1, 0);
    {
        const auto om = cs.get_double_list("omega", {1, 0});
        if (om.size() == 2) omega = Vec2(om[0], om[1]).normalized();
    }
    VectorField<double> A(g);
    bool has_A = false;
    if (cfg.has("c1")) {
        const CoefficientSet c = coefficient_provider(cfg.require("c1"))(g);
        A = c.A;
        has_A = true;
    }
    const bool include_q = cs.get_bool("include_q", false);
    SpaceTimeField<double> qf(g);
    if (include_q && cfg.has("c1"))
        qf = coefficient_provider(cfg.require("c1"))(g).q;

    const CarlemanPreset p1 = preset_poly_trig(g, 1, 1, 1, "t-sin");
    const CarlemanPreset p2 = preset_poly_trig(g, 2, 2, 1, "t2-sin2");
    const std::vector<const CarlemanPreset*> plus_presets{&p1, &p2};
    const CarlemanPreset m1p = time_reversed(p1, g.T);
    const CarlemanPreset m2p = time_reversed(p2, g.T);
    const std::vector<const CarlemanPreset*> minus_presets{&m1p, &m2p};

    CsvWriter csv((fs::path(out_dir) / "carleman.csv").string(),
                  {"side", "preset", "s", "rho", "lhs_boundary", "lhs_cap", "lhs_lap",
                   "lhs_l2", "rhs_p_norm", "rhs_boundary", "ratio", "pass"});
    bool all_pass = true;
    Json audits = Json::array();
    double max_sumcheck = 0, sumcheck_scale = 0;
    for (CarlemanSide side : {CarlemanSide::Plus, CarlemanSide::Minus}) {
        const auto& presets =
            side == CarlemanSide::Plus ? plus_presets : minus_presets;
        for (const CarlemanPreset* pr : presets) {
            const CarlemanAudit audit =
                estimate_audit(g, s, rho_list, omega, *pr, side,
                               has_A ? &A : nullptr, include_q ? &qf : nullptr);
            all_pass = all_pass && audit.pass;
            for (const auto& row : audit.rows)
                csv.row({side == CarlemanSide::Plus ? "plus" : "minus", pr->name,
                         format_float(row.s), format_float(row.rho),
                         format_float(row.lhs_boundary), format_float(row.lhs_cap),
                         format_float(row.lhs_lap), format_float(row.lhs_l2),
                         format_float(row.rhs_p_norm), format_float(row.rhs_boundary),
                         format_float(row.ratio), audit.pass ? "1" : "0"});
            audits.push_back({{"side", side == CarlemanSide::Plus ? "plus" : "minus"},
                              {"preset", pr->name},
                              {"ratio_spread", audit.ratio_spread},
                              {"pass", audit.pass}});

            // decomposition sum check against the log-safe direct conjugation
            const WeightParams wp = WeightParams::make(s, rho_list.front(), omega, g);
            const ConjugatedParts parts = conjugated_apply(
                g, wp, side, has_A ? &A : nullptr, *pr, include_q ? &qf : nullptr);
            const SpaceTimeField<double> direct = conjugated_direct(
                g, wp, side, has_A ? &A : nullptr, *pr, include_q ? &qf : nullptr);
            for (int k = 0; k <= g.nt; ++k)
                for (int j = 0; j < g.npy(); ++j)
                    for (int i = 0; i < g.npx(); ++i) {
                        const double sum = parts.p1(i, j, k) + parts.p2(i, j, k) +
                                           parts.p3(i, j, k);
                        max_sumcheck =
                            std::max(max_sumcheck, std::abs(sum - direct(i, j, k)));
                        sumcheck_scale =
                            std::max(sumcheck_scale, std::abs(direct(i, j, k)));
                    }
        }
    }
    const double sum_tol =
        (g.hx * g.hx + g.dt) * std::max(sumcheck_scale, 1.0);
    const bool sum_ok = max_sumcheck <= sum_tol;

    RunResult r;
    r.pass = all_pass && sum_ok;
    r.summary["pipeline"] = "carleman-audit";
    r.summary["audits"] = audits;
    r.summary["sum_check_max"] = max_sumcheck;
    r.summary["sum_check_tol"] = sum_tol;
    r.summary["pass"] = r.pass;
    return r;
}

RunResult pipeline_moll_audit(const Config& cfg, const std::string& out_dir) {
    const SpaceTimeGrid g = build_grid(grid_from(cfg));
    const ConfigSection& ms = cfg.section("moll");
    const std::string field = ms.get("field", "indicator");
    const std::vector<double> rho_list = ms.get_double_list("rho_list", {8, 16, 32, 64});
    const SpaceTimeField<double> f =
        sample(g, scalar_preset(field, params_for(ms, "field"), g));

    const MollifierAudit audit = mollifier_norm_audit(f, rho_list);
    std::vector<double> l1_errors;
    for (double rho : rho_list) l1_errors.push_back(mollify_l1_error(f, rho));
    bool l1_decreasing = true;
    for (size_t i = 1; i < l1_errors.size(); ++i)
        if (l1_errors[i] >= l1_errors[i - 1]) l1_decreasing = false;

    CsvWriter csv((fs::path(out_dir) / "moll_audit.csv").string(),
                  {"rho", "w1_sup", "w2_sup", "l1_error"});
    for (size_t i = 0; i < audit.rows.size(); ++i)
        csv.row_floats({audit.rows[i].rho, audit.rows[i].w1_norm,
                        audit.rows[i].w2_norm, l1_errors[i]});

    RunResult r;
    r.pass = audit.pass && l1_decreasing;
    r.summary["pipeline"] = "moll-audit";
    r.summary["slope_k1"] = audit.slope_k1;
    r.summary["slope_k2"] = audit.slope_k2;
    r.summary["l1_decreasing"] = l1_decreasing;
    r.summary["pass"] = r.pass;
    return r;
}

}  // namespace

RunResult run_pipeline(const Config& cfg, const std::string& out_dir) {
    const std::string pipeline = cfg.require("experiment").get("pipeline");
    if (pipeline.empty())
        throw ConfigError(cfg.path + ": [experiment] must name a pipeline");
    fs::create_directories(out_dir);

    RunResult r;
    if (pipeline == "forward")
        r = pipeline_forward(cfg, out_dir);
    else if (pipeline == "gauge-check")
        r = pipeline_gauge_check(cfg, out_dir);
    else if (pipeline == "recover-da")
        r = pipeline_recover_da(cfg, out_dir);
    else if (pipeline == "recover-q")
        r = pipeline_recover_q(cfg, out_dir);
    else if (pipeline == "quasilinear")
        r = pipeline_quasilinear(cfg, out_dir);
    else if (pipeline == "carleman-audit")
        r = pipeline_carleman(cfg, out_dir);
    else if (pipeline == "moll-audit")
        r = pipeline_moll_audit(cfg, out_dir);
    else
        throw ConfigError(cfg.path + ": unknown pipeline '" + pipeline + "'");
    write_summary(out_dir, r.summary);
    return r;
}

std::string presets_listing() {
    std::string out = "scalar coefficient presets:\n";
    for (const auto& n : scalar_preset_names()) out += "  " + n + "\n";
    out += "vector coefficient presets:\n";
    for (const auto& n : vector_preset_names()) out += "  " + n + "\n";
    out += "quasilinear models:\n";
    for (const auto& n : model_names()) out += "  " + n + "\n";
    out += "carleman presets:\n  t-sin\n  t2-sin2\n";
    return out;
}

}  // namespace dnr::cli
