#pragma once

#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dnr/config.hpp"
#include "dnr/dnmap.hpp"
#include "dnr/go.hpp"
#include "dnr/presets.hpp"
#include "dnr/quasilinear.hpp"
#include "dnr/recover.hpp"

namespace dnr::cli {

using Json = nlohmann::ordered_json;

struct RunResult {
    bool pass = false;
    Json summary;
};

/// Random gauge function with analytic derivatives: a few low sine modes in
/// space (vanishing on the lateral boundary) times cosine profiles in time.
GaugeFunction random_gauge(const SpaceTimeGrid& g, std::mt19937_64& rng,
                           double amplitude);

/// Smooth deterministic boundary data for pairing checks: variant selects the
/// spatial profile; forward data vanish at t = 0, adjoint data at t = T.
SpaceTimeField<double> pairing_forward_datum(const SpaceTimeGrid& g, unsigned variant);
SpaceTimeField<double> pairing_adjoint_datum(const SpaceTimeGrid& g, unsigned variant);

struct GaugeCheckParams {
    GridConfig grid{63, 63, 128, 1.0, 1.0, 1.0};
    CoefficientProvider coefficients;
    unsigned seed = 1;
    int count = 3;
    double amplitude = 0.25;
    double tolerance = 0.02;
    double halving_factor = 0.6;  // refined deviation must fall below this times dev
    bool refine = true;
    SchemeOptions scheme{};
};

struct GaugeCheckCase {
    double deviation = 0;
    double deviation_refined = 0;
    bool pass = false;
};

struct GaugeCheckResult {
    std::vector<GaugeCheckCase> cases;
    bool pass = false;
};

GaugeCheckResult run_gauge_check(const GaugeCheckParams& p);

/// Coefficient provider built from a config section (presets or tabulated
/// files for A, B, q).
CoefficientProvider coefficient_provider(const ConfigSection& sec);

/// Quasi-linear model registry: zero | linear | sin-u | linear-gauged.
QuasiLinearModel make_model(const std::string& name, const ConfigSection& sec,
                            const SpaceTimeGrid& g);

std::vector<std::string> model_names();

/// Executes the configured pipeline, writing summary.json and the pipeline
/// CSVs into out_dir.  Returns the pass flag and the summary document.
RunResult run_pipeline(const Config& cfg, const std::string& out_dir);

const char* schema_text();
std::string presets_listing();

}  // namespace dnr::cli
