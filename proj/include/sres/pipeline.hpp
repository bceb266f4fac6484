#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sres/certificates.hpp"
#include "sres/imaging.hpp"
#include "sres/io.hpp"
#include "sres/measures.hpp"
#include "sres/solver.hpp"

namespace sres {

struct TruthGenerator {
    int K = 1;
    double sep_floor = 0.1;
    double weight_min = 0.5;
    double weight_max = 2.0;
    std::uint64_t seed = 0;
    bool on_grid = false;  // snap atoms to the recovery grid
};

// K atoms with per-coordinate and boundary gaps >= sep_floor.
AtomicMeasure generate_truth(const TruthGenerator& gen, int grid_n = 256);

enum class DeltapMode { Explicit, Additive, Multiplicative };

struct Scenario {
    json window_config;
    Window window = Window::gaussian_uniform(5, 0.2);
    std::optional<AtomicMeasure> truth;
    std::optional<TruthGenerator> generator;
    double delta = 0.0;
    std::uint64_t noise_seed = 0;
    int grid_n = 256;
    DeltapMode deltap_mode = DeltapMode::Additive;
    double deltap_value = 0.0;  // used when explicit
    double deltap_floor = 1e-8;
    int K = 0;                  // 0: number of truth atoms
    double eps = 0.1;
    double lambda = 1.5;
    bool certificates = false;
    GroundNorm ground_norm = GroundNorm::L2;
    double mass_floor = 1e-6;
    int repeats = 1;  // sweep rows average over this many seeds
};

// kind, construction, verdict, |b|_F and verification metrics
json certificate_summary(const Certificate& c);

Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir = {});
json scenario_to_json(const Scenario& sc);

struct PipelineOutcome {
    json report;
    AtomicMeasure truth, estimate;
    Observation observation;
    bool certificate_failed = false;
};

// Synthesize, observe, recover and score. Writes y.csv, xhat.json and
// report.json into out_dir when given.
PipelineOutcome run_pipeline(const Scenario& sc, const std::optional<std::filesystem::path>& out_dir = {});

struct SweepRow {
    double value = 0.0;
    double d_gw_mean = 0.0, d_gw_max = 0.0, residual = 0.0, theorem_rhs = 0.0;
    int runs = 0, failed = 0;
    bool bound_satisfied = true;
    std::vector<double> d_gw;
    std::string error;
};

// axis: delta | epsilon | M | sep
std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& axis, const std::vector<double>& values,
                                int jobs = 1);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace sres
