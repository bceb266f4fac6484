#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sres/certificates.hpp"
#include "sres/chebyshev.hpp"
#include "sres/io.hpp"
#include "sres/pipeline.hpp"
#include "sres/solver.hpp"
#include "sres/transport.hpp"

using namespace sres;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNotConverged = 3;
constexpr int kCertificate = 4;

struct Globals {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

fs::path out_dir(const Globals& g) {
    fs::path p = g.out.empty() ? fs::path(".") : fs::path(g.out);
    fs::create_directories(p);
    return p;
}

Scenario load_scenario(const Globals& g) {
    if (g.config.empty()) throw ConfigError("--config is required");
    fs::path p = g.config;
    Scenario sc = parse_scenario(read_json_file(p), p.parent_path());
    if (g.seed) {
        sc.noise_seed = *g.seed;
        if (sc.generator) sc.generator->seed = *g.seed;
    }
    return sc;
}

void emit(const json& j, const std::optional<fs::path>& file) {
    std::cout << j.dump(2) << '\n';
    if (file) write_json_file(*file, j);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            v.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + cell + "'");
        }
    }
    return v;
}

// {"kind":"zero","nodes":[...],"chosen":[...],"epsilon":e}
// {"kind":"bump","nodes":[...],"index":k,"sign":-1,"epsilon":e}
// {"kind":"constant","value":v}
PlateauTarget target_from_json(const json& j) {
    const std::string kind = j.value("kind", std::string("zero"));
    if (kind == "zero")
        return zero_plateau(j.at("nodes").get<std::vector<double>>(), j.value("chosen", std::vector<int>{}),
                            j.value("epsilon", 0.1));
    if (kind == "bump")
        return bump_plateau(j.at("nodes").get<std::vector<double>>(), j.at("index").get<int>(),
                            j.value("sign", 1.0), j.value("epsilon", 0.1));
    if (kind == "constant") return PlateauTarget{{}, 0.1, 0.0, j.value("value", 0.0)};
    throw ConfigError("target: unknown kind '" + kind + "'");
}

json tsystem_json(const TsystemReport& r) {
    return {{"mode", "tsystem"},
            {"passed", r.passed},
            {"trials", r.trials},
            {"positive", r.positive},
            {"negative", r.negative},
            {"zero", r.zero},
            {"min_abs_det", r.min_abs_det},
            {"zero_threshold", r.zero_threshold},
            {"worst_sequence", r.worst_sequence}};
}

json tstar_json(const TstarReport& r) {
    return {{"mode", "tstar"},
            {"passed", r.passed},
            {"part1", r.part1},
            {"part2_applicable", r.part2_applicable},
            {"part2", r.part2},
            {"n_values", r.n_values},
            {"determinants", r.determinants},
            {"log_minors", r.log_minors},
            {"slopes", r.slopes},
            {"slope_spread", r.slope_spread},
            {"det_tolerance", r.det_tolerance},
            {"slope_tolerance", r.slope_tolerance},
            {"note", r.note}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Super-resolution of positive point sources: forward model, recovery, transport error and certificates"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config, "scenario JSON")->check(CLI::ExistingFile);
    app.add_option("--out", g.out, "output directory (or file for recover/distance)");
    auto* seed_opt = app.add_option("--seed", seed_value, "random seed override");
    app.add_option("--jobs", g.jobs, "parallel pipelines in a sweep")->check(CLI::PositiveNumber);

    // forward
    auto* fwd = app.add_subcommand("forward", "image a measure and add noise; writes y.csv and y.json");
    std::string fwd_window, fwd_truth;
    double fwd_delta = 0.0;
    fwd->add_option("--window", fwd_window, "window JSON")->check(CLI::ExistingFile);
    fwd->add_option("--truth", fwd_truth, "measure JSON")->check(CLI::ExistingFile);
    fwd->add_option("--delta", fwd_delta, "noise level |y - Phi(x)|_F")->check(CLI::NonNegativeNumber);

    // recover
    auto* rec = app.add_subcommand("recover", "nonnegative least squares on a grid");
    std::string rec_window, rec_obs;
    int rec_grid = 256;
    std::optional<double> rec_deltap;
    double rec_floor = 1e-6;
    rec->add_option("--window", rec_window, "window JSON")->required()->check(CLI::ExistingFile);
    rec->add_option("--obs", rec_obs, "observation CSV")->required()->check(CLI::ExistingFile);
    rec->add_option("--grid-n", rec_grid, "grid nodes per axis")->check(CLI::Range(2, 4096));
    rec->add_option("--deltap", rec_deltap, "feasibility radius (default: observation delta, at least 1e-8)");
    rec->add_option("--mass-floor", rec_floor, "drop recovered atoms lighter than this");

    // distance
    auto* dist = app.add_subcommand("distance", "generalized Wasserstein distance between two measures");
    std::string dist_a, dist_b, dist_norm = "l2";
    dist->add_option("first", dist_a, "measure JSON")->required()->check(CLI::ExistingFile);
    dist->add_option("second", dist_b, "measure JSON")->required()->check(CLI::ExistingFile);
    dist->add_option("--norm", dist_norm, "ground norm: l1, l2 or linf");

    // certificate
    auto* cert = app.add_subcommand("certificate", "build and verify a dual certificate");
    std::string cert_window, cert_support, cert_kind = "noisy", cert_signs;
    double cert_eps = 0.1;
    int cert_grid = 512;
    cert->add_option("--window", cert_window, "window JSON")->required()->check(CLI::ExistingFile);
    cert->add_option("--support", cert_support, "support measure JSON")->required()->check(CLI::ExistingFile);
    cert->add_option("--kind", cert_kind, "noiseless, noisy or q0")
        ->check(CLI::IsMember({"noiseless", "noisy", "q0"}));
    cert->add_option("--epsilon", cert_eps, "neighborhood half-width");
    cert->add_option("--signs", cert_signs, "comma-separated +1/-1 pattern for q0");
    cert->add_option("--grid", cert_grid, "verification and heat-map resolution")->check(CLI::Range(2, 8192));

    // tcheck
    auto* tc = app.add_subcommand("tcheck", "numerical T-system / T*-system checks");
    std::string tc_window, tc_mode = "tsystem", tc_pattern;
    int tc_trials = 1000;
    tc->add_option("--window", tc_window, "window JSON")->required()->check(CLI::ExistingFile);
    tc->add_option("--mode", tc_mode, "tsystem or tstar")->check(CLI::IsMember({"tsystem", "tstar"}));
    tc->add_option("--trials", tc_trials, "random sequences for tsystem")->check(CLI::PositiveNumber);
    tc->add_option("--pattern", tc_pattern, "limit pattern JSON for tstar")->check(CLI::ExistingFile);

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "synthesize, observe, recover and score one scenario");

    // sweep
    auto* sw = app.add_subcommand("sweep", "run a scenario across values of one parameter");
    std::string sw_axis, sw_values;
    sw->add_option("--axis", sw_axis, "delta, epsilon, M or sep (default: config 'sweep.axis')");
    sw->add_option("--values", sw_values, "comma-separated values (default: config 'sweep.values')");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }
    if (*seed_opt) g.seed = seed_value;

    try {
        if (*fwd) {
            Window w = Window::gaussian_uniform(5, 0.2);
            AtomicMeasure x;
            double delta = fwd_delta;
            std::uint64_t seed = g.seed.value_or(0);
            if (!g.config.empty()) {
                Scenario sc = load_scenario(g);
                w = sc.window;
                x = sc.truth ? *sc.truth : generate_truth(*sc.generator, sc.grid_n);
                if (fwd->count("--delta") == 0) delta = sc.delta;
                seed = sc.noise_seed;
            } else {
                if (fwd_window.empty() || fwd_truth.empty())
                    throw ConfigError("forward needs --window and --truth, or --config");
                w = window_from_json(read_json_file(fwd_window));
                x = measure_from_json(read_json_file(fwd_truth));
            }
            Observation obs = add_noise(forward(w, x), delta, seed);
            fs::path dir = out_dir(g);
            write_observation(dir / "y.csv", obs);
            std::cout << json{{"y", (dir / "y.csv").string()}, {"delta", obs.delta}, {"M", w.size()}}.dump() << '\n';
            return kOk;
        }

        if (*rec) {
            Window w = window_from_json(read_json_file(rec_window));
            Observation obs = read_observation(rec_obs);
            if (obs.y.rows() != w.size())
                throw ConfigError("observation is " + std::to_string(obs.y.rows()) + "x" +
                                  std::to_string(obs.y.cols()) + " but the window has " +
                                  std::to_string(w.size()) + " functions");
            double deltap = rec_deltap.value_or(std::max(obs.delta, 1e-8));
            if (!(deltap >= 0)) throw ConfigError("--deltap must be nonnegative");
            RecoveryResult r = recover(w, obs, Grid{rec_grid}, deltap, rec_floor);
            json xhat = measure_to_json(r.extracted);
            xhat["residual"] = r.residual;
            xhat["converged"] = r.converged;
            xhat["iterations"] = r.iterations;
            xhat["deltap"] = deltap;
            xhat["grid_n"] = rec_grid;
            fs::path file = g.out.empty() ? fs::path("xhat.json") : fs::path(g.out);
            if (file.has_parent_path()) fs::create_directories(file.parent_path());
            write_json_file(file, xhat);
            std::cout << json{{"xhat", file.string()},
                              {"atoms", r.extracted.size()},
                              {"residual", r.residual},
                              {"converged", r.converged}}
                             .dump()
                      << '\n';
            return r.converged ? kOk : kNotConverged;
        }

        if (*dist) {
            AtomicMeasure a = measure_from_json(read_json_file(dist_a));
            AtomicMeasure b = measure_from_json(read_json_file(dist_b));
            TransportResult t = gen_wasserstein(a, b, {parse_ground_norm(dist_norm), LpSolver::Auto});
            json j{{"d_gw", t.distance},
                   {"transported_mass", t.plan.transported_mass()},
                   {"destroyed", t.plan.destroyed.sum()},
                   {"created", t.plan.created.sum()}};
            emit(j, g.out.empty() ? std::nullopt : std::optional<fs::path>(g.out));
            return kOk;
        }

        if (*cert) {
            Window w = window_from_json(read_json_file(cert_window));
            AtomicMeasure sup = measure_from_json(read_json_file(cert_support));
            CertificateOptions opts;
            opts.grid = cert_grid;
            opts.throw_on_failure = false;
            Certificate c;
            if (cert_kind == "noiseless") {
                c = assemble_Q_noiseless(w, sup, opts);
            } else if (cert_kind == "noisy") {
                c = assemble_Q_noisy(w, sup, cert_eps, opts);
            } else {
                std::vector<int> signs;
                if (cert_signs.empty())
                    signs.assign(sup.size(), 1);
                else
                    for (double s : parse_list(cert_signs)) signs.push_back(static_cast<int>(s));
                c = assemble_Q0(w, sup, cert_eps, signs, opts);
            }
            fs::path dir = out_dir(g);
            json report = certificate_summary(c);
            report["message"] = c.report.message;
            report["grid"] = c.report.grid;
            if (!c.report.passed) report["worst"] = {{"t", c.report.worst.t}, {"s", c.report.worst.s}};
            write_matrix_csv(dir / "b.csv", c.b);
            write_json_file(dir / "report.json", report);
            write_matrix_csv(dir / "heatmap.csv", c.grid_values(w, cert_grid));
            std::cout << report.dump(2) << '\n';
            return c.report.passed ? kOk : kCertificate;
        }

        if (*tc) {
            Window w = window_from_json(read_json_file(tc_window));
            json report;
            bool passed = false;
            if (tc_mode == "tsystem") {
                TsystemReport r = check_tsystem(w, tc_trials, g.seed.value_or(0));
                report = tsystem_json(r);
                passed = r.passed;
            } else {
                if (tc_pattern.empty()) throw ConfigError("tstar mode needs --pattern");
                json p = read_json_file(tc_pattern);
                std::vector<LimitPoint> limits;
                int singleton = 0;
                double h0 = 0.05;
                std::vector<int> n_values{4, 8, 16, 32};
                PlateauTarget F;
                try {
                    for (const json& l : p.at("limits"))
                        limits.push_back({l.at("point").get<double>(), l.at("multiplicity").get<int>()});
                    singleton = p.at("singleton").get<int>();
                    h0 = p.value("h0", h0);
                    n_values = p.value("n_values", n_values);
                    F = target_from_json(p.at("target"));
                } catch (const json::exception& e) {
                    throw ConfigError(std::string("pattern: ") + e.what());
                }
                AdmissibleSequence seq = make_admissible(limits, singleton, w.size(), h0);
                TstarReport r = check_tstar(F, w, seq, n_values);
                report = tstar_json(r);
                passed = r.passed;
            }
            emit(report, g.out.empty() ? std::nullopt : std::optional<fs::path>(out_dir(g) / "tcheck.json"));
            return passed ? kOk : kCertificate;
        }

        if (*pipe) {
            Scenario sc = load_scenario(g);
            PipelineOutcome o = run_pipeline(sc, out_dir(g));
            std::cout << o.report.dump(2) << '\n';
            return o.certificate_failed ? kCertificate : kOk;
        }

        if (*sw) {
            Scenario sc = load_scenario(g);
            json cfg = read_json_file(g.config);
            std::string axis = sw_axis;
            std::vector<double> values;
            if (!sw_values.empty()) values = parse_list(sw_values);
            if (cfg.contains("sweep")) {
                try {
                    if (axis.empty()) axis = cfg["sweep"].value("axis", std::string());
                    if (values.empty()) values = cfg["sweep"].value("values", std::vector<double>{});
                } catch (const json::exception& e) {
                    throw ConfigError(std::string("sweep: ") + e.what());
                }
            }
            if (axis.empty()) throw ConfigError("sweep needs --axis or sweep.axis in the config");
            std::vector<SweepRow> rows = run_sweep(sc, axis, values, g.jobs);
            fs::path dir = out_dir(g);
            write_sweep_csv(dir / "sweep.csv", rows);
            json summary = json::array();
            for (const SweepRow& r : rows)
                summary.push_back({{"value", r.value},
                                   {"d_gw_mean", r.runs ? json(r.d_gw_mean) : json(nullptr)},
                                   {"runs", r.runs},
                                   {"failed", r.failed}});
            std::cout << json{{"axis", axis}, {"csv", (dir / "sweep.csv").string()}, {"rows", summary}}.dump(2)
                      << '\n';
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "sres: " << e.what() << '\n';
        return kConfig;
    } catch (const CertificateError& e) {
        std::cerr << "sres: " << e.what() << '\n';
        return kCertificate;
    } catch (const Error& e) {
        // remaining library errors come from inputs that violate an operation's preconditions
        std::cerr << "sres: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "sres: " << e.what() << '\n';
        return 1;
    }
    return kOk;
}
