#include "sres/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "sres/certificates.hpp"
#include "sres/transport.hpp"

namespace sres {

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string deltap_mode_name(DeltapMode m) {
    switch (m) {
    case DeltapMode::Explicit: return "explicit";
    case DeltapMode::Additive: return "additive";
    case DeltapMode::Multiplicative: return "multiplicative";
    }
    return "additive";
}

}  // namespace

json certificate_summary(const Certificate& c) {
    json m = json::object();
    for (const auto& [k, v] : c.report.metrics) m[k] = number_or_null(v);
    json j{{"kind", to_string(c.kind)},
           {"construction", c.report.construction},
           {"passed", c.report.passed},
           {"b_norm", c.b.norm()},
           {"gbar", c.gbar},
           {"metrics", m}};
    if (!c.signs.empty()) j["signs"] = c.signs;
    return j;
}

AtomicMeasure generate_truth(const TruthGenerator& gen, int grid_n) {
    const int K = gen.K;
    const double f = gen.sep_floor;
    if (K < 0) throw ConfigError("generator: K must be nonnegative");
    if (K == 0) return AtomicMeasure();
    if (!(f > 0) || static_cast<double>(K + 1) * f >= 1.0)
        throw ConfigError("generator: cannot place K atoms with the requested separation");
    if (!(gen.weight_min > 0) || gen.weight_max < gen.weight_min)
        throw ConfigError("generator: weight range must satisfy 0 < min <= max");
    std::mt19937_64 rng(gen.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double h = 1.0 / (grid_n - 1);
    // slack for snapping onto the grid
    const double pad = gen.on_grid ? h : 0.0;
    auto axis = [&]() {
        double span = 1.0 - (K + 1) * (f + pad);
        std::vector<double> v(K);
        for (double& x : v) x = unif(rng) * span;
        std::sort(v.begin(), v.end());
        for (int i = 0; i < K; ++i) {
            v[i] += (f + pad) * (i + 1);
            if (gen.on_grid) v[i] = std::round(v[i] / h) * h;
        }
        return v;
    };
    std::vector<double> ts = axis(), ss = axis();
    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = K - 1; i > 0; --i) {
        int j = static_cast<int>(unif(rng) * (i + 1));
        std::swap(perm[i], perm[std::min(j, i)]);
    }
    std::vector<Atom> atoms;
    for (int i = 0; i < K; ++i) {
        double w = gen.weight_min + (gen.weight_max - gen.weight_min) * unif(rng);
        atoms.push_back({{ts[i], ss[perm[i]]}, w});
    }
    return AtomicMeasure(std::move(atoms));
}

Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir) {
    Scenario sc;
    try {
        auto resolve = [&](const json& v) -> json {
            if (v.is_string()) {
                std::filesystem::path p = v.get<std::string>();
                if (p.is_relative()) p = base_dir / p;
                return read_json_file(p);
            }
            return v;
        };
        sc.window_config = resolve(j.at("window"));
        sc.window = window_from_json(sc.window_config);
        if (j.contains("truth")) sc.truth = measure_from_json(resolve(j.at("truth")));
        if (j.contains("generator")) {
            const json& g = j.at("generator");
            TruthGenerator gen;
            gen.K = g.value("K", 1);
            gen.sep_floor = g.value("sep_floor", 0.1);
            gen.weight_min = g.value("weight_min", 0.5);
            gen.weight_max = g.value("weight_max", 2.0);
            gen.seed = g.value("seed", std::uint64_t{0});
            gen.on_grid = g.value("on_grid", false);
            sc.generator = gen;
        }
        if (sc.truth && sc.generator) throw ConfigError("scenario: give either truth or generator, not both");
        if (!sc.truth && !sc.generator) throw ConfigError("scenario: missing truth or generator");
        sc.delta = j.value("delta", 0.0);
        sc.noise_seed = j.value("noise_seed", std::uint64_t{0});
        sc.grid_n = j.value("grid_n", 256);
        if (j.contains("deltap")) {
            const json& d = j.at("deltap");
            if (d.is_number()) {
                sc.deltap_mode = DeltapMode::Explicit;
                sc.deltap_value = d.get<double>();
            } else {
                std::string rule = d.value("rule", std::string("additive"));
                if (rule == "explicit")
                    sc.deltap_mode = DeltapMode::Explicit;
                else if (rule == "additive")
                    sc.deltap_mode = DeltapMode::Additive;
                else if (rule == "multiplicative")
                    sc.deltap_mode = DeltapMode::Multiplicative;
                else
                    throw ConfigError("scenario: unknown deltap rule '" + rule + "'");
                sc.deltap_value = d.value("value", 0.0);
                sc.deltap_floor = d.value("floor", sc.deltap_floor);
            }
        }
        sc.K = j.value("K", 0);
        sc.eps = j.value("epsilon", 0.1);
        sc.lambda = j.value("lambda", 1.5);
        sc.certificates = j.value("certificates", false);
        sc.ground_norm = parse_ground_norm(j.value("ground_norm", std::string("l2")));
        sc.mass_floor = j.value("mass_floor", 1e-6);
        sc.repeats = j.value("repeats", 1);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    if (!(sc.delta >= 0)) throw ConfigError("scenario: delta must be nonnegative");
    if (sc.grid_n < 2) throw ConfigError("scenario: grid_n must be >= 2");
    if (!(sc.eps > 0 && sc.eps <= 0.5)) throw ConfigError("scenario: epsilon must lie in (0, 1/2]");
    if (!(sc.lambda > 1)) throw ConfigError("scenario: lambda must exceed 1");
    if (sc.repeats < 1) throw ConfigError("scenario: repeats must be >= 1");
    if (sc.deltap_mode == DeltapMode::Explicit && !(sc.deltap_value >= sc.delta))
        throw ConfigError("scenario: explicit deltap must be at least delta");
    return sc;
}

json scenario_to_json(const Scenario& sc) {
    json j;
    j["window"] = sc.window_config.is_null() ? window_to_json(sc.window) : sc.window_config;
    if (sc.truth) j["truth"] = measure_to_json(*sc.truth);
    if (sc.generator) {
        const TruthGenerator& g = *sc.generator;
        j["generator"] = {{"K", g.K},          {"sep_floor", g.sep_floor}, {"weight_min", g.weight_min},
                          {"weight_max", g.weight_max}, {"seed", g.seed},  {"on_grid", g.on_grid}};
    }
    j["delta"] = sc.delta;
    j["noise_seed"] = sc.noise_seed;
    j["grid_n"] = sc.grid_n;
    j["deltap"] = {{"rule", deltap_mode_name(sc.deltap_mode)}, {"value", sc.deltap_value}, {"floor", sc.deltap_floor}};
    j["K"] = sc.K;
    j["epsilon"] = sc.eps;
    j["lambda"] = sc.lambda;
    j["certificates"] = sc.certificates;
    j["ground_norm"] = to_string(sc.ground_norm);
    j["mass_floor"] = sc.mass_floor;
    j["repeats"] = sc.repeats;
    return j;
}

PipelineOutcome run_pipeline(const Scenario& sc, const std::optional<std::filesystem::path>& out_dir) {
    PipelineOutcome out;
    out.truth = sc.truth ? *sc.truth : generate_truth(*sc.generator, sc.grid_n);
    const AtomicMeasure& x = out.truth;
    const Window& w = sc.window;

    out.observation = add_noise(forward(w, x), sc.delta, sc.noise_seed);
    const double L = lipschitz(w);
    const int K = sc.K > 0 ? sc.K : std::max<int>(1, static_cast<int>(x.size()));
    SparseApprox approx = approximate_sparse(x, K, sc.eps, sc.lambda, sc.ground_norm);
    const double R = approx.residual;

    double deltap = sc.deltap_value;
    if (sc.deltap_mode == DeltapMode::Additive)
        deltap = choose_deltap(sc.delta, L, R, DeltapRule::Additive);
    else if (sc.deltap_mode == DeltapMode::Multiplicative)
        deltap = choose_deltap(sc.delta, L, R, DeltapRule::Multiplicative);
    deltap = std::max(deltap, sc.deltap_floor);

    Grid grid{sc.grid_n};
    RecoveryResult rec = recover(w, out.observation, grid, deltap, sc.mass_floor);
    out.estimate = rec.extracted;
    const double dgw = gw_distance(x, out.estimate, sc.ground_norm);
    const double tv = tv_norm(x);
    const double grid_bound = 2 * grid.h() * tv + 1e-4;

    json& r = out.report;
    r["d_gw"] = dgw;
    r["residual"] = rec.residual;
    r["converged"] = rec.converged;
    r["iterations"] = rec.iterations;
    r["delta"] = sc.delta;
    r["deltap"] = deltap;
    r["deltap_rule"] = deltap_mode_name(sc.deltap_mode);
    r["sep"] = (!x.empty() && x.interior()) ? json(sep(x)) : json(nullptr);
    r["R"] = R;
    r["R_certified"] = approx.certified;
    r["L"] = L;
    r["K"] = K;
    r["epsilon"] = sc.eps;
    r["ground_norm"] = to_string(sc.ground_norm);
    r["grid_n"] = sc.grid_n;
    r["tv_truth"] = tv;
    r["atoms_truth"] = x.size();
    r["atoms_estimate"] = out.estimate.size();
    r["grid_bound"] = grid_bound;
    r["c1"] = nullptr;
    r["c2"] = nullptr;
    r["c3"] = nullptr;
    r["theorem_rhs"] = nullptr;
    r["bound_satisfied"] = nullptr;

    bool certified = false;
    if (sc.certificates) {
        json cj;
        const AtomicMeasure& sup = approx.measure;
        const int Ks = static_cast<int>(sup.size());
        if (Ks == 0) {
            cj["status"] = "skipped";
            cj["reason"] = "empty sparse approximation";
        } else if (w.size() < 2 * Ks + 2) {
            cj["status"] = "skipped";
            cj["reason"] = "window needs at least 2K+2 functions";
        } else {
            try {
                Certificate Q = assemble_Q_noisy(w, sup, sc.eps);
                std::vector<int> signs = neighborhood_signs(out.estimate, sup, sc.eps);
                Certificate Q0 = assemble_Q0(w, sup, sc.eps, signs);
                ErrorConstants ec = error_constants(Q, Q0, L, tv_norm(sup));
                // the recovery bounds need |Phi(xhat) - y| <= deltap; use the
                // smallest radius that covers both xhat and the approximation
                double res_hat = (forward(w, out.estimate) - out.observation.y).norm();
                double res_apx = (forward(w, sup) - out.observation.y).norm();
                double radius = std::max({deltap, res_hat, res_apx});
                BoundsCheck bc = error_bounds_check(out.estimate, sup, sc.eps, Q, Q0, radius);
                double rhs = ec.c1 * sc.delta + ec.c2 * sc.eps + ec.c3 * R;
                cj["status"] = "verified";
                cj["Q"] = certificate_summary(Q);
                cj["Q0"] = certificate_summary(Q0);
                cj["mass_bound_coeff"] = ec.mass_bound_coeff;
                cj["bounds_check"] = {{"radius", radius},
                                      {"estimate_residual", res_hat},
                                      {"approx_residual", res_apx},
                                      {"off_lhs", bc.off_lhs},
                                      {"off_bound", bc.off_bound},
                                      {"off_slack", bc.off_slack},
                                      {"near_lhs", bc.near_lhs},
                                      {"near_bound", bc.near_bound},
                                      {"near_slack", bc.near_slack},
                                      {"passed", bc.passed}};
                r["c1"] = ec.c1;
                r["c2"] = ec.c2;
                r["c3"] = ec.c3;
                r["theorem_rhs"] = rhs;
                r["bound_satisfied"] = dgw <= rhs;
                certified = true;
            } catch (const CertificateError& e) {
                cj["status"] = "failed";
                cj["reason"] = e.what();
                out.certificate_failed = true;
            }
        }
        r["certificates"] = cj;
    }
    if (!certified && sc.delta == 0.0 && R == 0.0) r["bound_satisfied"] = dgw <= grid_bound;

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        write_observation(*out_dir / "y.csv", out.observation);
        write_json_file(*out_dir / "xhat.json", measure_to_json(out.estimate));
        write_json_file(*out_dir / "report.json", r);
    }
    return out;
}

std::vector<SweepRow> run_sweep(const Scenario& base, const std::string& axis, const std::vector<double>& values,
                                int jobs) {
    if (values.empty()) throw ConfigError("sweep: no values");
    if (axis != "delta" && axis != "epsilon" && axis != "M" && axis != "sep")
        throw ConfigError("sweep: unknown axis '" + axis + "' (expected delta, epsilon, M or sep)");
    if (axis == "sep" && !base.generator) throw ConfigError("sweep: the sep axis needs a truth generator");
    if (axis == "M" && base.window.kind() != Window::Kind::Gaussian)
        throw ConfigError("sweep: the M axis needs a Gaussian window");

    struct Task {
        std::size_t row;
        Scenario sc;
    };
    std::vector<Task> tasks;
    std::vector<SweepRow> rows(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        rows[i].value = v;
        for (int rep = 0; rep < base.repeats; ++rep) {
            Scenario sc = base;
            sc.noise_seed = base.noise_seed + rep;
            if (sc.generator) sc.generator->seed = base.generator->seed + rep;
            try {
                if (axis == "delta") {
                    sc.delta = v;
                } else if (axis == "epsilon") {
                    sc.eps = v;
                } else if (axis == "sep") {
                    sc.generator->sep_floor = v;
                } else {
                    int M = static_cast<int>(std::lround(v));
                    sc.window = Window::gaussian_uniform(M, base.window.sigma());
                    sc.window_config = window_to_json(sc.window);
                }
            } catch (const Error& e) {
                rows[i].error = e.what();
                continue;
            }
            tasks.push_back({i, std::move(sc)});
        }
    }

    struct Result {
        bool ok = false;
        double dgw = 0, residual = 0, rhs = std::numeric_limits<double>::quiet_NaN();
        bool bound = true;
        std::string error;
    };
    std::vector<Result> results(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
            try {
                PipelineOutcome o = run_pipeline(tasks[k].sc);
                results[k].ok = true;
                results[k].dgw = o.report["d_gw"].get<double>();
                results[k].residual = o.report["residual"].get<double>();
                if (o.report["theorem_rhs"].is_number()) results[k].rhs = o.report["theorem_rhs"].get<double>();
                if (o.report["bound_satisfied"].is_boolean()) results[k].bound = o.report["bound_satisfied"].get<bool>();
            } catch (const std::exception& e) {
                results[k].error = e.what();
            }
        }
    };
    const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (std::size_t k = 0; k < tasks.size(); ++k) {
        SweepRow& row = rows[tasks[k].row];
        const Result& res = results[k];
        if (!res.ok) {
            ++row.failed;
            if (row.error.empty()) row.error = res.error;
            continue;
        }
        ++row.runs;
        row.d_gw.push_back(res.dgw);
        row.residual += res.residual;
        row.theorem_rhs += res.rhs;
        row.bound_satisfied = row.bound_satisfied && res.bound;
    }
    for (SweepRow& row : rows) {
        if (row.runs == 0) {
            row.d_gw_mean = row.d_gw_max = row.residual = row.theorem_rhs = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        row.d_gw_mean = std::accumulate(row.d_gw.begin(), row.d_gw.end(), 0.0) / row.runs;
        row.d_gw_max = *std::max_element(row.d_gw.begin(), row.d_gw.end());
        row.residual /= row.runs;
        row.theorem_rhs /= row.runs;
    }
    return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::FILE* f = std::fopen(path.string().c_str(), "w");
    if (!f) throw Error("cannot write " + path.string());
    std::fprintf(f, "value,d_gw_mean,d_gw_max,residual,theorem_rhs,runs,failed,bound_satisfied,error\n");
    for (const SweepRow& r : rows) {
        std::string err = r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,%d,%s\n", r.value, r.d_gw_mean, r.d_gw_max, r.residual,
                     r.theorem_rhs, r.runs, r.failed, r.bound_satisfied ? 1 : 0, err.c_str());
    }
    std::fclose(f);
}

}  // namespace sres
