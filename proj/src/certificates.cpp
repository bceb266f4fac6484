#include "sres/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "sres/lsi.hpp"

namespace sres {

namespace {

constexpr double kEdgeProbe = 1e-9;

std::vector<double> uniform(int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? 0.5 : static_cast<double>(i) / (n - 1);
    return v;
}

double dist_to_set(double t, const std::vector<double>& pts) {
    double d = std::numeric_limits<double>::infinity();
    for (double p : pts) d = std::min(d, std::abs(t - p));
    return d;
}

void sort_unique(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(), [](double a, double b) { return std::abs(a - b) < 1e-15; }), v.end());
}

// Minimum-norm solution of E x = f; throws when the system is inconsistent.
Eigen::VectorXd min_norm_solve(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, const char* what) {
    LsiResult r = min_norm_lsi(E, f, Eigen::MatrixXd(0, E.cols()), Eigen::VectorXd(0));
    if (!r.feasible) throw CertificateError(std::string(what) + ": interpolation conditions are inconsistent",
                                            {{"equality_residual", r.equality_residual}});
    return r.x;
}

struct Slack {
    double min = std::numeric_limits<double>::infinity();
    double at = 0.0;
};

Slack univariate_slack(const Window& w, const Eigen::VectorXd& coef, const PlateauTarget& F,
                       const std::vector<double>& ts) {
    Slack s;
    Eigen::VectorXd q = w.collocation(ts) * coef;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        double d = q(i) - F.value(ts[i]);
        if (d < s.min) {
            s.min = d;
            s.at = ts[i];
        }
    }
    return s;
}

std::vector<double> edges_of(const PlateauTarget& F) {
    std::vector<double> e;
    for (double c : F.centers)
        for (double p : {c - F.halfwidth, c + F.halfwidth})
            if (p >= 0.0 && p <= 1.0) e.push_back(p);
    return e;
}

Eigen::MatrixXd hermite_rows(const Window& w, const std::vector<double>& nodes) {
    const int M = w.size();
    Eigen::MatrixXd E(2 * nodes.size(), M);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        E.row(2 * j) = w.column(nodes[j]).transpose();
        E.row(2 * j + 1) = w.deriv_column(nodes[j]).transpose();
    }
    return E;
}

// Row of the M^2 coefficient vector (index m*M + n) evaluating
// d^a/dt^a d^c/ds^c Q at p.
Eigen::RowVectorXd tensor_row(const Window& w, Point p, bool dt, bool ds) {
    Eigen::VectorXd ct = dt ? w.deriv_column(p.t) : w.column(p.t);
    Eigen::VectorXd cs = ds ? w.deriv_column(p.s) : w.column(p.s);
    const int M = w.size();
    Eigen::RowVectorXd r(M * M);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < M; ++n) r(m * M + n) = ct(m) * cs(n);
    return r;
}

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, int M) {
    Eigen::MatrixXd b(M, M);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < M; ++n) b(m, n) = v(m * M + n);
    return b;
}

double inf_dist(Point a, Point b) { return std::max(std::abs(a.t - b.t), std::abs(a.s - b.s)); }

// largest value of a piecewise-constant target in a tiny neighborhood of p
double upper9(const std::function<double(Point)>& g, Point p) {
    double v = -std::numeric_limits<double>::infinity();
    for (double dt : {-kEdgeProbe, 0.0, kEdgeProbe})
        for (double ds : {-kEdgeProbe, 0.0, kEdgeProbe}) v = std::max(v, g({p.t + dt, p.s + ds}));
    return v;
}

struct Support {
    std::vector<double> T, S;
    std::vector<Point> pts;
    int K = 0;
};

Support unpack(const AtomicMeasure& support) {
    Support s;
    s.T = support.t_coords();
    s.S = support.s_coords();
    for (const Atom& a : support.atoms()) s.pts.push_back(a.loc);
    s.K = static_cast<int>(support.size());
    return s;
}

void check_support(const Window& w, const AtomicMeasure& support, int min_M, double eps) {
    if (support.size() > 12) throw Error("certificate: at most 12 support atoms");
    if (!support.interior()) throw Error("certificate: support must lie in the interior");
    if (w.size() < min_M)
        throw Error("certificate: window has " + std::to_string(w.size()) + " functions, need at least " +
                    std::to_string(min_M));
    if (eps > 0 && !support.empty() && sep(support) < eps * (1 - 1e-12))
        throw Error("certificate: support separation is below eps");
}

void finish(Certificate& c, const char* what, bool throw_on_failure) {
    if (c.report.passed || !throw_on_failure) return;
    std::ostringstream os;
    os << what << " verification failed (" << c.report.message << ") at (" << c.report.worst.t << ", "
       << c.report.worst.s << ")";
    auto detail = c.report.metrics;
    detail["worst_t"] = c.report.worst.t;
    detail["worst_s"] = c.report.worst.s;
    throw CertificateError(os.str(), detail);
}

// Two-variable certificate: min |b|_F with prescribed values and vanishing
// gradients on the support and Q >= lower elsewhere, by constraint exchange
// against the verification grid.
Eigen::MatrixXd bivariate_certificate(const Window& w, const Support& sup, const std::vector<double>& values,
                                      const std::function<double(Point)>& lower_bound, double eps, int grid,
                                      double envelope, const std::vector<std::pair<Point, double>>& extra_pins = {}) {
    const int M = w.size(), nb = M * M;
    // value plus vanishing gradient at every pinned point: each is a touching minimum of Q - target
    std::vector<std::pair<Point, double>> pins;
    for (int k = 0; k < sup.K; ++k) pins.emplace_back(sup.pts[k], values[k]);
    pins.insert(pins.end(), extra_pins.begin(), extra_pins.end());
    const int np = static_cast<int>(pins.size());
    Eigen::MatrixXd E(3 * np, nb);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(3 * np);
    for (int k = 0; k < np; ++k) {
        E.row(3 * k) = tensor_row(w, pins[k].first, false, false);
        E.row(3 * k + 1) = tensor_row(w, pins[k].first, true, false);
        E.row(3 * k + 2) = tensor_row(w, pins[k].first, false, true);
        f(3 * k) = pins[k].second;
    }
    auto lift = [&](Point p) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& pin : pins) d = std::min(d, inf_dist(p, pin.first));
        if (d < 1e-9) return -1.0;
        return envelope * std::min(1.0, (d / eps) * (d / eps));
    };
    auto lower = [&](Point p) {
        double e = lift(p);
        return e < 0 ? -std::numeric_limits<double>::infinity() : lower_bound(p) + e;
    };

    std::vector<double> taxis = uniform(65), saxis = uniform(65);
    for (int k = 0; k < sup.K; ++k)
        for (double o : {-eps, eps, -eps / 2, eps / 2}) {
            if (sup.T[k] + o >= 0 && sup.T[k] + o <= 1) taxis.push_back(sup.T[k] + o);
            if (sup.S[k] + o >= 0 && sup.S[k] + o <= 1) saxis.push_back(sup.S[k] + o);
        }
    sort_unique(taxis);
    sort_unique(saxis);
    std::vector<Point> cons;
    for (double t : taxis)
        for (double s : saxis) cons.push_back({t, s});

    const std::vector<double> vaxis = uniform(grid);
    const Eigen::MatrixXd P = w.collocation(vaxis);
    Eigen::VectorXd best;
    for (int round = 0; round < 20; ++round) {
        std::vector<Point> active;
        std::vector<double> rhs;
        for (const Point& p : cons) {
            double lo = lower(p);
            if (std::isfinite(lo)) {
                active.push_back(p);
                rhs.push_back(lo);
            }
        }
        Eigen::MatrixXd G(active.size(), nb);
        Eigen::VectorXd h(active.size());
        for (std::size_t i = 0; i < active.size(); ++i) {
            G.row(i) = tensor_row(w, active[i], false, false);
            h(i) = rhs[i];
        }
        LsiResult r = min_norm_lsi(E, f, G, h);
        if (!r.feasible) break;
        best = r.x;
        Eigen::MatrixXd V = P * unvec(r.x, M) * P.transpose();
        std::vector<std::pair<double, Point>> bad;
        for (int i = 0; i < grid; ++i)
            for (int l = 0; l < grid; ++l) {
                Point p{vaxis[i], vaxis[l]};
                double e = lift(p);
                if (e < 0) continue;
                double headroom = V(i, l) - lower_bound(p);
                if (headroom < 0.5 * e) bad.emplace_back(headroom, p);
            }
        if (bad.empty()) break;
        std::sort(bad.begin(), bad.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        if (bad.size() > 4000) bad.resize(4000);
        for (const auto& [v, p] : bad) cons.push_back(p);
    }
    if (best.size() == 0) throw CertificateError("bivariate certificate: constraint system is infeasible", {});
    return unvec(best, M);
}

}  // namespace

double PlateauTarget::value(double t) const {
    for (double c : centers)
        if (std::abs(t - c) <= halfwidth) return inside;
    return outside;
}

double PlateauTarget::upper(double t) const {
    return std::max({value(t), value(t - kEdgeProbe), value(t + kEdgeProbe)});
}

PlateauTarget zero_plateau(const std::vector<double>& coords, const std::vector<int>& chosen, double eps) {
    PlateauTarget F;
    for (int k : chosen) F.centers.push_back(coords.at(k));
    F.halfwidth = eps;
    F.inside = 0.0;
    F.outside = 1.0;
    return F;
}

PlateauTarget bump_plateau(const std::vector<double>& coords, int k, double sign, double eps) {
    PlateauTarget F;
    F.centers.push_back(coords.at(k));
    F.halfwidth = eps;
    F.inside = sign;
    F.outside = 0.0;
    return F;
}

UnivariatePoly univariate_vanishing(const Window& w, const std::vector<double>& zeros, double anchor,
                                    int verify_points) {
    const int M = w.size();
    const int nz = static_cast<int>(zeros.size());
    if (M < 2 * nz + 1)
        throw Error("univariate_vanishing: need at least " + std::to_string(2 * nz + 1) + " functions");
    if (anchor < 0) {
        std::vector<double> cand{0.0, 1.0};
        std::vector<double> z = zeros;
        std::sort(z.begin(), z.end());
        for (std::size_t i = 1; i < z.size(); ++i) cand.push_back(0.5 * (z[i - 1] + z[i]));
        if (z.empty()) cand = {0.5};
        anchor = cand[0];
        for (double c : cand)
            if (dist_to_set(c, zeros) > dist_to_set(anchor, zeros)) anchor = c;
    }
    if (dist_to_set(anchor, zeros) < 1e-12) throw Error("univariate_vanishing: anchor coincides with a zero");

    Eigen::MatrixXd E(2 * nz + 1, M);
    E.topRows(2 * nz) = hermite_rows(w, zeros);
    E.row(2 * nz) = w.column(anchor).transpose();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * nz + 1);
    f(2 * nz) = 1.0;
    UnivariatePoly q{min_norm_solve(E, f, "univariate_vanishing")};

    const std::vector<double> ts = uniform(verify_points);
    Eigen::VectorXd vals = w.collocation(ts) * q.coef;
    double gmin = std::numeric_limits<double>::infinity(), far_min = gmin, at = 0, far_at = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (vals(i) < gmin) {
            gmin = vals(i);
            at = ts[i];
        }
        if (dist_to_set(ts[i], zeros) > 1e-3 && vals(i) < far_min) {
            far_min = vals(i);
            far_at = ts[i];
        }
    }
    if (gmin < -1e-9)
        throw CertificateError("univariate_vanishing: polynomial is negative at t = " + std::to_string(at),
                               {{"t", at}, {"q", gmin}});
    if (!(far_min > 0))
        throw CertificateError("univariate_vanishing: unwanted zero at t = " + std::to_string(far_at),
                               {{"t", far_at}, {"q", far_min}});
    return q;
}

DominatingResult univariate_dominating(const Window& w, const std::vector<double>& nodes, const PlateauTarget& F,
                                       const DominatingOptions& opts) {
    const int M = w.size();
    const int K = static_cast<int>(nodes.size());
    if (M < 2 * K + 2)
        throw Error("univariate_dominating: need at least " + std::to_string(2 * K + 2) + " functions");

    const std::vector<double> vgrid = uniform(opts.verify_points);
    Eigen::MatrixXd Eeq = hermite_rows(w, nodes);
    Eigen::VectorXd feq = Eigen::VectorXd::Zero(2 * K);
    for (int j = 0; j < K; ++j) feq(2 * j) = F.value(nodes[j]);

    DominatingResult best;
    best.min_slack = -std::numeric_limits<double>::infinity();
    auto record = [&](const Eigen::VectorXd& coef, const std::string& rung, double eta) {
        Slack s = univariate_slack(w, coef, F, vgrid);
        Slack e = univariate_slack(w, coef, F, edges_of(F));
        if (e.min < s.min) s = e;
        if (s.min > best.min_slack) {
            best.poly.coef = coef;
            best.rung = rung;
            best.eta = eta;
            best.min_slack = s.min;
            best.worst_t = s.at;
        }
        return s.min >= -1e-9;
    };

    if (K == 0) {
        // constant-like: q(0) = q(1) = sup F + eta, minimum norm
        for (double eta : opts.margins) {
            Eigen::MatrixXd E(2, M);
            E.row(0) = w.column(0.0).transpose();
            E.row(1) = w.column(1.0).transpose();
            Eigen::VectorXd f = Eigen::VectorXd::Constant(2, F.sup() + eta);
            try {
                if (record(min_norm_solve(E, f, "univariate_dominating"), "hermite", eta)) return best;
            } catch (const CertificateError&) {
            }
        }
    }

    for (double eta : opts.margins) {
        if (K == 0) break;
        Eigen::MatrixXd E(2 * K + 2, M);
        E.topRows(2 * K) = Eeq;
        E.row(2 * K) = w.column(0.0).transpose();
        E.row(2 * K + 1) = w.column(1.0).transpose();
        Eigen::VectorXd f(2 * K + 2);
        f << feq, F.sup() + eta, F.sup() + eta;
        try {
            if (record(min_norm_solve(E, f, "univariate_dominating"), "hermite", eta)) return best;
        } catch (const CertificateError&) {
        }
    }

    // constrained rung: min |b| subject to the node conditions and
    // q >= F + envelope on a dense point set, refined by exchange
    const double scale = F.halfwidth > 0 ? F.halfwidth : 1.0;
    std::vector<double> cons = uniform(opts.constraint_points);
    for (double t : vgrid) cons.push_back(t);
    for (double t : uniform(512)) cons.push_back(t);
    for (double t : edges_of(F)) cons.push_back(t);
    sort_unique(cons);
    const std::vector<double> check = uniform(8 * opts.verify_points + 1);

    for (int round = 0; round <= opts.exchange_rounds; ++round) {
        std::vector<double> pts;
        for (double t : cons)
            if (dist_to_set(t, nodes) > 1e-9) pts.push_back(t);
        Eigen::MatrixXd G = w.collocation(pts);
        Eigen::VectorXd h(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double d = dist_to_set(pts[i], nodes) / scale;
            h(i) = F.upper(pts[i]) + opts.envelope * std::min(1.0, d * d);
        }
        LsiResult r = min_norm_lsi(Eeq, feq, G, h);
        if (!r.feasible) break;
        bool ok = record(r.x, "constrained", 0.0);
        Eigen::VectorXd q = w.collocation(check) * r.x;
        std::size_t added = 0;
        for (std::size_t i = 0; i < check.size(); ++i)
            if (q(i) - F.upper(check[i]) < 0 && dist_to_set(check[i], nodes) > 1e-9) {
                cons.push_back(check[i]);
                ++added;
            }
        if (ok && added == 0) return best;
        if (added == 0) break;
        sort_unique(cons);
    }

    std::ostringstream os;
    os << "univariate_dominating: q < F at t = " << best.worst_t << " (slack " << best.min_slack << ")";
    double qv = best.poly.coef.size() ? best.poly(w, best.worst_t) : std::numeric_limits<double>::quiet_NaN();
    throw CertificateError(os.str(), {{"t", best.worst_t}, {"q", qv}, {"F", F.value(best.worst_t)}});
}

double Certificate::eval_terms(const Window& w, Point p) const {
    double v = 0.0;
    Eigen::VectorXd ct = w.column(p.t), cs = w.column(p.s);
    for (const auto& [a, b] : terms) v += ct.dot(a) * cs.dot(b);
    return v;
}

Eigen::MatrixXd Certificate::grid_values(const Window& w, int n) const {
    Eigen::MatrixXd P = w.collocation(uniform(n));
    return P * b * P.transpose();
}

std::string to_string(Certificate::Kind kind) {
    switch (kind) {
    case Certificate::Kind::Noiseless: return "noiseless";
    case Certificate::Kind::Noisy: return "noisy";
    case Certificate::Kind::Q0: return "q0";
    }
    return "noiseless";
}

Certificate assemble_Q_noiseless(const Window& w, const AtomicMeasure& support, const CertificateOptions& opts) {
    const int K = static_cast<int>(support.size());
    check_support(w, support, 2 * K + 1, 0.0);
    Support sup = unpack(support);
    const int M = w.size();

    Certificate c;
    c.kind = Certificate::Kind::Noiseless;
    c.b = Eigen::MatrixXd::Zero(M, M);
    for (unsigned mask = 0; mask < (1u << K); ++mask) {
        std::vector<double> zt, zs;
        for (int k = 0; k < K; ++k) {
            if (mask >> k & 1u)
                zt.push_back(sup.T[k]);
            else
                zs.push_back(sup.S[k]);
        }
        UnivariatePoly qt = univariate_vanishing(w, zt, -1.0, opts.univariate.verify_points);
        UnivariatePoly qs = univariate_vanishing(w, zs, -1.0, opts.univariate.verify_points);
        c.b += qt.coef * qs.coef.transpose();
        c.terms.emplace_back(qt.coef, qs.coef);
    }

    VerificationReport& rep = c.report;
    rep.grid = opts.grid;
    rep.construction = "product";
    double supp_max = 0.0;
    for (const Point& p : sup.pts) supp_max = std::max(supp_max, std::abs(c.eval(w, p)));
    double cross_min = std::numeric_limits<double>::infinity();
    Point cross_at;
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < K; ++l) {
            if (k == l) continue;
            Point p{sup.T[k], sup.S[l]};
            double v = c.eval(w, p);
            if (v < cross_min) {
                cross_min = v;
                cross_at = p;
            }
        }
    const std::vector<double> axis = uniform(opts.grid);
    Eigen::MatrixXd V = c.grid_values(w, opts.grid);
    double far_min = std::numeric_limits<double>::infinity(), gmin = far_min;
    Point far_at;
    for (int i = 0; i < opts.grid; ++i)
        for (int l = 0; l < opts.grid; ++l) {
            Point p{axis[i], axis[l]};
            gmin = std::min(gmin, V(i, l));
            bool near = false;
            for (const Point& q : sup.pts) near = near || inf_dist(p, q) <= 1e-2;
            if (!near && V(i, l) < far_min) {
                far_min = V(i, l);
                far_at = p;
            }
        }
    rep.metrics["support_max_abs"] = supp_max;
    rep.metrics["grid_min"] = gmin;
    rep.metrics["far_min"] = far_min;
    if (K >= 2) rep.metrics["cross_min"] = cross_min;
    rep.metrics["terms"] = static_cast<double>(c.terms.size());
    rep.passed = true;
    if (supp_max > 1e-8) {
        rep.passed = false;
        rep.message = "nonzero on support";
    } else if (K >= 2 && !(cross_min > 0)) {
        rep.passed = false;
        rep.message = "zero at a cross point";
        rep.worst = cross_at;
    } else if (!(far_min > 0)) {
        rep.passed = false;
        rep.message = "nonpositive away from the support";
        rep.worst = far_at;
    }
    finish(c, "noiseless certificate", opts.throw_on_failure);
    return c;
}

namespace {

void verify_noisy(const Window& w, const Support& sup, double eps, Certificate& c, int grid) {
    VerificationReport& rep = c.report;
    rep.grid = grid;
    double supp_max = 0.0;
    for (const Point& p : sup.pts) supp_max = std::max(supp_max, std::abs(c.eval(w, p)));
    const std::vector<double> axis = uniform(grid);
    Eigen::MatrixXd V = c.grid_values(w, grid);
    std::vector<char> t_far(grid), s_far(grid);
    for (int i = 0; i < grid; ++i) {
        t_far[i] = dist_to_set(axis[i], sup.T) > eps;
        s_far[i] = dist_to_set(axis[i], sup.S) > eps;
    }
    const double inf = std::numeric_limits<double>::infinity();
    double near_min = inf, off_min = inf, far_min = inf;
    Point near_at, off_at, far_at;
    for (int i = 0; i < grid; ++i)
        for (int l = 0; l < grid; ++l) {
            Point p{axis[i], axis[l]};
            bool near = false;
            for (const Point& q : sup.pts) near = near || inf_dist(p, q) <= eps;
            double v = V(i, l);
            if (near) {
                if (v < near_min) near_min = v, near_at = p;
            } else {
                if (v < off_min) off_min = v, off_at = p;
                if (t_far[i] && s_far[l] && v < far_min) far_min = v, far_at = p;
            }
        }
    const double gbar = c.gbar, strong = std::ldexp(1.0, sup.K);
    rep.metrics["support_max_abs"] = supp_max;
    rep.metrics["near_min"] = near_min;
    rep.metrics["off_min"] = off_min;
    rep.metrics["far_min"] = far_min;
    rep.metrics["gbar"] = gbar;
    rep.passed = true;
    rep.message.clear();
    if (supp_max > 1e-8) {
        rep.passed = false;
        rep.message = "nonzero on support";
    } else if (near_min < -1e-8) {
        rep.passed = false;
        rep.message = "negative inside the neighborhoods";
        rep.worst = near_at;
    } else if (off_min < gbar * (1 - 1e-6)) {
        rep.passed = false;
        rep.message = "below gbar outside the neighborhoods";
        rep.worst = off_at;
    } else if (std::isfinite(far_min) && far_min < strong * (1 - 1e-6)) {
        rep.passed = false;
        rep.message = "below 2^K away from both coordinate bands";
        rep.worst = far_at;
    }
}

double g0_value(Point p, const Support& sup, const std::vector<int>& signs, double eps) {
    bool any = false;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < sup.K; ++k)
        if (inf_dist(p, sup.pts[k]) <= eps) {
            any = true;
            best = std::max(best, static_cast<double>(signs[k]));
        }
    return any ? best : 0.0;
}


void verify_q0(const Window& w, const Support& sup, double eps, Certificate& c, int grid) {
    VerificationReport& rep = c.report;
    rep.grid = grid;
    double supp_err = 0.0;
    for (int k = 0; k < sup.K; ++k) supp_err = std::max(supp_err, std::abs(c.eval(w, sup.pts[k]) - c.signs[k]));
    double cross_err = 0.0;
    for (int k = 0; k < sup.K; ++k)
        for (int l = 0; l < sup.K; ++l) {
            Point p{sup.T[k], sup.S[l]};
            cross_err = std::max(cross_err, std::abs(c.eval(w, p) - g0_value(p, sup, c.signs, eps)));
        }
    const std::vector<double> axis = uniform(grid);
    Eigen::MatrixXd V = c.grid_values(w, grid);
    double slack = std::numeric_limits<double>::infinity();
    Point at;
    for (int i = 0; i < grid; ++i)
        for (int l = 0; l < grid; ++l) {
            Point p{axis[i], axis[l]};
            double d = V(i, l) - g0_value(p, sup, c.signs, eps);
            if (d < slack) slack = d, at = p;
        }
    rep.metrics["support_max_err"] = supp_err;
    rep.metrics["cross_max_err"] = cross_err;
    rep.metrics["min_slack"] = slack;
    rep.passed = true;
    rep.message.clear();
    if (supp_err > 1e-8) {
        rep.passed = false;
        rep.message = "value on support differs from the sign pattern";
    } else if (slack < -1e-8) {
        rep.passed = false;
        rep.message = "below the target";
        rep.worst = at;
    }
}

}  // namespace

Certificate assemble_Q_noisy(const Window& w, const AtomicMeasure& support, double eps,
                             const CertificateOptions& opts) {
    const int K = static_cast<int>(support.size());
    check_support(w, support, 2 * K + 2, eps);
    Support sup = unpack(support);
    const int M = w.size();

    Certificate c;
    c.kind = Certificate::Kind::Noisy;
    c.gbar = std::ldexp(1.0, K - 2);
    c.b = Eigen::MatrixXd::Zero(M, M);
    std::string failure;
    try {
        for (unsigned mask = 0; mask < (1u << K); ++mask) {
            std::vector<int> om, rest;
            for (int k = 0; k < K; ++k) (mask >> k & 1u ? om : rest).push_back(k);
            DominatingResult qt = univariate_dominating(w, sup.T, zero_plateau(sup.T, om, eps), opts.univariate);
            DominatingResult qs = univariate_dominating(w, sup.S, zero_plateau(sup.S, rest, eps), opts.univariate);
            c.b += qt.poly.coef * qs.poly.coef.transpose();
            c.terms.emplace_back(qt.poly.coef, qs.poly.coef);
        }
        c.report.construction = "product";
        verify_noisy(w, sup, eps, c, opts.grid);
    } catch (const CertificateError& e) {
        failure = e.what();
        c.report.passed = false;
    }

    if (!c.report.passed && opts.allow_bivariate) {
        double product_off = c.report.metrics.count("off_min") ? c.report.metrics["off_min"] : -1.0;
        const double gbar = c.gbar, strong = std::ldexp(1.0, K);
        auto target = [&](Point p) {
            for (const Point& x : sup.pts)
                if (inf_dist(p, x) <= eps) return 0.0;
            bool tf = dist_to_set(p.t, sup.T) > eps, sf = dist_to_set(p.s, sup.S) > eps;
            return tf && sf ? strong : gbar;
        };
        auto lower = [&](Point p) { return upper9(target, p); };
        c.b = bivariate_certificate(w, sup, std::vector<double>(K, 0.0), lower, eps, opts.grid,
                                    opts.univariate.envelope);
        c.terms.clear();
        c.report = {};
        c.report.construction = "bivariate";
        verify_noisy(w, sup, eps, c, opts.grid);
        c.report.metrics["product_off_min"] = product_off;
        if (!failure.empty()) c.report.message += (c.report.message.empty() ? "" : "; ") + std::string("product: ") + failure;
    } else if (!failure.empty()) {
        c.report.message = failure;
    }
    finish(c, "noisy certificate", opts.throw_on_failure);
    return c;
}

Certificate assemble_Q0(const Window& w, const AtomicMeasure& support, double eps, const std::vector<int>& signs,
                        const CertificateOptions& opts) {
    const int K = static_cast<int>(support.size());
    check_support(w, support, 2 * K + 2, eps);
    if (static_cast<int>(signs.size()) != K) throw Error("assemble_Q0: need one sign per support atom");
    for (int s : signs)
        if (s != 1 && s != -1) throw Error("assemble_Q0: signs must be +1 or -1");
    Support sup = unpack(support);
    const int M = w.size();

    Certificate c;
    c.kind = Certificate::Kind::Q0;
    c.signs = signs;
    c.gbar = std::ldexp(1.0, K - 2);
    c.b = Eigen::MatrixXd::Zero(M, M);
    std::string failure;
    try {
        for (int k = 0; k < K; ++k) {
            DominatingResult qt = univariate_dominating(w, sup.T, bump_plateau(sup.T, k, signs[k], eps), opts.univariate);
            DominatingResult qs = univariate_dominating(w, sup.S, bump_plateau(sup.S, k, 1.0, eps), opts.univariate);
            c.b += qt.poly.coef * qs.poly.coef.transpose();
            c.terms.emplace_back(qt.poly.coef, qs.poly.coef);
        }
        c.report.construction = "product";
        verify_q0(w, sup, eps, c, opts.grid);
    } catch (const CertificateError& e) {
        failure = e.what();
        c.report.passed = false;
    }

    if (!c.report.passed && opts.allow_bivariate) {
        double product_slack = c.report.metrics.count("min_slack") ? c.report.metrics["min_slack"]
                                                                    : -std::numeric_limits<double>::infinity();
        std::vector<double> values(signs.begin(), signs.end());
        auto lower = [&](Point p) { return upper9([&](Point q) { return g0_value(q, sup, signs, eps); }, p); };
        std::vector<std::pair<Point, double>> cross;
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < K; ++l)
                if (k != l) {
                    Point p{sup.T[k], sup.S[l]};
                    cross.emplace_back(p, g0_value(p, sup, signs, eps));
                }
        c.b = bivariate_certificate(w, sup, values, lower, eps, opts.grid, opts.univariate.envelope, cross);
        c.terms.clear();
        c.report = {};
        c.report.construction = "bivariate";
        verify_q0(w, sup, eps, c, opts.grid);
        c.report.metrics["product_min_slack"] = product_slack;
    } else if (!failure.empty()) {
        c.report.message = failure;
    }
    finish(c, "Q0 certificate", opts.throw_on_failure);
    return c;
}

std::vector<int> neighborhood_signs(const AtomicMeasure& xhat, const AtomicMeasure& approx, double eps) {
    Neighborhood nb = joint_neighborhood(approx, eps);
    std::vector<int> signs;
    for (std::size_t k = 0; k < approx.size(); ++k)
        signs.push_back(nb.mass(xhat, k) - nb.mass(approx, k) > 0 ? 1 : -1);
    return signs;
}

ErrorConstants error_constants(const Certificate& Q, const Certificate& Q0, double L, double tv_approx) {
    ErrorConstants ec;
    ec.b_norm = Q.b.norm();
    ec.b0_norm = Q0.b.norm();
    ec.gbar = Q.gbar;
    ec.c1 = 10 * ec.b_norm + 6 * ec.b0_norm;
    ec.c2 = tv_approx / 2;
    ec.c3 = 10 * L * ec.b_norm + 6 * L * ec.b0_norm + 1;
    ec.mass_bound_coeff = (6 + 2 / ec.gbar) * ec.b_norm + 6 * ec.b0_norm;
    return ec;
}

BoundsCheck error_bounds_check(const AtomicMeasure& xhat, const AtomicMeasure& approx, double eps,
                               const Certificate& Q, const Certificate& Q0, double deltap) {
    Neighborhood nb = joint_neighborhood(approx, eps);
    BoundsCheck bc;
    const double bn = Q.b.norm(), b0n = Q0.b.norm();
    bc.off_lhs = nb.mass_outside(xhat) - nb.mass_outside(approx);
    bc.off_bound = 2 * bn * deltap / Q.gbar;
    bc.off_slack = bc.off_bound - bc.off_lhs;
    for (std::size_t k = 0; k < approx.size(); ++k) bc.near_lhs += std::abs(nb.mass(xhat, k) - nb.mass(approx, k));
    bc.near_bound = 2 * (bn + b0n) * deltap;
    bc.near_slack = bc.near_bound - bc.near_lhs;
    bc.passed = bc.off_slack >= 0 && bc.near_slack >= 0;
    return bc;
}

}  // namespace sres
