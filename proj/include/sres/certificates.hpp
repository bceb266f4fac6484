#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sres/imaging.hpp"
#include "sres/measures.hpp"

namespace sres {

// Piecewise-constant target: `inside` within halfwidth of any center (closed),
// `outside` elsewhere.
struct PlateauTarget {
    std::vector<double> centers;
    double halfwidth = 0.0;
    double inside = 0.0;
    double outside = 1.0;

    double value(double t) const;
    // largest value F takes in an arbitrarily small neighborhood of t
    double upper(double t) const;
    double sup() const { return std::max(inside, outside); }
};

// zero near the coordinates listed in `chosen`, one elsewhere
PlateauTarget zero_plateau(const std::vector<double>& coords, const std::vector<int>& chosen, double eps);
// sign near coordinate k, zero elsewhere
PlateauTarget bump_plateau(const std::vector<double>& coords, int k, double sign, double eps);

struct UnivariatePoly {
    Eigen::VectorXd coef;

    double operator()(const Window& w, double t) const { return w.column(t).dot(coef); }
    double deriv(const Window& w, double t) const { return w.deriv_column(t).dot(coef); }
};

struct DominatingOptions {
    std::vector<double> margins{0.05, 0.1, 0.2, 0.5};
    int verify_points = 2048;
    int constraint_points = 4096;
    double envelope = 1e-3;  // extra lift away from the interpolation nodes
    int exchange_rounds = 8;
};

struct DominatingResult {
    UnivariatePoly poly;
    std::string rung;  // "hermite" or "constrained"
    double eta = 0.0;
    double min_slack = 0.0;  // min over the verification grid of q - F
    double worst_t = 0.0;
};

class CertificateError : public Error {
public:
    CertificateError(const std::string& what, std::map<std::string, double> detail)
        : Error(what), detail_(std::move(detail)) {}
    const std::map<std::string, double>& detail() const { return detail_; }

private:
    std::map<std::string, double> detail_;
};

// q with double zeros on zeros and q(anchor) = 1, minimum coefficient norm.
// A negative anchor selects the point of [0,1] farthest from zeros.
UnivariatePoly univariate_vanishing(const Window& w, const std::vector<double>& zeros, double anchor = -1.0,
                                    int verify_points = 2048);

// q >= F on [0,1] with q = F and q' = 0 at every node.
DominatingResult univariate_dominating(const Window& w, const std::vector<double>& nodes, const PlateauTarget& F,
                                       const DominatingOptions& opts = {});

struct VerificationReport {
    bool passed = false;
    int grid = 512;
    std::string construction;
    std::string message;
    Point worst;
    std::map<std::string, double> metrics;
};

struct Certificate {
    enum class Kind { Noiseless, Noisy, Q0 };

    Kind kind = Kind::Noiseless;
    Eigen::MatrixXd b;
    std::vector<int> signs;
    double gbar = 0.0;
    VerificationReport report;
    // sum-of-products factors (empty when built directly in two variables)
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> terms;

    double eval(const Window& w, Point p) const { return w.column(p.t).dot(b * w.column(p.s)); }
    double eval_terms(const Window& w, Point p) const;
    // values on the tensor grid i/(n-1); entry (i, l) is Q(t_i, s_l)
    Eigen::MatrixXd grid_values(const Window& w, int n) const;
};

std::string to_string(Certificate::Kind kind);

struct CertificateOptions {
    int grid = 512;
    bool throw_on_failure = true;
    bool allow_bivariate = true;  // fall back to a direct two-variable construction
    DominatingOptions univariate;
};

Certificate assemble_Q_noiseless(const Window& w, const AtomicMeasure& support, const CertificateOptions& opts = {});
Certificate assemble_Q_noisy(const Window& w, const AtomicMeasure& support, double eps,
                             const CertificateOptions& opts = {});
Certificate assemble_Q0(const Window& w, const AtomicMeasure& support, double eps, const std::vector<int>& signs,
                        const CertificateOptions& opts = {});

// Sign pattern of the neighborhood integrals of xhat - approx (+1 if > 0, else -1).
std::vector<int> neighborhood_signs(const AtomicMeasure& xhat, const AtomicMeasure& approx, double eps);

struct ErrorConstants {
    double c1 = 0, c2 = 0, c3 = 0;
    double mass_bound_coeff = 0;  // (6 + 2/gbar)|b| + 6|b0|
    double gbar = 0;
    double b_norm = 0, b0_norm = 0;
};

ErrorConstants error_constants(const Certificate& Q, const Certificate& Q0, double L, double tv_approx);

struct BoundsCheck {
    double off_lhs = 0, off_bound = 0, off_slack = 0;    // mass of h outside the neighborhoods
    double near_lhs = 0, near_bound = 0, near_slack = 0; // sum of |neighborhood integrals of h|
    bool passed = false;
};

// h = xhat - approx, neighborhoods are boxes of half-width eps around approx.
BoundsCheck error_bounds_check(const AtomicMeasure& xhat, const AtomicMeasure& approx, double eps,
                               const Certificate& Q, const Certificate& Q0, double deltap);

}  // namespace sres
