#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sres/imaging.hpp"
#include "sres/measures.hpp"

namespace sres {

// Uniform grid with n nodes per axis, endpoints included. Node (i, l) has
// flat index i*n + l and location (i h, l h).
struct Grid {
    int n = 256;

    double h() const { return 1.0 / (n - 1); }
    double node(int i) const { return static_cast<double>(i) / (n - 1); }
    std::vector<Point> points() const;
};

enum class NnlsMethod { Auto, ActiveSet, ProjectedGradient };

struct NnlsResult {
    Eigen::VectorXd z;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
    NnlsMethod method = NnlsMethod::ActiveSet;
    std::vector<double> objective;  // 0.5 |Az - y|^2 per accepted iterate
};

// min 0.5 |A z - y|^2 subject to z >= 0. Stops when the projected gradient
// (max-norm) drops to tol or after max_iter outer iterations.
NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double tol, int max_iter,
                NnlsMethod method = NnlsMethod::Auto);

struct RecoveryResult {
    Grid grid;
    Eigen::VectorXd z;
    double residual = 0.0;
    AtomicMeasure extracted;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective;
};

RecoveryResult recover(const Window& w, const Observation& obs, const Grid& grid, double deltap,
                       double mass_floor = 1e-6);

AtomicMeasure extract_support(const Eigen::VectorXd& z, const Grid& grid, double mass_floor);

enum class DeltapRule { Additive, Multiplicative };

// delta + L R (additive) or (1 + L R) delta (multiplicative)
double choose_deltap(double delta, double L, double residual_R, DeltapRule rule = DeltapRule::Additive);

}  // namespace sres
