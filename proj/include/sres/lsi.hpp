#pragma once

#include <Eigen/Dense>

namespace sres {

struct LsiResult {
    Eigen::VectorXd x;
    bool feasible = false;
    double equality_residual = 0.0;
    double worst_inequality = 0.0;  // min over rows of (G x - h)
};

// min |x| subject to E x = f and G x >= h (Lawson-Hanson: reduce to a
// least-distance program on the null space of E, then to NNLS).
LsiResult min_norm_lsi(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, const Eigen::MatrixXd& G,
                       const Eigen::VectorXd& h);

// min |z| subject to G z >= h.
LsiResult least_distance(const Eigen::MatrixXd& G, const Eigen::VectorXd& h);

}  // namespace sres
