#pragma once

#include <Eigen/Dense>

#include "sres/measures.hpp"

namespace sres {

enum class LpSolver { Auto, Network, Dense };

struct TransportOptions {
    GroundNorm norm = GroundNorm::L2;
    LpSolver solver = LpSolver::Auto;
};

struct TransportPlan {
    Eigen::MatrixXd coupling;
    Eigen::VectorXd destroyed;
    Eigen::VectorXd created;
    double objective = 0.0;

    double transported_mass() const { return coupling.sum(); }
};

struct TransportResult {
    double distance = 0.0;
    TransportPlan plan;
};

// Balanced earth mover's distance. Throws if the total masses differ.
TransportResult wasserstein(const AtomicMeasure& x1, const AtomicMeasure& x2,
                            const TransportOptions& opts = {});

// Transport with unit-cost creation and destruction of mass.
TransportResult gen_wasserstein(const AtomicMeasure& x1, const AtomicMeasure& x2,
                                const TransportOptions& opts = {});

inline double gw_distance(const AtomicMeasure& x1, const AtomicMeasure& x2,
                          GroundNorm norm = GroundNorm::L2) {
    return gen_wasserstein(x1, x2, {norm, LpSolver::Auto}).distance;
}

// Balanced transportation problem: sum_j f_ij = supply_i, sum_i f_ij = demand_j.
// Solved by the transportation simplex (MODI potentials on a spanning tree).
Eigen::MatrixXd solve_transportation(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                                     const Eigen::MatrixXd& cost, int max_pivots = 0);

// min c^T x subject to A x <= b, x >= 0, with b >= 0. Dense tableau, Bland's rule.
Eigen::VectorXd simplex_leq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const Eigen::VectorXd& c, int max_pivots = 0);

}  // namespace sres
