#include "sres/lsi.hpp"

#include <cmath>
#include <vector>

#include "sres/measures.hpp"
#include "sres/solver.hpp"

namespace sres {

LsiResult least_distance(const Eigen::MatrixXd& G, const Eigen::VectorXd& h) {
    const Eigen::Index p = G.cols();
    LsiResult res;
    res.x = Eigen::VectorXd::Zero(p);

    // unit-norm rows; drop rows with no dependence on z
    std::vector<Eigen::Index> rows;
    Eigen::VectorXd norms(G.rows());
    bool trivially_infeasible = false;
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
        norms(i) = G.row(i).norm();
        if (norms(i) > 1e-14)
            rows.push_back(i);
        else if (h(i) > 1e-12)
            trivially_infeasible = true;
    }
    if (trivially_infeasible) {
        res.worst_inequality = (-h).minCoeff();
        return res;
    }
    if (rows.empty()) {
        res.feasible = true;
        res.worst_inequality = G.rows() ? (-h).minCoeff() : 0.0;
        return res;
    }
    if (p == 0) {
        res.worst_inequality = (-h).minCoeff();
        res.feasible = res.worst_inequality >= -1e-12;
        return res;
    }

    const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd Em(p + 1, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        Eigen::Index i = rows[k];
        Em.col(k).head(p) = G.row(i).transpose() / norms(i);
        Em(p, k) = h(i) / norms(i);
    }
    Eigen::VectorXd fm = Eigen::VectorXd::Zero(p + 1);
    fm(p) = 1.0;
    NnlsResult sol = nnls(Em, fm, 1e-14, 50 * static_cast<int>(p + 1) + 200, NnlsMethod::ActiveSet);
    Eigen::VectorXd r = Em * sol.z - fm;
    if (r.norm() < 1e-12 || std::abs(r(p)) < 1e-14) return res;
    res.x = -r.head(p) / r(p);
    res.worst_inequality = (G * res.x - h).minCoeff();
    res.feasible = true;
    return res;
}

LsiResult min_norm_lsi(const Eigen::MatrixXd& E, const Eigen::VectorXd& f, const Eigen::MatrixXd& G,
                       const Eigen::VectorXd& h) {
    const Eigen::Index n = E.rows() ? E.cols() : G.cols();
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd N = Eigen::MatrixXd::Identity(n, n);
    LsiResult res;
    if (E.rows() > 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Eigen::VectorXd& sv = svd.singularValues();
        double tol = 1e-13 * std::max<double>(E.rows(), E.cols()) * (sv.size() ? sv(0) : 0.0);
        Eigen::Index rank = 0;
        while (rank < sv.size() && sv(rank) > tol) ++rank;
        Eigen::VectorXd c = svd.matrixU().leftCols(rank).transpose() * f;
        for (Eigen::Index i = 0; i < rank; ++i) c(i) /= sv(i);
        x0 = svd.matrixV().leftCols(rank) * c;
        N = svd.matrixV().rightCols(n - rank);
        res.equality_residual = (E * x0 - f).norm();
        if (res.equality_residual > 1e-8 * std::max(1.0, f.norm())) {
            res.x = x0;
            return res;
        }
    }
    if (G.rows() == 0) {
        res.x = x0;
        res.feasible = true;
        return res;
    }
    LsiResult ldp = least_distance(G * N, h - G * x0);
    res.x = x0 + N * ldp.x;
    res.feasible = ldp.feasible;
    res.worst_inequality = (G * res.x - h).minCoeff();
    if (E.rows() > 0) res.equality_residual = (E * res.x - f).norm();
    return res;
}

}  // namespace sres
