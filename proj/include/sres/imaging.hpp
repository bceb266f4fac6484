#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sres/measures.hpp"

namespace sres {

// A family of M continuous functions on [0,1]. Functions are indexed from 0.
class Window {
public:
    enum class Kind { Gaussian, Monomial, Tabulated };

    static Window gaussian(std::vector<double> centers, double sigma);
    // M Gaussians with centers spread evenly over [0,1], endpoints included
    static Window gaussian_uniform(int M, double sigma);
    static Window monomial(int M);
    // values[m][i] = phi_m(nodes[i]); nodes strictly increasing, covering [0,1]
    static Window tabulated(std::vector<double> nodes, std::vector<std::vector<double>> values);

    Kind kind() const { return kind_; }
    int size() const { return M_; }
    bool analytic_derivative() const { return kind_ != Kind::Tabulated; }
    double sigma() const { return sigma_; }
    const std::vector<double>& centers() const { return centers_; }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<std::vector<double>>& table() const { return table_; }
    double scale(int m) const { return scale_.at(m); }

    double eval(int m, double t) const;
    double deriv(int m, double t) const;
    Eigen::VectorXd column(double t) const;
    Eigen::VectorXd deriv_column(double t) const;
    // rows = points, columns = functions
    Eigen::MatrixXd collocation(const std::vector<double>& ts) const;
    Eigen::MatrixXd deriv_collocation(const std::vector<double>& ts) const;

    // copy with phi_m multiplied by factors[m] (> 0)
    Window rescaled(const std::vector<double>& factors) const;

private:
    double raw(int m, double t) const;
    double raw_deriv(int m, double t) const;
    void check_index(int m) const;

    Kind kind_ = Kind::Gaussian;
    int M_ = 0;
    double sigma_ = 0.0;
    std::vector<double> centers_;
    std::vector<double> nodes_;
    std::vector<std::vector<double>> table_;
    std::vector<double> scale_;
};

struct Observation {
    Eigen::MatrixXd y;
    double delta = 0.0;
};

// y(m,n) = sum_k a_k phi_m(t_k) phi_n(s_k)
Eigen::MatrixXd forward(const Window& w, const AtomicMeasure& x);

// Adds a pseudorandom perturbation of Frobenius norm exactly delta.
Observation add_noise(const Eigen::MatrixXd& y, double delta, std::uint64_t seed);

// Constant L with |Phi(x1) - Phi(x2)|_F <= L d_GW(x1, x2).
double lipschitz(const Window& w);

// Column j is vec(Phi(theta_j)) with row index m*M + n.
Eigen::MatrixXd design_matrix(const Window& w, const std::vector<Point>& grid);

inline Eigen::VectorXd vec(const Eigen::MatrixXd& y) {
    Eigen::VectorXd v(y.size());
    for (Eigen::Index m = 0; m < y.rows(); ++m)
        for (Eigen::Index n = 0; n < y.cols(); ++n) v(m * y.cols() + n) = y(m, n);
    return v;
}

}  // namespace sres
