#include "sres/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace sres {

namespace {
constexpr double kFdStep = 1e-6;
}

Window Window::gaussian(std::vector<double> centers, double sigma) {
    if (centers.empty()) throw Error("gaussian window: needs at least one center");
    if (!(sigma > 0) || !std::isfinite(sigma)) throw Error("gaussian window: sigma must be positive");
    for (std::size_t i = 0; i < centers.size(); ++i) {
        if (!std::isfinite(centers[i])) throw Error("gaussian window: non-finite center");
        if (i > 0 && !(centers[i] > centers[i - 1]))
            throw Error("gaussian window: centers must be distinct and sorted ascending");
    }
    Window w;
    w.kind_ = Kind::Gaussian;
    w.M_ = static_cast<int>(centers.size());
    w.sigma_ = sigma;
    w.centers_ = std::move(centers);
    w.scale_.assign(w.M_, 1.0);
    return w;
}

Window Window::gaussian_uniform(int M, double sigma) {
    if (M < 1) throw Error("gaussian window: M must be >= 1");
    std::vector<double> c(M);
    for (int m = 0; m < M; ++m) c[m] = M == 1 ? 0.5 : static_cast<double>(m) / (M - 1);
    return gaussian(std::move(c), sigma);
}

Window Window::monomial(int M) {
    if (M < 1) throw Error("monomial window: M must be >= 1");
    Window w;
    w.kind_ = Kind::Monomial;
    w.M_ = M;
    w.scale_.assign(M, 1.0);
    return w;
}

Window Window::tabulated(std::vector<double> nodes, std::vector<std::vector<double>> values) {
    if (values.empty()) throw Error("tabulated window: needs at least one function");
    if (nodes.size() < 2) throw Error("tabulated window: needs at least two nodes");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1])) throw Error("tabulated window: nodes must be strictly increasing");
    if (nodes.front() > 0.0 || nodes.back() < 1.0) throw Error("tabulated window: nodes must cover [0,1]");
    for (const auto& row : values) {
        if (row.size() != nodes.size()) throw Error("tabulated window: value rows must match node count");
        for (double v : row)
            if (!std::isfinite(v)) throw Error("tabulated window: non-finite sample");
    }
    Window w;
    w.kind_ = Kind::Tabulated;
    w.M_ = static_cast<int>(values.size());
    w.nodes_ = std::move(nodes);
    w.table_ = std::move(values);
    w.scale_.assign(w.M_, 1.0);
    return w;
}

void Window::check_index(int m) const {
    if (m < 0 || m >= M_)
        throw Error("window index " + std::to_string(m) + " out of range [0, " + std::to_string(M_) + ")");
}

double Window::raw(int m, double t) const {
    switch (kind_) {
    case Kind::Gaussian: {
        double u = (t - centers_[m]) / sigma_;
        return std::exp(-u * u);
    }
    case Kind::Monomial:
        return m == 0 ? 1.0 : std::pow(t, m);
    case Kind::Tabulated: {
        const auto& row = table_[m];
        if (t <= nodes_.front()) return row.front();
        if (t >= nodes_.back()) return row.back();
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
        std::size_t hi = static_cast<std::size_t>(it - nodes_.begin()), lo = hi - 1;
        double f = (t - nodes_[lo]) / (nodes_[hi] - nodes_[lo]);
        return row[lo] + f * (row[hi] - row[lo]);
    }
    }
    return 0.0;
}

double Window::raw_deriv(int m, double t) const {
    switch (kind_) {
    case Kind::Gaussian: {
        double u = (t - centers_[m]) / sigma_;
        return -2.0 * u / sigma_ * std::exp(-u * u);
    }
    case Kind::Monomial:
        return m == 0 ? 0.0 : m * (m == 1 ? 1.0 : std::pow(t, m - 1));
    case Kind::Tabulated:
        return (raw(m, t + kFdStep) - raw(m, t - kFdStep)) / (2 * kFdStep);
    }
    return 0.0;
}

double Window::eval(int m, double t) const {
    check_index(m);
    return scale_[m] * raw(m, t);
}

double Window::deriv(int m, double t) const {
    check_index(m);
    return scale_[m] * raw_deriv(m, t);
}

Eigen::VectorXd Window::column(double t) const {
    Eigen::VectorXd v(M_);
    for (int m = 0; m < M_; ++m) v(m) = scale_[m] * raw(m, t);
    return v;
}

Eigen::VectorXd Window::deriv_column(double t) const {
    Eigen::VectorXd v(M_);
    for (int m = 0; m < M_; ++m) v(m) = scale_[m] * raw_deriv(m, t);
    return v;
}

Eigen::MatrixXd Window::collocation(const std::vector<double>& ts) const {
    Eigen::MatrixXd P(ts.size(), M_);
    for (std::size_t i = 0; i < ts.size(); ++i) P.row(i) = column(ts[i]).transpose();
    return P;
}

Eigen::MatrixXd Window::deriv_collocation(const std::vector<double>& ts) const {
    Eigen::MatrixXd P(ts.size(), M_);
    for (std::size_t i = 0; i < ts.size(); ++i) P.row(i) = deriv_column(ts[i]).transpose();
    return P;
}

Window Window::rescaled(const std::vector<double>& factors) const {
    if (static_cast<int>(factors.size()) != M_) throw Error("rescaled: need one factor per function");
    Window w = *this;
    for (int m = 0; m < M_; ++m) {
        if (!(factors[m] > 0)) throw Error("rescaled: factors must be positive");
        w.scale_[m] *= factors[m];
    }
    return w;
}

Eigen::MatrixXd forward(const Window& w, const AtomicMeasure& x) {
    const int M = w.size();
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(M, M);
    for (const Atom& a : x.atoms()) y.noalias() += a.w * w.column(a.loc.t) * w.column(a.loc.s).transpose();
    return y;
}

Observation add_noise(const Eigen::MatrixXd& y, double delta, std::uint64_t seed) {
    if (!(delta >= 0) || !std::isfinite(delta)) throw Error("add_noise: delta must be a nonnegative number");
    Observation obs{y, delta};
    if (delta == 0.0 || y.size() == 0) return obs;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd e(y.rows(), y.cols());
    do {
        for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = normal(rng);
    } while (e.norm() == 0.0);
    obs.y += (delta / e.norm()) * e;
    return obs;
}

double lipschitz(const Window& w) {
    if (w.kind() == Window::Kind::Gaussian)
        return std::sqrt(2.0 * w.size() / (w.sigma() * w.sigma() * std::exp(1.0)));

    // |Phi(t,s)|_F = |phi(t)| |phi(s)|; gradient norm^2 = |phi'(t)|^2|phi(s)|^2 + |phi(t)|^2|phi'(s)|^2
    const int n = 2049;
    std::vector<double> nv(n), dv(n);
    for (int i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / (n - 1);
        Eigen::VectorXd c = w.column(t), d;
        if (w.analytic_derivative()) {
            d = w.deriv_column(t);
        } else {
            double lo = std::max(0.0, t - kFdStep), hi = std::min(1.0, t + kFdStep);
            d = (w.column(hi) - w.column(lo)) / (hi - lo);
        }
        nv[i] = c.norm();
        dv[i] = d.norm();
    }
    double L = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double mass = nv[i] * nv[j];
            double grad = std::hypot(dv[i] * nv[j], nv[i] * dv[j]);
            L = std::max({L, mass, grad});
        }
    return L;
}

Eigen::MatrixXd design_matrix(const Window& w, const std::vector<Point>& grid) {
    if (grid.empty()) throw Error("design_matrix: empty grid");
    const int M = w.size();
    Eigen::MatrixXd A(M * M, grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        Eigen::VectorXd ct = w.column(grid[j].t), cs = w.column(grid[j].s);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < M; ++k) A(m * M + k, j) = ct(m) * cs(k);
    }
    return A;
}

}  // namespace sres
