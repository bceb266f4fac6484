#include "sres/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace sres {

namespace {

constexpr double kCostCap = 2.0;

Eigen::MatrixXd cost_matrix(const AtomicMeasure& x1, const AtomicMeasure& x2, GroundNorm norm, bool capped) {
    Eigen::MatrixXd c(x1.size(), x2.size());
    for (std::size_t i = 0; i < x1.size(); ++i)
        for (std::size_t j = 0; j < x2.size(); ++j) {
            double d = ground_distance(x1[i].loc, x2[j].loc, norm);
            c(i, j) = capped ? std::min(d, kCostCap) : d;
        }
    return c;
}

Eigen::VectorXd weights(const AtomicMeasure& x) {
    Eigen::VectorXd w(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) w(i) = x[i].w;
    return w;
}

// Spanning-tree basis of the transportation problem. Tree nodes are rows
// 0..m-1 followed by columns m..m+n-1.
class TransportTree {
public:
    TransportTree(int m, int n) : m_(m), n_(n), basic_(m, n) { basic_.setZero(); }

    void add(int i, int j) { basic_(i, j) = 1; }
    void remove(int i, int j) { basic_(i, j) = 0; }
    bool is_basic(int i, int j) const { return basic_(i, j) != 0; }

    void potentials(const Eigen::MatrixXd& cost, Eigen::VectorXd& u, Eigen::VectorXd& v) const {
        u.setConstant(m_, std::numeric_limits<double>::quiet_NaN());
        v.setConstant(n_, std::numeric_limits<double>::quiet_NaN());
        std::deque<int> queue{0};
        u(0) = 0;
        while (!queue.empty()) {
            int node = queue.front();
            queue.pop_front();
            if (node < m_) {
                for (int j = 0; j < n_; ++j)
                    if (basic_(node, j) && std::isnan(v(j))) {
                        v(j) = cost(node, j) - u(node);
                        queue.push_back(m_ + j);
                    }
            } else {
                int j = node - m_;
                for (int i = 0; i < m_; ++i)
                    if (basic_(i, j) && std::isnan(u(i))) {
                        u(i) = cost(i, j) - v(j);
                        queue.push_back(i);
                    }
            }
        }
    }

    // Cells on the tree path from row i to column j, in order.
    std::vector<std::pair<int, int>> path(int i, int j) const {
        const int total = m_ + n_;
        std::vector<int> parent(total, -2);
        std::deque<int> queue{i};
        parent[i] = -1;
        while (!queue.empty() && parent[m_ + j] == -2) {
            int node = queue.front();
            queue.pop_front();
            if (node < m_) {
                for (int c = 0; c < n_; ++c)
                    if (basic_(node, c) && parent[m_ + c] == -2) {
                        parent[m_ + c] = node;
                        queue.push_back(m_ + c);
                    }
            } else {
                int c = node - m_;
                for (int r = 0; r < m_; ++r)
                    if (basic_(r, c) && parent[r] == -2) {
                        parent[r] = node;
                        queue.push_back(r);
                    }
            }
        }
        if (parent[m_ + j] == -2) throw Error("transportation simplex: basis is not a spanning tree");
        std::vector<std::pair<int, int>> cells;
        int node = m_ + j;
        while (parent[node] != -1) {
            int prev = parent[node];
            if (node >= m_)
                cells.emplace_back(prev, node - m_);
            else
                cells.emplace_back(node, prev - m_);
            node = prev;
        }
        std::reverse(cells.begin(), cells.end());
        return cells;
    }

private:
    int m_, n_;
    Eigen::Matrix<unsigned char, Eigen::Dynamic, Eigen::Dynamic> basic_;
};

TransportPlan plan_from_coupling(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                 const Eigen::MatrixXd& cost) {
    TransportPlan plan;
    plan.coupling = gamma;
    plan.destroyed = (a - gamma.rowwise().sum()).cwiseMax(0.0);
    plan.created = (b - gamma.colwise().sum().transpose()).cwiseMax(0.0);
    plan.objective = (cost.array() * gamma.array()).sum() + plan.destroyed.sum() + plan.created.sum();
    return plan;
}

TransportPlan partial_network(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& cost) {
    const int n1 = static_cast<int>(a.size()), n2 = static_cast<int>(b.size());
    Eigen::VectorXd supply(n1 + 1), demand(n2 + 1);
    supply << a, b.sum();
    demand << b, a.sum();
    Eigen::MatrixXd c(n1 + 1, n2 + 1);
    c.topLeftCorner(n1, n2) = cost;
    c.col(n2).setOnes();
    c.row(n1).setOnes();
    c(n1, n2) = 0.0;
    Eigen::MatrixXd flow = solve_transportation(supply, demand, c);
    return plan_from_coupling(flow.topLeftCorner(n1, n2), a, b, cost);
}

TransportPlan partial_dense(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::MatrixXd& cost) {
    const int n1 = static_cast<int>(a.size()), n2 = static_cast<int>(b.size());
    const int nv = n1 * n2;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n1 + n2, nv);
    Eigen::VectorXd rhs(n1 + n2), obj(nv);
    rhs << a, b;
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            int v = i * n2 + j;
            A(i, v) = 1;
            A(n1 + j, v) = 1;
            obj(v) = cost(i, j) - 2.0;
        }
    Eigen::VectorXd g = simplex_leq(A, rhs, obj);
    Eigen::MatrixXd gamma(n1, n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) gamma(i, j) = g(i * n2 + j);
    return plan_from_coupling(gamma, a, b, cost);
}

}  // namespace

Eigen::MatrixXd solve_transportation(const Eigen::VectorXd& supply, const Eigen::VectorXd& demand,
                                     const Eigen::MatrixXd& cost, int max_pivots) {
    const int m = static_cast<int>(supply.size()), n = static_cast<int>(demand.size());
    if (m == 0 || n == 0) throw Error("transportation simplex: empty side");
    if (cost.rows() != m || cost.cols() != n) throw Error("transportation simplex: cost shape mismatch");
    if ((supply.array() < 0).any() || (demand.array() < 0).any())
        throw Error("transportation simplex: negative supply or demand");
    double total = supply.sum();
    if (std::abs(total - demand.sum()) > 1e-9 * std::max(1.0, total))
        throw Error("transportation simplex: unbalanced problem");
    if (max_pivots <= 0) max_pivots = 50 * (m + n) * (m + n) + 1000;

    // northwest corner start; keeps exactly m+n-1 basic cells
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(m, n);
    TransportTree tree(m, n);
    Eigen::VectorXd rs = supply, rd = demand;
    rd(n - 1) += total - demand.sum();
    int i = 0, j = 0;
    while (true) {
        double q = std::min(rs(i), rd(j));
        flow(i, j) = q;
        tree.add(i, j);
        rs(i) -= q;
        rd(j) -= q;
        if (i == m - 1 && j == n - 1) break;
        if (j == n - 1 || (i < m - 1 && rs(i) <= rd(j)))
            ++i;
        else
            ++j;
    }

    const double tol = 1e-12 * (1.0 + cost.cwiseAbs().maxCoeff());
    Eigen::VectorXd u, v;
    int degenerate_run = 0;
    for (int pivot = 0;; ++pivot) {
        if (pivot >= max_pivots) throw Error("transportation simplex: pivot limit reached");
        tree.potentials(cost, u, v);
        int ei = -1, ej = -1;
        double best = -tol;
        const bool bland = degenerate_run > m * n;
        for (int r = 0; r < m && !(bland && ei >= 0); ++r)
            for (int c = 0; c < n; ++c) {
                if (tree.is_basic(r, c)) continue;
                double red = cost(r, c) - u(r) - v(c);
                if (red < best) {
                    best = red;
                    ei = r;
                    ej = c;
                    if (bland) break;
                }
            }
        if (ei < 0) break;

        auto cells = tree.path(ei, ej);
        // path cells alternate -, +, -, ... starting from the end next to column ej
        double theta = std::numeric_limits<double>::infinity();
        int leave = -1;
        const int k = static_cast<int>(cells.size());
        for (int p = k - 1; p >= 0; p -= 2) {
            double f = flow(cells[p].first, cells[p].second);
            int key = cells[p].first * n + cells[p].second;
            if (f < theta || (f == theta && key < cells[leave].first * n + cells[leave].second)) {
                theta = f;
                leave = p;
            }
        }
        flow(ei, ej) += theta;
        for (int p = k - 1, sign = -1; p >= 0; --p, sign = -sign) flow(cells[p].first, cells[p].second) += sign * theta;
        flow(cells[leave].first, cells[leave].second) = 0.0;
        tree.remove(cells[leave].first, cells[leave].second);
        tree.add(ei, ej);
        degenerate_run = theta <= 0 ? degenerate_run + 1 : 0;
    }
    return flow.cwiseMax(0.0);
}

Eigen::VectorXd simplex_leq(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                            int max_pivots) {
    const int m = static_cast<int>(A.rows()), n = static_cast<int>(A.cols());
    if (b.size() != m || c.size() != n) throw Error("simplex: shape mismatch");
    if ((b.array() < 0).any()) throw Error("simplex: right-hand side must be nonnegative");
    if (max_pivots <= 0) max_pivots = 100 * (m + n) + 1000;

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
    T.topLeftCorner(m, n) = A;
    T.block(0, n, m, m).setIdentity();
    T.topRightCorner(m, 1) = b;
    T.row(m).head(n) = c.transpose();
    std::vector<int> basis(m);
    for (int r = 0; r < m; ++r) basis[r] = n + r;

    const double tol = 1e-12 * (1.0 + c.cwiseAbs().maxCoeff());
    for (int pivot = 0;; ++pivot) {
        if (pivot >= max_pivots) throw Error("simplex: pivot limit reached");
        int enter = -1;
        for (int col = 0; col < n + m; ++col)
            if (T(m, col) < -tol) {
                enter = col;
                break;
            }
        if (enter < 0) break;
        int row = -1;
        double ratio = std::numeric_limits<double>::infinity();
        for (int r = 0; r < m; ++r) {
            double a = T(r, enter);
            if (a <= 1e-12) continue;
            double q = T(r, n + m) / a;
            if (q < ratio - 1e-15 || (std::abs(q - ratio) <= 1e-15 && basis[r] < basis[row])) {
                ratio = q;
                row = r;
            }
        }
        if (row < 0) throw Error("simplex: problem is unbounded");
        T.row(row) /= T(row, enter);
        for (int r = 0; r <= m; ++r)
            if (r != row && T(r, enter) != 0.0) T.row(r) -= T(r, enter) * T.row(row);
        basis[row] = enter;
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int r = 0; r < m; ++r)
        if (basis[r] < n) x(basis[r]) = std::max(0.0, T(r, n + m));
    return x;
}

TransportResult wasserstein(const AtomicMeasure& x1, const AtomicMeasure& x2, const TransportOptions& opts) {
    double m1 = tv_norm(x1), m2 = tv_norm(x2);
    if (std::abs(m1 - m2) > 1e-9 * std::max(1.0, std::max(m1, m2)))
        throw Error("wasserstein: masses differ; use gen_wasserstein for unbalanced measures");
    TransportResult res;
    res.plan.coupling = Eigen::MatrixXd::Zero(x1.size(), x2.size());
    res.plan.destroyed = Eigen::VectorXd::Zero(x1.size());
    res.plan.created = Eigen::VectorXd::Zero(x2.size());
    if (x1.empty() || x2.empty()) return res;

    Eigen::MatrixXd cost = cost_matrix(x1, x2, opts.norm, false);
    Eigen::VectorXd a = weights(x1), b = weights(x2);
    b *= a.sum() / b.sum();
    Eigen::MatrixXd flow = solve_transportation(a, b, cost);
    res.plan.coupling = flow;
    res.plan.objective = (cost.array() * flow.array()).sum();
    res.distance = res.plan.objective;
    return res;
}

TransportResult gen_wasserstein(const AtomicMeasure& x1, const AtomicMeasure& x2, const TransportOptions& opts) {
    Eigen::VectorXd a = weights(x1), b = weights(x2);
    Eigen::MatrixXd cost = cost_matrix(x1, x2, opts.norm, true);
    TransportResult res;
    if (x1.empty() || x2.empty()) {
        res.plan = plan_from_coupling(Eigen::MatrixXd::Zero(x1.size(), x2.size()), a, b, cost);
        res.distance = res.plan.objective;
        return res;
    }
    switch (opts.solver) {
    case LpSolver::Network:
        res.plan = partial_network(a, b, cost);
        break;
    case LpSolver::Dense:
        res.plan = partial_dense(a, b, cost);
        break;
    case LpSolver::Auto:
        try {
            res.plan = partial_network(a, b, cost);
        } catch (const Error&) {
            if (x1.size() + x2.size() > 200) throw;
            res.plan = partial_dense(a, b, cost);
        }
        break;
    }
    res.distance = res.plan.objective;
    return res;
}

}  // namespace sres
