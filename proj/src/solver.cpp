#include "sres/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace sres {

namespace {

double half_sq(const Eigen::VectorXd& r) { return 0.5 * r.squaredNorm(); }

double projected_gradient(const Eigen::VectorXd& z, const Eigen::VectorXd& grad) {
    double pg = 0.0;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        double g = z(j) > 0 ? std::abs(grad(j)) : std::max(0.0, -grad(j));
        pg = std::max(pg, g);
    }
    return pg;
}

using MatrixXl = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXl = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Passive-set least squares in extended precision; neighbouring grid columns
// are nearly collinear and double rounding stalls the active set early.
VectorXl least_squares(const Eigen::MatrixXd& A, const std::vector<Eigen::Index>& cols, const VectorXl& y) {
    MatrixXl Ap(A.rows(), cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) Ap.col(k) = A.col(cols[k]).cast<long double>();
    return Ap.colPivHouseholderQr().solve(y);
}

VectorXl residual_of(const Eigen::MatrixXd& A, const std::vector<Eigen::Index>& cols, const VectorXl& z_passive,
                     const VectorXl& y) {
    VectorXl r = y;
    for (std::size_t k = 0; k < cols.size(); ++k) r -= z_passive(k) * A.col(cols[k]).cast<long double>();
    return r;
}

// Lawson-Hanson active set on unit-norm columns.
NnlsResult lawson_hanson(const Eigen::MatrixXd& A_in, const Eigen::VectorXd& y_in, double tol, int max_iter) {
    const Eigen::Index n = A_in.cols();
    Eigen::VectorXd scale(n);
    Eigen::MatrixXd A = A_in;
    for (Eigen::Index j = 0; j < n; ++j) {
        double c = A.col(j).norm();
        scale(j) = c > 0 ? 1.0 / c : 0.0;
        A.col(j) *= scale(j);
    }
    const VectorXl y = y_in.cast<long double>();

    NnlsResult res;
    res.method = NnlsMethod::ActiveSet;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> passive;
    std::vector<char> in_passive(n, 0), blocked(n, 0);

    VectorXl r = y;
    res.objective.push_back(static_cast<double>(0.5L * r.squaredNorm()));

    while (res.iterations < max_iter) {
        Eigen::VectorXd w = A.transpose() * r.cast<double>();
        Eigen::Index enter = -1;
        double wmax = tol;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!in_passive[j] && !blocked[j] && scale(j) > 0 && w(j) > wmax) {
                wmax = w(j);
                enter = j;
            }
        if (enter < 0) {
            // blocked columns only matter if they still carry a violation
            bool any = false;
            for (Eigen::Index j = 0; j < n; ++j)
                if (!in_passive[j] && scale(j) > 0 && w(j) > tol) any = true;
            res.converged = !any;
            break;
        }
        ++res.iterations;

        Eigen::VectorXd zt = z;
        std::vector<Eigen::Index> P = passive;
        P.push_back(enter);
        std::vector<char> inP = in_passive;
        inP[enter] = 1;

        bool entered = true;
        VectorXl s;
        for (int inner = 0; inner < 10 * static_cast<int>(A.rows()) + 10; ++inner) {
            s = least_squares(A, P, y);
            bool all_pos = true;
            for (Eigen::Index k = 0; k < s.size(); ++k)
                if (s(k) <= 0) all_pos = false;
            if (all_pos) {
                for (std::size_t k = 0; k < P.size(); ++k) zt(P[k]) = static_cast<double>(s(k));
                break;
            }
            if (inner == 0 && s(s.size() - 1) <= 0) {
                // the entering column cannot be made positive; try another
                entered = false;
                break;
            }
            long double alpha = 1.0L;
            for (std::size_t k = 0; k < P.size(); ++k)
                if (s(k) <= 0) {
                    long double zk = zt(P[k]);
                    alpha = std::min(alpha, zk / (zk - s(k)));
                }
            for (std::size_t k = 0; k < P.size(); ++k)
                zt(P[k]) = static_cast<double>(zt(P[k]) + alpha * (s(k) - zt(P[k])));
            std::vector<Eigen::Index> keep;
            for (Eigen::Index j : P) {
                if (zt(j) <= 1e-15 * std::max(1.0, zt.cwiseAbs().maxCoeff())) {
                    zt(j) = 0.0;
                    inP[j] = 0;
                } else {
                    keep.push_back(j);
                }
            }
            P = keep;
            if (P.empty()) break;
        }
        if (!entered) {
            blocked[enter] = 1;
            continue;
        }

        VectorXl zp(P.size());
        for (std::size_t k = 0; k < P.size(); ++k) zp(k) = zt(P[k]);
        VectorXl rn = residual_of(A, P, zp, y);
        double obj = static_cast<double>(0.5L * rn.squaredNorm());
        if (obj > res.objective.back()) {
            // rounding stagnation: keep the previous iterate and stop
            res.converged = projected_gradient(z, -(A.transpose() * r.cast<double>())) <= tol;
            break;
        }
        z = zt;
        passive = P;
        in_passive = inP;
        std::fill(blocked.begin(), blocked.end(), 0);
        r = rn;
        res.objective.push_back(obj);
    }
    res.z = z.cwiseProduct(scale);
    res.residual = (A_in * res.z - y_in).norm();
    return res;
}

double spectral_norm_sq(const Eigen::MatrixXd& A) {
    Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols()) / std::sqrt(static_cast<double>(A.cols()));
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd u = A.transpose() * (A * v);
        double nu = u.norm();
        if (nu == 0.0) return 0.0;
        v = u / nu;
        if (std::abs(nu - lambda) <= 1e-10 * nu) {
            lambda = nu;
            break;
        }
        lambda = nu;
    }
    return lambda * 1.01;
}

// Monotone FISTA with adaptive restart.
NnlsResult projected_gradient_nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double tol, int max_iter) {
    NnlsResult res;
    res.method = NnlsMethod::ProjectedGradient;
    const Eigen::Index n = A.cols();
    res.z = Eigen::VectorXd::Zero(n);
    double lip = spectral_norm_sq(A);
    Eigen::VectorXd grad0 = -(A.transpose() * y);
    double fx = half_sq(y);
    res.objective.push_back(fx);
    if (lip == 0.0 || projected_gradient(res.z, grad0) <= tol) {
        res.converged = true;
        res.residual = y.norm();
        return res;
    }
    Eigen::VectorXd x = res.z, v = x;
    double t = 1.0;
    while (res.iterations < max_iter) {
        ++res.iterations;
        Eigen::VectorXd g = A.transpose() * (A * v - y);
        Eigen::VectorXd cand = (v - g / lip).cwiseMax(0.0);
        double fc = half_sq(A * cand - y);
        Eigen::VectorXd xn = x;
        double fn = fx;
        bool restart = false;
        if (fc <= fx) {
            xn = cand;
            fn = fc;
        } else {
            restart = true;
        }
        double tn = restart ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        v = restart ? xn : Eigen::VectorXd(xn + (t / tn) * (cand - xn) + ((t - 1.0) / tn) * (xn - x));
        x = xn;
        fx = fn;
        t = tn;
        res.objective.push_back(fx);
        if (projected_gradient(x, A.transpose() * (A * x - y)) <= tol) {
            res.converged = true;
            break;
        }
    }
    res.z = x;
    res.residual = (A * x - y).norm();
    return res;
}

}  // namespace

std::vector<Point> Grid::points() const {
    if (n < 2) throw Error("grid needs at least 2 nodes per axis");
    std::vector<Point> pts;
    pts.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) pts.push_back({node(i), node(l)});
    return pts;
}

NnlsResult nnls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double tol, int max_iter, NnlsMethod method) {
    if (A.rows() != y.size()) throw Error("nnls: shape mismatch");
    if (!A.allFinite() || !y.allFinite()) throw Error("nnls: non-finite input");
    if (!(tol > 0)) throw Error("nnls: tol must be positive");
    if (A.cols() == 0) {
        NnlsResult res;
        res.residual = y.norm();
        res.converged = true;
        res.objective.push_back(half_sq(y));
        return res;
    }
    if (method == NnlsMethod::Auto)
        method = (A.rows() <= 400 || A.cols() <= 2000) ? NnlsMethod::ActiveSet : NnlsMethod::ProjectedGradient;
    return method == NnlsMethod::ActiveSet ? lawson_hanson(A, y, tol, max_iter)
                                           : projected_gradient_nnls(A, y, tol, max_iter);
}

RecoveryResult recover(const Window& w, const Observation& obs, const Grid& grid, double deltap,
                       double mass_floor) {
    if (!(deltap >= obs.delta)) throw Error("recover: deltap must be at least the noise level delta");
    if (obs.y.rows() != w.size() || obs.y.cols() != w.size())
        throw Error("recover: observation shape does not match the window size");
    Eigen::MatrixXd A = design_matrix(w, grid.points());
    Eigen::VectorXd y = vec(obs.y);
    // run the active set until no column improves the fit; stopping at a
    // loose gradient tolerance leaves spurious mass on ill-conditioned windows
    const double tol = std::numeric_limits<double>::min();
    NnlsResult sol = nnls(A, y, tol, 20 * static_cast<int>(A.rows()) + 200);

    RecoveryResult rec;
    rec.grid = grid;
    rec.z = sol.z;
    rec.residual = (A * sol.z - y).norm();
    rec.iterations = sol.iterations;
    rec.objective = sol.objective;
    rec.converged = rec.residual <= deltap;
    rec.extracted = extract_support(sol.z, grid, mass_floor);
    return rec;
}

AtomicMeasure extract_support(const Eigen::VectorXd& z, const Grid& grid, double mass_floor) {
    const int n = grid.n;
    if (z.size() != static_cast<Eigen::Index>(n) * n) throw Error("extract_support: weight vector does not match grid");
    if ((z.array() < 0).any()) throw Error("extract_support: weights must be nonnegative");
    const double total = z.sum();
    std::vector<char> seen(z.size(), 0);
    std::vector<Atom> atoms;
    for (Eigen::Index start = 0; start < z.size(); ++start) {
        if (seen[start] || !(z(start) > mass_floor)) continue;
        double w = 0, wt = 0, ws = 0;
        std::deque<Eigen::Index> queue{start};
        seen[start] = 1;
        while (!queue.empty()) {
            Eigen::Index k = queue.front();
            queue.pop_front();
            int i = static_cast<int>(k / n), l = static_cast<int>(k % n);
            w += z(k);
            wt += z(k) * grid.node(i);
            ws += z(k) * grid.node(l);
            const int di[4] = {-1, 1, 0, 0}, dl[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d) {
                int ii = i + di[d], ll = l + dl[d];
                if (ii < 0 || ii >= n || ll < 0 || ll >= n) continue;
                Eigen::Index kk = static_cast<Eigen::Index>(ii) * n + ll;
                if (!seen[kk] && z(kk) > mass_floor) {
                    seen[kk] = 1;
                    queue.push_back(kk);
                }
            }
        }
        if (w <= mass_floor * total) continue;
        atoms.push_back({{std::clamp(wt / w, 0.0, 1.0), std::clamp(ws / w, 0.0, 1.0)}, w});
    }
    return AtomicMeasure(std::move(atoms));
}

double choose_deltap(double delta, double L, double residual_R, DeltapRule rule) {
    if (!(delta >= 0) || !(L >= 0) || !(residual_R >= 0)) throw Error("choose_deltap: inputs must be nonnegative");
    return rule == DeltapRule::Additive ? delta + L * residual_R : (1.0 + L * residual_R) * delta;
}

}  // namespace sres
