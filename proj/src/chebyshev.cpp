#include "sres/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace sres {

namespace {

using Real = boost::multiprecision::cpp_bin_float_100;
using Mat = std::vector<std::vector<Real>>;

Real phi(const Window& w, int m, const Real& t) {
    Real v;
    switch (w.kind()) {
    case Window::Kind::Gaussian: {
        Real u = (t - Real(w.centers()[m])) / Real(w.sigma());
        v = exp(-u * u);
        break;
    }
    case Window::Kind::Monomial:
        v = m == 0 ? Real(1) : pow(t, m);
        break;
    case Window::Kind::Tabulated: {
        const auto& nodes = w.nodes();
        const auto& row = w.table()[m];
        double td = static_cast<double>(t);
        if (td <= nodes.front()) {
            v = row.front();
        } else if (td >= nodes.back()) {
            v = row.back();
        } else {
            std::size_t hi = static_cast<std::size_t>(std::upper_bound(nodes.begin(), nodes.end(), td) - nodes.begin());
            std::size_t lo = hi - 1;
            Real f = (t - Real(nodes[lo])) / (Real(nodes[hi]) - Real(nodes[lo]));
            v = Real(row[lo]) + f * (Real(row[hi]) - Real(row[lo]));
        }
        break;
    }
    }
    return v * Real(w.scale(m));
}

void normalize_rows(Mat& A) {
    for (auto& row : A) {
        Real mx = 0;
        for (const Real& v : row) mx = std::max(mx, Real(abs(v)));
        if (mx > 0)
            for (Real& v : row) v /= mx;
    }
}

// LU with partial pivoting
Real det(Mat A) {
    const std::size_t n = A.size();
    Real d = 1;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (abs(A[r][c]) > abs(A[p][c])) p = r;
        if (A[p][c] == 0) return 0;
        if (p != c) {
            std::swap(A[p], A[c]);
            d = -d;
        }
        d *= A[c][c];
        for (std::size_t r = c + 1; r < n; ++r) {
            Real f = A[r][c] / A[c][c];
            if (f == 0) continue;
            for (std::size_t k = c; k < n; ++k) A[r][k] -= f * A[c][k];
        }
    }
    return d;
}

Mat minor_of(const Mat& A, std::size_t row, std::size_t col) {
    Mat B;
    for (std::size_t r = 0; r < A.size(); ++r) {
        if (r == row) continue;
        std::vector<Real> v;
        for (std::size_t c = 0; c < A[r].size(); ++c)
            if (c != col) v.push_back(A[r][c]);
        B.push_back(std::move(v));
    }
    return B;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace

TsystemReport check_tsystem(const Window& w, int trials, std::uint64_t seed) {
    if (trials < 1) throw Error("check_tsystem: trials must be >= 1");
    const int M = w.size();
    TsystemReport rep;
    rep.trials = trials;
    rep.min_abs_det = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Real zero_tol = Real(rep.zero_threshold);
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> tau(M);
        do {
            for (double& t : tau) t = unif(rng);
            std::sort(tau.begin(), tau.end());
        } while (std::adjacent_find(tau.begin(), tau.end()) != tau.end());
        Mat A(M, std::vector<Real>(M));
        for (int k = 0; k < M; ++k)
            for (int m = 0; m < M; ++m) A[k][m] = phi(w, m, Real(tau[k]));
        normalize_rows(A);
        Real d = det(A);
        double ad = static_cast<double>(abs(d));
        if (abs(d) <= zero_tol)
            ++rep.zero;
        else if (d > 0)
            ++rep.positive;
        else
            ++rep.negative;
        if (ad < rep.min_abs_det) {
            rep.min_abs_det = ad;
            rep.worst_sequence = tau;
        }
    }
    rep.passed = rep.zero == 0 && (rep.positive == 0 || rep.negative == 0);
    return rep;
}

AdmissibleSequence::AdmissibleSequence(std::vector<LimitPoint> limits, int singleton, int M, double h0)
    : limits_(std::move(limits)), singleton_(singleton), M_(M), h0_(h0) {
    if (M < 2 || M % 2 != 0) throw Error("admissible sequence: M must be a positive even integer");
    if (!(h0 > 0)) throw Error("admissible sequence: h0 must be positive");
    if (singleton < 0 || singleton >= static_cast<int>(limits_.size()))
        throw Error("admissible sequence: singleton index out of range");
    int total = 0, odd = 0;
    for (const LimitPoint& l : limits_) {
        if (l.multiplicity < 1) throw Error("admissible sequence: multiplicities must be positive");
        if (!(l.point > 0 && l.point < 1)) throw Error("admissible sequence: limit points must be interior");
        total += l.multiplicity;
        if (l.multiplicity % 2 != 0) ++odd;
    }
    if (total != M - 1) throw Error("admissible sequence: multiplicities must sum to M-1");
    if (odd != 1 || limits_[singleton].multiplicity != 1)
        throw Error("admissible sequence: exactly one limit point must appear once, all others an even number of times");
    const double single_point = limits_[singleton].point;
    std::sort(limits_.begin(), limits_.end(),
              [](const LimitPoint& a, const LimitPoint& b) { return a.point < b.point; });
    for (std::size_t i = 0; i < limits_.size(); ++i) {
        double end = limits_[i].point + (limits_[i].multiplicity - 1) * h0;
        double next = i + 1 < limits_.size() ? limits_[i + 1].point : 1.0;
        if (!(end < next)) throw Error("admissible sequence: clusters overlap; reduce h0");
    }
    row_ = 1;
    for (const LimitPoint& l : limits_)
        if (l.point < single_point) row_ += l.multiplicity;
}

std::vector<double> AdmissibleSequence::sequence(int n) const {
    if (n < 1) throw Error("admissible sequence: n must be >= 1");
    const double h = h0_ / n;
    std::vector<double> tau{0.0};
    for (const LimitPoint& l : limits_)
        for (int r = 0; r < l.multiplicity; ++r) tau.push_back(l.point + r * h);
    tau.push_back(1.0);
    return tau;
}

AdmissibleSequence make_admissible(std::vector<LimitPoint> limits, int singleton, int M, double h0) {
    return AdmissibleSequence(std::move(limits), singleton, M, h0);
}

TstarReport check_tstar(const PlateauTarget& F, const Window& w, const AdmissibleSequence& seq,
                        const std::vector<int>& n_values) {
    if (n_values.size() < 4) throw Error("check_tstar: need at least 4 values of n");
    for (std::size_t i = 1; i < n_values.size(); ++i)
        if (n_values[i] <= n_values[i - 1]) throw Error("check_tstar: n values must increase");
    if (w.size() != seq.M()) throw Error("check_tstar: window size must equal the sequence M");
    const int M = w.size();
    const std::size_t row = static_cast<std::size_t>(seq.singleton_row());

    TstarReport rep;
    rep.n_values = n_values;
    rep.part2_applicable = true;
    std::vector<double> logn;
    std::vector<std::vector<double>> logs(M + 1);
    for (int n : n_values) {
        std::vector<double> tau = seq.sequence(n);
        Mat A(M + 1, std::vector<Real>(M + 1));
        for (int k = 0; k <= M; ++k) {
            A[k][0] = Real(F.value(tau[k]));
            for (int m = 0; m < M; ++m) A[k][m + 1] = phi(w, m, Real(tau[k]));
        }
        normalize_rows(A);
        rep.determinants.push_back(static_cast<double>(det(A)));
        std::vector<double> lm(M + 1);
        for (int c = 0; c <= M; ++c) {
            Real d = abs(det(minor_of(A, row, c)));
            if (d <= Real(1e-80)) {
                rep.part2_applicable = false;
                lm[c] = -std::numeric_limits<double>::infinity();
            } else {
                lm[c] = static_cast<double>(log(d));
            }
            logs[c].push_back(lm[c]);
        }
        rep.log_minors.push_back(lm);
        logn.push_back(std::log(static_cast<double>(n)));
    }
    rep.part1 = rep.determinants.back() >= -rep.det_tolerance;
    if (rep.part2_applicable) {
        for (int c = 0; c <= M; ++c) rep.slopes.push_back(fit_slope(logn, logs[c]));
        auto [lo, hi] = std::minmax_element(rep.slopes.begin(), rep.slopes.end());
        rep.slope_spread = *hi - *lo;
        rep.part2 = rep.slope_spread <= rep.slope_tolerance;
    } else {
        rep.note = "vanishing minors along the singleton row; rate comparison does not apply";
    }
    rep.passed = rep.part1 && rep.part2_applicable && rep.part2;
    return rep;
}

}  // namespace sres
