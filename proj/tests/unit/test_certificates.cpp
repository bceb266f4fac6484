#include <doctest.h>

#include <cmath>
#include <random>

#include "sres/certificates.hpp"
#include "sres/imaging.hpp"

using namespace sres;

namespace {

double max_term_mismatch(const Window& w, const Certificate& c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        Point p{u(rng), u(rng)};
        worst = std::max(worst, std::abs(c.eval(w, p) - c.eval_terms(w, p)));
    }
    return worst;
}

}  // namespace

TEST_CASE("plateau targets") {
    PlateauTarget z = zero_plateau({0.3, 0.7}, {0}, 0.1);
    CHECK(z.value(0.35) == 0);
    CHECK(z.value(0.7) == 1);
    CHECK(z.value(0.5) == 1);
    CHECK(z.upper(0.4) == 1);  // closed plateau edge, outside value nearby
    PlateauTarget b = bump_plateau({0.3, 0.7}, 1, -1.0, 0.1);
    CHECK(b.value(0.7) == -1);
    CHECK(b.value(0.3) == 0);
    CHECK(b.sup() == 0);
}

TEST_CASE("vanishing polynomial without zeros") {
    Window w = Window::gaussian({0.0, 0.5, 1.0}, 0.2);
    UnivariatePoly q = univariate_vanishing(w, {}, 0.3);
    CHECK(q(w, 0.3) == doctest::Approx(1.0));
    double mn = 1e9;
    for (int i = 0; i <= 2048; ++i) mn = std::min(mn, q(w, i / 2048.0));
    CHECK(mn > 0);
}

TEST_CASE("vanishing polynomial with a double zero at the middle") {
    Window w = Window::gaussian({0.0, 0.5, 1.0}, 0.2);
    UnivariatePoly q = univariate_vanishing(w, {0.5});
    CHECK(std::abs(q(w, 0.5)) <= 1e-10);
    CHECK(std::abs(q.deriv(w, 0.5)) <= 1e-9);
    double mn = 1e9, at = -1;
    for (int i = 0; i < 2048; ++i) {
        double t = i / 2047.0, v = q(w, t);
        if (v < mn) mn = v, at = t;
    }
    CHECK(std::abs(at - 0.5) <= 1e-3);
    CHECK_THROWS_AS(univariate_vanishing(w, {0.3, 0.6}), Error);
    CHECK_THROWS_AS(univariate_vanishing(w, {0.5}, 0.5), Error);
}

TEST_CASE("monomial vanishing polynomials are products of squares") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Window mono3 = Window::monomial(3);
    UnivariatePoly q = univariate_vanishing(mono3, {0.5});
    double scale = q(mono3, 0.0) / 0.25;
    for (int i = 0; i < 100; ++i) {
        double t = u(rng);
        double expect = scale * (t - 0.5) * (t - 0.5);
        CHECK(std::abs(q(mono3, t) - expect) <= 1e-8 * std::max(1e-3, std::abs(expect)) + 1e-12);
    }
    Window mono5 = Window::monomial(5);
    UnivariatePoly q2 = univariate_vanishing(mono5, {0.3, 0.7});
    double s2 = q2(mono5, 0.0) / (0.09 * 0.49);
    for (int i = 0; i < 100; ++i) {
        double t = u(rng);
        double expect = s2 * std::pow((t - 0.3) * (t - 0.7), 2);
        CHECK(std::abs(q2(mono5, t) - expect) <= 1e-8 * std::max(1e-3, std::abs(expect)) + 1e-12);
    }
}

TEST_CASE("dominating polynomial for an all-zero plateau") {
    Window w = Window::gaussian_uniform(6, 0.2);
    std::vector<double> T{0.3, 0.7};
    PlateauTarget F = zero_plateau(T, {0, 1}, 0.1);
    DominatingResult r = univariate_dominating(w, T, F);
    for (double t : T) {
        CHECK(std::abs(r.poly(w, t)) < 1e-9);
        CHECK(std::abs(r.poly.deriv(w, t)) < 1e-7);
    }
    for (int i = 0; i < 2048; ++i) {
        double t = i / 2047.0;
        double v = r.poly(w, t);
        CHECK(v >= F.value(t) - 1e-9);
        if (std::abs(t - 0.3) > 0.1 + 1e-12 && std::abs(t - 0.7) > 0.1 + 1e-12) CHECK(v >= 1 - 1e-9);
    }
    CHECK(r.min_slack >= -1e-9);
}

TEST_CASE("dominating polynomial for a negative bump") {
    Window w = Window::gaussian_uniform(6, 0.2);
    std::vector<double> T{0.3, 0.7};
    PlateauTarget F = bump_plateau(T, 0, -1.0, 0.1);
    DominatingResult r = univariate_dominating(w, T, F);
    CHECK(r.poly(w, 0.3) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(std::abs(r.poly(w, 0.7)) < 1e-9);
    for (int i = 0; i < 2048; ++i) {
        double t = i / 2047.0;
        CHECK(r.poly(w, t) >= F.value(t) - 1e-9);
    }
}

TEST_CASE("dominating polynomial without interior nodes is a lifted constant") {
    Window w = Window::gaussian_uniform(4, 0.2);
    PlateauTarget F{{}, 0.1, 0.0, 1.0};
    DominatingResult r = univariate_dominating(w, {}, F);
    for (int i = 0; i < 200; ++i) CHECK(r.poly(w, i / 199.0) >= 1.0 - 1e-9);
}

TEST_CASE("noiseless certificate") {
    for (int K = 1; K <= 3; ++K) {
        Window w = Window::gaussian_uniform(2 * K + 1, 0.2);
        std::vector<Atom> atoms;
        const double ts[] = {0.25, 0.5, 0.75}, ss[] = {0.6, 0.2, 0.45};
        for (int k = 0; k < K; ++k) atoms.push_back({{ts[k], ss[k]}, 1.0});
        AtomicMeasure sup(atoms);
        CertificateOptions opts;
        opts.grid = 256;
        Certificate Q = assemble_Q_noiseless(w, sup, opts);
        CHECK(Q.report.passed);
        CHECK(Q.terms.size() == (std::size_t{1} << K));
        CHECK(Q.report.metrics.at("support_max_abs") <= 1e-8);
        CHECK(Q.report.metrics.at("far_min") > 0);
        if (K >= 2) CHECK(Q.report.metrics.at("cross_min") > 0);
        CHECK(max_term_mismatch(w, Q, 5) <= 1e-10);
    }
}

TEST_CASE("noisy certificate for a single atom") {
    Window w = Window::gaussian_uniform(4, 0.2);
    AtomicMeasure sup({{{0.45, 0.6}, 1.0}});
    Certificate Q = assemble_Q_noisy(w, sup, 0.1);
    CHECK(Q.report.passed);
    CHECK(Q.gbar == doctest::Approx(0.5));
    CHECK(Q.report.metrics.at("off_min") >= 0.5 * (1 - 1e-6));
    CHECK(Q.report.metrics.at("far_min") >= 2.0 * (1 - 1e-6));
    if (!Q.terms.empty()) CHECK(max_term_mismatch(w, Q, 6) <= 1e-10);
}

TEST_CASE("noisy certificate for two atoms") {
    Window w = Window::gaussian_uniform(6, 0.2);
    AtomicMeasure sup({{{0.3, 0.3}, 1.0}, {{0.7, 0.6}, 1.0}});
    Certificate Q = assemble_Q_noisy(w, sup, 0.1);
    CHECK(Q.report.passed);
    CHECK(Q.gbar == doctest::Approx(1.0));
    CHECK(Q.report.metrics.at("far_min") >= 4.0 * (1 - 1e-6));
}

TEST_CASE("Q0 certificates") {
    SUBCASE("single atom, negative sign") {
        Window w = Window::gaussian_uniform(4, 0.2);
        AtomicMeasure sup({{{0.5, 0.4}, 1.0}});
        Certificate Q0 = assemble_Q0(w, sup, 0.1, {-1});
        CHECK(Q0.report.passed);
        CHECK(Q0.eval(w, {0.5, 0.4}) == doctest::Approx(-1.0).epsilon(1e-8));
        Eigen::MatrixXd V = Q0.grid_values(w, 128);
        for (int i = 0; i < 128; ++i)
            for (int l = 0; l < 128; ++l) {
                double t = i / 127.0, s = l / 127.0;
                if (std::max(std::abs(t - 0.5), std::abs(s - 0.4)) > 0.1) CHECK(V(i, l) >= -1e-8);
            }
    }
    SUBCASE("two atoms, all patterns") {
        Window w = Window::gaussian_uniform(6, 0.2);
        AtomicMeasure sup({{{0.3, 0.3}, 1.0}, {{0.7, 0.6}, 1.0}});
        for (int a : {1, -1})
            for (int b : {1, -1}) {
                CertificateOptions opts;
                opts.grid = 256;
                Certificate Q0 = assemble_Q0(w, sup, 0.1, {a, b}, opts);
                CHECK(Q0.report.passed);
                CHECK(Q0.report.metrics.at("support_max_err") <= 1e-8);
                CHECK(Q0.report.metrics.at("cross_max_err") <= 1e-8);
                CHECK(Q0.report.metrics.at("min_slack") >= -1e-8);
            }
    }
    Window w = Window::gaussian_uniform(4, 0.2);
    CHECK_THROWS_AS(assemble_Q0(w, AtomicMeasure({{{0.5, 0.4}, 1.0}}), 0.1, {0}), Error);
    CHECK_THROWS_AS(assemble_Q0(w, AtomicMeasure({{{0.5, 0.4}, 1.0}}), 0.1, {1, 1}), Error);
}

TEST_CASE("certificate preconditions") {
    Window w = Window::gaussian_uniform(4, 0.2);
    AtomicMeasure two({{{0.3, 0.3}, 1.0}, {{0.7, 0.6}, 1.0}});
    CHECK_THROWS_AS(assemble_Q_noisy(w, two, 0.1), Error);  // needs M >= 6
    CHECK_THROWS_AS(assemble_Q_noisy(Window::gaussian_uniform(6, 0.2), two, 0.35), Error);  // sep < eps
}

TEST_CASE("neighborhood signs and error constants") {
    AtomicMeasure approx({{{0.3, 0.3}, 1.0}, {{0.7, 0.6}, 1.0}});
    AtomicMeasure xhat({{{0.31, 0.3}, 1.2}, {{0.7, 0.61}, 0.8}});
    CHECK(neighborhood_signs(xhat, approx, 0.1) == std::vector<int>{1, -1});

    Certificate Q, Q0;
    Q.b = Eigen::MatrixXd::Identity(2, 2);  // |b| = sqrt(2)
    Q.gbar = 2.0;
    Q0.b = Eigen::MatrixXd::Identity(2, 2) * 2;  // |b0| = sqrt(8)
    ErrorConstants ec = error_constants(Q, Q0, 0.0, 2.0);
    CHECK(ec.c2 == doctest::Approx(1.0));
    CHECK(ec.c3 == doctest::Approx(1.0));
    CHECK(ec.c1 == doctest::Approx(10 * std::sqrt(2.0) + 6 * std::sqrt(8.0)));
    CHECK(ec.mass_bound_coeff == doctest::Approx(7 * std::sqrt(2.0) + 6 * std::sqrt(8.0)));
    CHECK(ec.mass_bound_coeff < ec.c1);
    ErrorConstants e2 = error_constants(Q, Q0, 3.0, 2.0);
    CHECK(e2.c3 == doctest::Approx(3 * (10 * std::sqrt(2.0) + 6 * std::sqrt(8.0)) + 1));
}

TEST_CASE("bounds check on trivial and exact recoveries") {
    Window w = Window::gaussian_uniform(4, 0.2);
    AtomicMeasure sup({{{0.45, 0.6}, 1.0}});
    Certificate Q = assemble_Q_noisy(w, sup, 0.1);
    Certificate Q0 = assemble_Q0(w, sup, 0.1, {1});
    BoundsCheck bc = error_bounds_check(sup, sup, 0.1, Q, Q0, 0.0);
    CHECK(bc.off_lhs == 0);
    CHECK(bc.near_lhs == 0);
    CHECK(bc.passed);
    BoundsCheck bc2 = error_bounds_check(sup, sup, 0.1, Q, Q0, 1e-8);
    CHECK(bc2.off_slack >= 0);
    CHECK(bc2.near_slack >= 0);
}
