#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "repshift/error.hpp"
#include "repshift/linalg.hpp"

using namespace repshift;

TEST_CASE("spectral_norm small cases") {
    Matrix d(2, 2);
    d << 3, 0, 0, 2;
    CHECK(spectral_norm(d) == doctest::Approx(3.0).epsilon(kSpectralTol));
    Matrix n(2, 2);
    n << 0, 1, 0, 0;
    CHECK(spectral_norm(n) == doctest::Approx(1.0).epsilon(kSpectralTol));
    CHECK(spectral_norm(Matrix::Zero(3, 4)) == 0.0);
}

TEST_CASE("spectral_norm matches SVD on seeded matrices") {
    std::mt19937_64 rng(5);
    const Matrix m = oracle::random_matrix(rng, 5, 5);
    CHECK(std::abs(spectral_norm(m) - oracle::svd_norm(m)) <= 1e-8 * oracle::svd_norm(m));
    std::uniform_int_distribution<int> dim(1, 20);
    for (int i = 0; i < 200; ++i) {
        const Matrix a = oracle::random_matrix(rng, dim(rng), dim(rng));
        const double ref = oracle::svd_norm(a);
        CHECK(std::abs(spectral_norm(a) - ref) <= 1e-8 * ref);
    }
}

TEST_CASE("spectral_norm is bounded by frobenius and homogeneous") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dim(1, 12);
    std::uniform_real_distribution<double> alpha(-5.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        const Matrix a = oracle::random_matrix(rng, dim(rng), dim(rng));
        const double s = spectral_norm(a);
        CHECK(s <= frobenius_norm(a) * (1.0 + 1e-12));
        if (i % 10 == 0) {
            const double al = alpha(rng);
            CHECK(std::abs(spectral_norm(al * a) - std::abs(al) * s) <= 1e-9 * std::abs(al) * s + 1e-300);
        }
    }
}

TEST_CASE("spectral_norm reports non-convergence with the last estimate") {
    std::mt19937_64 rng(3);
    const Matrix a = oracle::random_matrix(rng, 30, 30);
    try {
        spectral_norm(a, 1e-15, 2);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.last_estimate() > 0.0);
        CHECK(e.residual() >= 0.0);
    }
}

TEST_CASE("frobenius_norm") {
    CHECK(frobenius_norm(Matrix::Zero(2, 3)) == 0.0);
    Matrix m(1, 2);
    m << 3, 4;
    CHECK(frobenius_norm(m) == 5.0);
    std::mt19937_64 rng(2);
    const Matrix r = oracle::random_matrix(rng, 4, 6);
    CHECK(std::abs(frobenius_norm(r) - oracle::entrywise_frobenius(r)) <= 1e-12);
}

TEST_CASE("solve_right_alignment") {
    std::mt19937_64 rng(17);
    SUBCASE("identity source returns target") {
        const Matrix a = oracle::random_matrix(rng, 3, 4);
        const AlignmentFit fit = solve_right_alignment(Matrix::Identity(4, 4), a, 0.0);
        CHECK((fit.transform - a).norm() <= 1e-12);
        CHECK(fit.residual <= 1e-12);
    }
    SUBCASE("scalar") {
        const AlignmentFit fit = solve_right_alignment(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 6.0), 0.0);
        CHECK(fit.transform(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
    }
    SUBCASE("recovers a planted transform") {
        const Matrix t0 = oracle::random_matrix(rng, 3, 5);
        const Matrix src = oracle::random_matrix(rng, 5, 40);
        const AlignmentFit fit = solve_right_alignment(src, t0 * src, 0.0);
        CHECK((fit.transform - t0).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(fit.residual <= 1e-8);
    }
    SUBCASE("singular normal matrix without ridge") {
        Matrix src = oracle::random_matrix(rng, 4, 2);  // rank 2 < 4 rows
        CHECK_THROWS_AS(solve_right_alignment(src, oracle::random_matrix(rng, 3, 2), 0.0), NumericalError);
        CHECK_NOTHROW(solve_right_alignment(src, oracle::random_matrix(rng, 3, 2), default_alignment_ridge(src)));
    }
    SUBCASE("least-squares optimal against random candidates") {
        const Matrix src = oracle::random_matrix(rng, 4, 30);
        const Matrix tgt = oracle::random_matrix(rng, 3, 30);
        const AlignmentFit fit = solve_right_alignment(src, tgt, 0.0);
        CHECK(std::abs(fit.residual - (fit.transform * src - tgt).norm()) <= 1e-10);
        for (int i = 0; i < 100; ++i) {
            const Matrix cand = fit.transform + 0.3 * oracle::random_matrix(rng, 3, 4);
            CHECK(fit.residual <= (cand * src - tgt).norm());
        }
    }
}

TEST_CASE("shrinkage_minimizer") {
    std::mt19937_64 rng(23);
    const Matrix a = oracle::random_matrix(rng, 3, 3);
    CHECK((shrinkage_minimizer(a, 1.5, 1.5) - a / 2.0).norm() <= 1e-14);
    CHECK((shrinkage_minimizer(a, 1e-9, 1.0) - a).norm() <= 1e-12);
    const Matrix x = shrinkage_minimizer(a, 2.0, 1.0);
    CHECK((x - a / 5.0).norm() <= 1e-14);
    auto objective = [&](const Matrix& m) { return 4.0 * m.squaredNorm() + (m - a).squaredNorm(); };
    for (int i = 0; i < 100; ++i) {
        CHECK(objective(x + 0.05 * oracle::random_matrix(rng, 3, 3)) > objective(x));
    }
    CHECK(x.norm() <= a.norm());
    CHECK_THROWS_AS(shrinkage_minimizer(a, 0.0, 1.0), Error);
    CHECK_THROWS_AS(shrinkage_minimizer(a, 1.0, -1.0), Error);
}

TEST_CASE("shrinkage objective stays under the scalar bound c2‖A‖f(c1/c2)") {
    // Equality for scalar A, so only rounding separates the two sides.
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.05, 4.0);
    for (int i = 0; i < 200; ++i) {
        const double c1 = u(rng), c2 = u(rng), s = u(rng);
        const Matrix a = s * Matrix::Identity(3, 3);
        const Matrix x = shrinkage_minimizer(a, c1, c2);
        const double value = c1 * spectral_norm(x) + c2 * spectral_norm(x - a);
        const double w = c1 / c2;
        const double f = (w * w + w) / (w * w + 1.0);
        CHECK(value <= c2 * spectral_norm(a) * f * (1.0 + 1e-12));
    }
}

TEST_CASE("polyfit") {
    SUBCASE("exact quartic") {
        std::vector<double> xs, ys;
        for (int i = 0; i < 9; ++i) {
            const double x = -2.0 + 0.5 * i;
            xs.push_back(x);
            ys.push_back(x * x * x * x - 2 * x * x + 1);
        }
        const Polynomial p = polyfit(xs, ys, 4);
        const std::vector<double> c = p.monomial_coefficients();
        REQUIRE(c.size() == 5);
        const double expect[] = {1, 0, -2, 0, 1};
        for (int i = 0; i < 5; ++i) CHECK(std::abs(c[static_cast<std::size_t>(i)] - expect[i]) <= 1e-6);
    }
    SUBCASE("constant data") {
        std::vector<double> xs, ys;
        for (int i = 0; i < 10; ++i) {
            xs.push_back(i);
            ys.push_back(3.5);
        }
        const std::vector<double> c = polyfit(xs, ys, 4).monomial_coefficients();
        CHECK(c[0] == doctest::Approx(3.5).epsilon(1e-10));
        for (std::size_t i = 1; i < c.size(); ++i) CHECK(std::abs(c[i]) <= 1e-8);
    }
    SUBCASE("noisy quartic against the QR oracle") {
        std::mt19937_64 rng(31);
        std::normal_distribution<double> noise(0.0, 0.01);
        std::vector<double> xs, ys;
        for (int i = 0; i < 50; ++i) {
            const double x = i * 0.1;
            xs.push_back(x);
            ys.push_back(0.3 * x * x * x * x - x * x * x + 0.5 * x + 2 + noise(rng));
        }
        const Polynomial p = polyfit(xs, ys, 4);
        CHECK(residual_sum_of_squares(p, xs, ys) <= oracle::qr_polyfit_rss(xs, ys, 4) + 1e-9);
        double prev = INFINITY;
        for (int d = 0; d <= 6; ++d) {
            const double rss = residual_sum_of_squares(polyfit(xs, ys, d), xs, ys);
            CHECK(rss <= prev + 1e-12);
            prev = rss;
        }
    }
    SUBCASE("underdetermined") {
        const std::vector<double> xs{1, 1, 1, 2}, ys{0, 1, 2, 3};
        CHECK_THROWS_AS(polyfit(xs, ys, 4), Error);
        CHECK_THROWS_AS(polyfit(xs, ys, 2), Error);
    }
}

TEST_CASE("first_local_max") {
    auto fit = [](auto fn, double lo, double hi, int n, int degree) {
        std::vector<double> xs, ys;
        for (int i = 0; i < n; ++i) {
            const double x = lo + (hi - lo) * i / (n - 1);
            xs.push_back(x);
            ys.push_back(fn(x));
        }
        return polyfit(xs, ys, degree);
    };
    const Polynomial vertex = fit([](double x) { return -(x - 10) * (x - 10); }, 0, 50, 20, 2);
    const auto v = first_local_max(vertex, 0, 50);
    REQUIRE(v.has_value());
    CHECK(*v == doctest::Approx(10.0).epsilon(1e-8));

    const Polynomial line = fit([](double x) { return x; }, 0, 50, 20, 1);
    CHECK_FALSE(first_local_max(line, 0, 50).has_value());

    const Polynomial pade = fit([](double x) { return (x * x + x) / (x * x + 1); }, 0, 8, 81, 4);
    const auto m = first_local_max(pade, 0, 8);
    REQUIRE(m.has_value());
    CHECK(std::abs(*m - (1 + std::sqrt(2.0))) <= 0.1);

    // A centered difference of p changes sign + to − there.
    const double h = 1e-5;
    const double left = pade(*m) - pade(*m - 2 * h);
    const double right = pade(*m + 2 * h) - pade(*m);
    CHECK(left > 0.0);
    CHECK(right < 0.0);
}

TEST_CASE("linreg_r2") {
    const std::vector<double> xs{0, 1, 2, 3, 4}, ys{3, 5, 7, 9, 11};
    const LinearFit f = linreg_r2(xs, ys);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(f.r2 == doctest::Approx(1.0).epsilon(1e-14));

    const std::vector<double> x2{0, 1}, y2{0, 1};
    const LinearFit g = linreg_r2(x2, y2);
    CHECK(g.slope == doctest::Approx(1.0));
    CHECK(std::abs(g.intercept) <= 1e-15);
    CHECK(g.r2 == doctest::Approx(1.0));

    std::mt19937_64 rng(37);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> xr, yr;
    for (int i = 0; i < 200; ++i) {
        xr.push_back(n(rng));
        yr.push_back(n(rng));
    }
    const LinearFit u = linreg_r2(xr, yr);
    const double r = oracle::pearson(xr, yr);
    CHECK(std::abs(u.r2 - r * r) <= 1e-10);
    CHECK(u.r2 < 0.1);

    CHECK_THROWS_AS(linreg_r2(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), Error);
    const LinearFit c = linreg_r2(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4});
    CHECK(c.constant_y);
    CHECK(c.r2 == 1.0);
}

TEST_CASE("pearson and median") {
    CHECK(std::isnan(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5})));
    CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 7}) ==
          doctest::Approx(oracle::pearson({1, 2, 3}, {2, 4, 7})).epsilon(1e-14));
    CHECK(median({3, 1, 2}) == 2.0);
    CHECK(median({4, 1, 2, 3}) == 2.5);
}
