// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "srkd/density.hpp"

using namespace srkd;

namespace {

// Plain double loop over the mixture, no log-sum-exp.
auto naive_log_density(Matrix const& ref, Vector const& x, double h) -> double
{
    auto const d = static_cast<double>(ref.cols());
    double sum = 0.0;
    for (Index i = 0; i < ref.rows(); ++i) {
        double sq = 0.0;
        for (Index k = 0; k < ref.cols(); ++k) {
            sq += (x(k) - ref(i, k)) * (x(k) - ref(i, k));
        }
        sum += std::exp(-sq / (2.0 * h * h));
    }
    return std::log(sum / static_cast<double>(ref.rows())) - 0.5 * d * std::log(2.0 * std::numbers::pi * h * h);
}

auto column(std::initializer_list<double> v) -> Matrix
{
    Matrix m(static_cast<Index>(v.size()), 1);
    Index i = 0;
    for (double x : v) {
        m(i++, 0) = x;
    }
    return m;
}

} // namespace

TEST_CASE("single kernel closed form")
{
    auto const m = DensityModel::fit(column({ 0.0 }), 1.0, 0.10);
    CHECK(m.log_density(Vector::Zero(1)) == doctest::Approx(-0.9189385332046727).epsilon(1e-12));
    CHECK(std::exp(m.log_density(Vector::Zero(1))) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
    Vector x(1);
    x << 3.0;
    CHECK(m.log_density(x) == doctest::Approx(-0.9189385332046727 - 4.5).epsilon(1e-12));
}

TEST_CASE("identical kernels average to one kernel")
{
    auto const one = DensityModel::fit(column({ 0.5 }), 0.7, 0.10);
    auto const two = DensityModel::fit(column({ 0.5, 0.5 }), 0.7, 0.10);
    for (double v : { -1.0, 0.5, 2.0 }) {
        Vector x(1);
        x << v;
        CHECK(two.log_density(x) == doctest::Approx(one.log_density(x)).epsilon(1e-14));
    }
}

TEST_CASE("far points underflow gracefully")
{
    auto const m = DensityModel::fit(column({ -1.0, 0.0, 1.0 }), 0.3, 0.10);
    Vector x(1);
    x << 1e3;
    auto const ld = m.log_density(x);
    CHECK(std::isfinite(ld));
    // the kernel at 1.0 dominates; the others are below exp(-1e4) relative to it
    auto const nearest = -999.0 * 999.0 / (2.0 * 0.09) - 0.5 * std::log(2.0 * std::numbers::pi * 0.09) - std::log(3.0);
    CHECK(ld == doctest::Approx(nearest).epsilon(1e-12));
    CHECK(m.is_extrapolation(x));
}

TEST_CASE("three points: centre is inside, 5 is outside")
{
    auto const m = DensityModel::fit(column({ -1.0, 0.0, 1.0 }), 0.3, 0.10);
    Vector a(1);
    a << 0.0;
    Vector b(1);
    b << 5.0;
    CHECK_FALSE(m.is_extrapolation(a));
    CHECK(m.is_extrapolation(b));
}

TEST_CASE("percentile rule on ten points flags only the lowest")
{
    // Scores are monotone in |x| on this layout; the outermost point is unique.
    auto const m = DensityModel::fit(column({ -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 1.5 }), 0.3, 0.10);
    auto const flagged = m.low_density_subset(m.reference_points());
    REQUIRE(flagged.size() == 1);
    CHECK(flagged[0] == 9);
}

TEST_CASE("percentile_linear interpolates")
{
    CHECK(percentile_linear({ 1, 2, 3, 4, 5 }, 0.0) == 1.0);
    CHECK(percentile_linear({ 5, 4, 3, 2, 1 }, 1.0) == 5.0);
    CHECK(percentile_linear({ 1, 2, 3, 4, 5 }, 0.5) == 3.0);
    CHECK(percentile_linear({ 0, 10 }, 0.25) == doctest::Approx(2.5));
}

TEST_CASE("hundred references: exactly the ten lowest flag")
{
    Rng rng(17);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix ref(100, 2);
    for (Index i = 0; i < ref.rows(); ++i) {
        ref(i, 0) = g(rng);
        ref(i, 1) = g(rng);
    }
    auto const m = DensityModel::fit(ref, 0.3, 0.10);
    std::vector<std::pair<double, Index>> scored;
    for (Index i = 0; i < 100; ++i) {
        scored.emplace_back(naive_log_density(ref, ref.row(i).transpose(), 0.3), i);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<Index> expected;
    for (std::size_t i = 0; i < 10; ++i) {
        expected.push_back(scored[i].second);
    }
    std::sort(expected.begin(), expected.end());
    CHECK(m.low_density_subset(ref) == expected);
}

TEST_CASE("grid boundary points are selected first")
{
    Matrix grid(20, 1);
    for (Index i = 0; i < 20; ++i) {
        grid(i, 0) = -1.0 + 2.0 * static_cast<double>(i) / 19.0;
    }
    auto const m = DensityModel::fit(grid, 0.3, 0.10);
    CHECK(m.low_density_subset(grid) == std::vector<Index> { 0, 19 });
}

TEST_CASE("limit cases")
{
    auto const ref = column({ -1.0, 0.0, 0.3, 1.0, 2.0 });
    CHECK(DensityModel::fit(ref, 0.3, 0.0).low_density_subset(ref).empty());
    auto const single = DensityModel::fit(column({ 4.0 }), 0.3, 0.99);
    CHECK(single.low_density_subset(single.reference_points()).empty());
    CHECK_THROWS((void)DensityModel::fit(ref, 0.0, 0.1));
    CHECK_THROWS((void)DensityModel::fit(ref, 0.3, 1.0));
    CHECK_THROWS((void)DensityModel::fit(Matrix(0, 1), 0.3, 0.1));
}

TEST_CASE("log-sum-exp matches the naive mixture")
{
    Rng rng(99);
    std::uniform_int_distribution<int> pick_n(1, 60);
    std::uniform_int_distribution<int> pick_d(1, 5);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        auto const n = pick_n(rng);
        auto const d = pick_d(rng);
        Matrix ref(n, d);
        for (Index i = 0; i < n; ++i) {
            for (Index k = 0; k < d; ++k) {
                ref(i, k) = g(rng);
            }
        }
        auto const m = DensityModel::fit(ref, 0.3, 0.10);
        Matrix Q(10, d);
        for (Index i = 0; i < 10; ++i) {
            for (Index k = 0; k < d; ++k) {
                Q(i, k) = 1.5 * g(rng);
            }
        }
        auto const batch = m.log_densities(Q);
        for (Index i = 0; i < 10; ++i) {
            Vector const q = Q.row(i).transpose();
            CHECK(batch(i) == doctest::Approx(naive_log_density(ref, q, 0.3)).epsilon(1e-10));
            CHECK(m.log_density(q) == batch(i));
        }
    }
}

TEST_CASE("density scores export")
{
    auto const m = DensityModel::fit(column({ -1.0, 0.0, 1.0 }), 0.3, 0.10);
    std::ostringstream out;
    write_density_scores(out, m, column({ 0.0, 5.0 }));
    auto const text = out.str();
    CHECK(text.rfind("index,score,flag\n", 0) == 0);
    CHECK(text.find("\n1,") != std::string::npos);
    CHECK(text.substr(text.size() - 2) == "1\n");
}
