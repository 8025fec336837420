// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "srkd/expression.hpp"

using namespace srkd;

namespace {

auto row(std::initializer_list<double> v) -> Matrix
{
    Matrix m(1, static_cast<Index>(v.size()));
    Index k = 0;
    for (double x : v) {
        m(0, k++) = x;
    }
    return m;
}

auto random_tree(Rng& rng, int depth, std::uint32_t features) -> Expression
{
    std::uniform_int_distribution<int> op(0, 7);
    std::uniform_real_distribution<double> c(-1e3, 1e3);
    auto const pick = depth <= 0 ? op(rng) % 2 : op(rng);
    switch (pick) {
    case 0: return Expression::constant(c(rng));
    case 1: return Expression::variable(static_cast<std::uint32_t>(rng() % features));
    case 2: return Expression::unary(Op::Log, random_tree(rng, depth - 1, features));
    case 3: return Expression::unary(Op::Sin, random_tree(rng, depth - 1, features));
    case 4: return Expression::binary(Op::Add, random_tree(rng, depth - 1, features), random_tree(rng, depth - 1, features));
    case 5: return Expression::binary(Op::Sub, random_tree(rng, depth - 1, features), random_tree(rng, depth - 1, features));
    case 6: return Expression::binary(Op::Mul, random_tree(rng, depth - 1, features), random_tree(rng, depth - 1, features));
    default: return Expression::binary(Op::Div, random_tree(rng, depth - 1, features), random_tree(rng, depth - 1, features));
    }
}

} // namespace

TEST_CASE("evaluation examples")
{
    auto const sum = Expression::binary(Op::Add, Expression::variable(0), Expression::variable(1));
    CHECK(eval_expr(sum, row({ 2, 3 }))(0) == 5.0);

    auto const div0 = Expression::binary(Op::Div, Expression::variable(0), Expression::constant(0.0));
    CHECK(eval_expr(div0, row({ 7 }))(0) == 1.0);

    auto const lg = Expression::unary(Op::Log, Expression::variable(0));
    CHECK(eval_expr(lg, row({ -std::numbers::e }))(0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(eval_expr(lg, row({ 0.0 }))(0) == 0.0);

    Matrix X(2, 2);
    X << 1, 2, 3, 4;
    auto const y = eval_expr(sum, X);
    CHECK(y(0) == 3.0);
    CHECK(y(1) == 7.0);
}

TEST_CASE("protected operator guards")
{
    CHECK(protect::div(3.0, 1e-9) == 1.0);
    CHECK(protect::div(3.0, -1e-10) == 1.0);
    CHECK(protect::div(3.0, 2e-9) == doctest::Approx(1.5e9));
    CHECK(protect::log(1e-9) == 0.0);
    CHECK(protect::log(-1e-10) == 0.0);
    CHECK(protect::log(std::exp(2.0)) == doctest::Approx(2.0));
    CHECK(protect::saturate(std::numeric_limits<double>::infinity()) == std::numeric_limits<double>::max());
    CHECK(protect::saturate(-std::numeric_limits<double>::infinity()) == std::numeric_limits<double>::lowest());
    CHECK(protect::saturate(std::numeric_limits<double>::quiet_NaN()) == 0.0);
}

TEST_CASE("complexity counts nodes")
{
    CHECK(complexity(Expression::constant(3.0)) == 1);
    CHECK(complexity(Expression::parse("(x0 + x1)")) == 3);
    auto const e = Expression::binary(Op::Add,
        Expression::unary(Op::Sin, Expression::binary(Op::Mul, Expression::variable(0), Expression::variable(1))),
        Expression::constant(2.5));
    CHECK(complexity(e) == 6);
    CHECK(e.to_string() == "(sin((x0 * x1)) + 2.5)");
}

TEST_CASE("parse and print round trip")
{
    for (auto const* text : { "((x0 + sin(x1)) / 2.5)", "log((x2 - -0.125))", "(x0 * (x0 * x0))", "7", "sin(sin(x3))" }) {
        auto const e = Expression::parse(text);
        CHECK(e.to_string() == text);
        CHECK(Expression::parse(e.to_string()) == e);
    }
    CHECK_THROWS((void)Expression::parse("(x0 +"));
    CHECK_THROWS((void)Expression::parse("cos(x0)"));
    CHECK_THROWS((void)Expression::parse("(x0 + x1) x2"));
}

TEST_CASE("random trees survive printing")
{
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        auto const e = random_tree(rng, 5, 3);
        CHECK(Expression::parse(e.to_string()) == e);
    }
}

TEST_CASE("malformed node arrays are rejected")
{
    CHECK_THROWS_AS(Expression(std::vector<Node> { { Op::Add } }), std::invalid_argument);
    CHECK_THROWS_AS(Expression(std::vector<Node> { { Op::Constant, 1.0 }, { Op::Constant, 2.0 } }), std::invalid_argument);
    CHECK_THROWS_AS(Expression(std::vector<Node> { { Op::Constant, std::numeric_limits<double>::infinity() } }),
        std::invalid_argument);
    CHECK_THROWS_AS((void)eval_expr(Expression::variable(3), row({ 1, 2 })), std::out_of_range);
}

TEST_CASE("subtree surgery")
{
    auto const e = Expression::parse("((x0 + sin(x1)) / 2.5)");
    // prefix: / + x0 sin x1 2.5
    CHECK(e.subtree_end(0) == 6);
    CHECK(e.subtree_end(1) == 5);
    CHECK(e.subtree_end(3) == 5);
    auto const replaced = e.replace_subtree(3, Expression::parse("(x1 * x1)").nodes());
    CHECK(replaced.to_string() == "((x0 + (x1 * x1)) / 2.5)");
    CHECK(Expression(std::vector<Node>(e.subtree(1).begin(), e.subtree(1).end())).to_string() == "(x0 + sin(x1))");
    CHECK(e.required_features() == 2);
    CHECK(Expression::constant(1.0).required_features() == 0);
}

TEST_CASE("evaluation is total on hostile inputs")
{
    Rng rng(42);
    Matrix X(8, 3);
    auto const big = std::numeric_limits<double>::max();
    X << 0, 0, 0, 1e-300, -1e-300, 1e300, big, -big, 1.0, -1e-9, 1e-9, 2e-9, 1e308, 1e308, -1e308, 3.0, -2.0, 0.5,
        std::numbers::pi, -std::numbers::pi, 1e-12, 700.0, -700.0, 1e154;
    for (int i = 0; i < 2000; ++i) {
        auto const e = random_tree(rng, 6, 3);
        auto const y = e.evaluate(X);
        REQUIRE(y.allFinite());
    }
}

TEST_CASE("column evaluation matches scalar composition")
{
    Rng rng(8);
    std::uniform_real_distribution<double> u(-3, 3);
    Matrix X(30, 2);
    for (Index i = 0; i < X.rows(); ++i) {
        X(i, 0) = u(rng);
        X(i, 1) = u(rng);
    }
    auto const e = Expression::parse("((sin(x0) * log(x1)) - (x0 / (x1 + 0.5)))");
    auto const y = e.evaluate(X);
    for (Index i = 0; i < X.rows(); ++i) {
        auto const ref = std::sin(X(i, 0)) * protect::log(X(i, 1)) - protect::div(X(i, 0), X(i, 1) + 0.5);
        CHECK(y(i) == doctest::Approx(ref).epsilon(1e-14));
    }
}
