// SPDX-License-Identifier: MIT
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srkd/core.hpp"

namespace srkd {

enum class Op : std::uint8_t {
    Constant,
    Variable,
    Add,
    Sub,
    Mul,
    Div,
    Log,
    Sin,
};

constexpr auto arity(Op op) noexcept -> int
{
    switch (op) {
    case Op::Constant:
    case Op::Variable:
        return 0;
    case Op::Log:
    case Op::Sin:
        return 1;
    default:
        return 2;
    }
}

struct Node {
    Op op { Op::Constant };
    double value { 0.0 };       // Constant
    std::uint32_t feature { 0 }; // Variable

    friend auto operator==(Node const&, Node const&) -> bool = default;
};

namespace protect {
    inline constexpr double kGuard = 1e-9;

    // Overflow saturates to +-max double so every intermediate stays finite.
    auto saturate(double x) noexcept -> double;
    // a / b, or 1 when |b| <= 1e-9
    auto div(double a, double b) noexcept -> double;
    // log|x|, or 0 when |x| <= 1e-9
    auto log(double x) noexcept -> double;
} // namespace protect

// Expression tree stored as a flat prefix-order node array. Value type;
// structural equality compares the node arrays.
class Expression {
public:
    Expression() = default;
    // Throws std::invalid_argument if `nodes` is not exactly one well-formed
    // prefix tree or holds a non-finite constant.
    explicit Expression(std::vector<Node> nodes);

    static auto constant(double value) -> Expression;
    static auto variable(std::uint32_t feature) -> Expression;
    static auto unary(Op op, Expression const& child) -> Expression;
    static auto binary(Op op, Expression const& lhs, Expression const& rhs) -> Expression;

    // Canonical infix form, e.g. "((x0 + sin(x1)) / 2.5)".
    static auto parse(std::string_view text) -> Expression;
    [[nodiscard]] auto to_string() const -> std::string;

    [[nodiscard]] auto nodes() const -> std::span<Node const> { return nodes_; }
    [[nodiscard]] auto size() const -> std::size_t { return nodes_.size(); }
    [[nodiscard]] auto empty() const -> bool { return nodes_.empty(); }

    // One past the last node of the subtree rooted at `i`.
    [[nodiscard]] auto subtree_end(std::size_t i) const -> std::size_t;
    // Copy with the subtree at `i` replaced by `replacement`.
    [[nodiscard]] auto replace_subtree(std::size_t i, std::span<Node const> replacement) const -> Expression;
    [[nodiscard]] auto subtree(std::size_t i) const -> std::span<Node const>;

    // Highest referenced feature index + 1 (0 for variable-free trees).
    [[nodiscard]] auto required_features() const -> std::size_t;

    // Column-wise evaluation over every row of X.
    [[nodiscard]] auto evaluate(Matrix const& X) const -> Vector;

    friend auto operator==(Expression const&, Expression const&) -> bool = default;

private:
    std::vector<Node> nodes_;
};

// Throws std::out_of_range when the expression references a feature >= X.cols().
auto eval_expr(Expression const& expr, Matrix const& X) -> Vector;

inline auto complexity(Expression const& expr) -> std::size_t { return expr.size(); }

} // namespace srkd
