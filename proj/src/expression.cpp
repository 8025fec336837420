// SPDX-License-Identifier: MIT
#include "srkd/expression.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include <Eigen/Core>
#include <fmt/format.h>

namespace srkd {

namespace protect {
    auto saturate(double x) noexcept -> double
    {
        if (std::isfinite(x)) {
            return x;
        }
        if (std::isnan(x)) {
            return 0.0;
        }
        return std::copysign(std::numeric_limits<double>::max(), x);
    }

    auto div(double a, double b) noexcept -> double
    {
        return std::abs(b) > kGuard ? saturate(a / b) : 1.0;
    }

    auto log(double x) noexcept -> double
    {
        return std::abs(x) > kGuard ? std::log(std::abs(x)) : 0.0;
    }
} // namespace protect

namespace {

    auto symbol(Op op) -> char
    {
        switch (op) {
        case Op::Add:
            return '+';
        case Op::Sub:
            return '-';
        case Op::Mul:
            return '*';
        case Op::Div:
            return '/';
        default:
            return '?';
        }
    }

    // Returns one past the end of the subtree rooted at i, or npos when malformed.
    auto scan(std::span<Node const> nodes, std::size_t i) -> std::size_t
    {
        std::size_t open = 1;
        for (; i < nodes.size(); ++i) {
            open += static_cast<std::size_t>(arity(nodes[i].op));
            if (--open == 0) {
                return i + 1;
            }
        }
        return std::string::npos;
    }

    void render(std::span<Node const> nodes, std::size_t& i, std::string& out)
    {
        auto const& n = nodes[i++];
        switch (n.op) {
        case Op::Constant:
            out += fmt::format("{}", n.value);
            return;
        case Op::Variable:
            out += fmt::format("x{}", n.feature);
            return;
        case Op::Log:
        case Op::Sin:
            out += n.op == Op::Log ? "log(" : "sin(";
            render(nodes, i, out);
            out += ')';
            return;
        default:
            out += '(';
            render(nodes, i, out);
            out += ' ';
            out += symbol(n.op);
            out += ' ';
            render(nodes, i, out);
            out += ')';
        }
    }

    class Parser {
    public:
        explicit Parser(std::string_view text)
            : text_(text)
        {
        }

        auto run() -> std::vector<Node>
        {
            std::vector<Node> nodes;
            expr(nodes);
            skip();
            if (pos_ != text_.size()) {
                fail("trailing characters");
            }
            return nodes;
        }

    private:
        [[noreturn]] void fail(std::string_view what) const
        {
            throw std::invalid_argument(fmt::format("cannot parse expression '{}' at offset {}: {}", text_, pos_, what));
        }

        void skip()
        {
            while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) {
                ++pos_;
            }
        }

        auto consume(std::string_view token) -> bool
        {
            skip();
            if (text_.substr(pos_, token.size()) == token) {
                pos_ += token.size();
                return true;
            }
            return false;
        }

        void expect(char c)
        {
            if (!consume(std::string_view(&c, 1))) {
                fail(fmt::format("expected '{}'", c));
            }
        }

        void expr(std::vector<Node>& out)
        {
            skip();
            if (pos_ >= text_.size()) {
                fail("unexpected end of input");
            }
            if (consume("(")) {
                auto const at = out.size();
                out.push_back({});
                expr(out);
                skip();
                if (pos_ >= text_.size()) {
                    fail("missing operator");
                }
                Op op {};
                switch (text_[pos_]) {
                case '+':
                    op = Op::Add;
                    break;
                case '-':
                    op = Op::Sub;
                    break;
                case '*':
                    op = Op::Mul;
                    break;
                case '/':
                    op = Op::Div;
                    break;
                default:
                    fail("unknown binary operator");
                }
                ++pos_;
                expr(out);
                expect(')');
                out[at].op = op;
                return;
            }
            for (auto [name, op] : { std::pair { std::string_view("sin("), Op::Sin }, std::pair { std::string_view("log("), Op::Log } }) {
                if (consume(name)) {
                    out.push_back({ op, 0.0, 0 });
                    expr(out);
                    expect(')');
                    return;
                }
            }
            if (text_[pos_] == 'x') {
                ++pos_;
                std::uint32_t feature = 0;
                auto const [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), feature);
                if (ec != std::errc {}) {
                    fail("bad variable index");
                }
                pos_ = static_cast<std::size_t>(ptr - text_.data());
                out.push_back({ Op::Variable, 0.0, feature });
                return;
            }
            double value = 0.0;
            auto const [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
            if (ec != std::errc {} || !std::isfinite(value)) {
                fail("expected a number, variable, or sub-expression");
            }
            pos_ = static_cast<std::size_t>(ptr - text_.data());
            out.push_back({ Op::Constant, value, 0 });
        }

        std::string_view text_;
        std::size_t pos_ { 0 };
    };

} // namespace

Expression::Expression(std::vector<Node> nodes)
    : nodes_(std::move(nodes))
{
    if (nodes_.empty() || scan(nodes_, 0) != nodes_.size()) {
        throw std::invalid_argument("node array is not a single well-formed prefix tree");
    }
    for (auto const& n : nodes_) {
        if (n.op == Op::Constant && !std::isfinite(n.value)) {
            throw std::invalid_argument("expression constants must be finite");
        }
    }
}

auto Expression::constant(double value) -> Expression
{
    return Expression({ Node { Op::Constant, value, 0 } });
}

auto Expression::variable(std::uint32_t feature) -> Expression
{
    return Expression({ Node { Op::Variable, 0.0, feature } });
}

auto Expression::unary(Op op, Expression const& child) -> Expression
{
    if (arity(op) != 1) {
        throw std::invalid_argument("not a unary operator");
    }
    std::vector<Node> nodes { Node { op, 0.0, 0 } };
    nodes.insert(nodes.end(), child.nodes_.begin(), child.nodes_.end());
    return Expression(std::move(nodes));
}

auto Expression::binary(Op op, Expression const& lhs, Expression const& rhs) -> Expression
{
    if (arity(op) != 2) {
        throw std::invalid_argument("not a binary operator");
    }
    std::vector<Node> nodes { Node { op, 0.0, 0 } };
    nodes.insert(nodes.end(), lhs.nodes_.begin(), lhs.nodes_.end());
    nodes.insert(nodes.end(), rhs.nodes_.begin(), rhs.nodes_.end());
    return Expression(std::move(nodes));
}

auto Expression::parse(std::string_view text) -> Expression
{
    return Expression(Parser(text).run());
}

auto Expression::to_string() const -> std::string
{
    std::string out;
    if (!nodes_.empty()) {
        std::size_t i = 0;
        render(nodes_, i, out);
    }
    return out;
}

auto Expression::subtree_end(std::size_t i) const -> std::size_t
{
    return scan(nodes_, i);
}

auto Expression::subtree(std::size_t i) const -> std::span<Node const>
{
    return std::span<Node const>(nodes_).subspan(i, subtree_end(i) - i);
}

auto Expression::replace_subtree(std::size_t i, std::span<Node const> replacement) const -> Expression
{
    auto const end = subtree_end(i);
    std::vector<Node> nodes;
    nodes.reserve(nodes_.size() - (end - i) + replacement.size());
    nodes.insert(nodes.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(i));
    nodes.insert(nodes.end(), replacement.begin(), replacement.end());
    nodes.insert(nodes.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(end), nodes_.end());
    Expression out;
    out.nodes_ = std::move(nodes);
    return out;
}

auto Expression::required_features() const -> std::size_t
{
    std::size_t n = 0;
    for (auto const& node : nodes_) {
        if (node.op == Op::Variable) {
            n = std::max<std::size_t>(n, node.feature + 1U);
        }
    }
    return n;
}

auto Expression::evaluate(Matrix const& X) const -> Vector
{
    if (required_features() > static_cast<std::size_t>(X.cols())) {
        throw std::out_of_range(fmt::format("expression references x{} but data has {} columns",
            required_features() - 1, X.cols()));
    }
    auto const rows = X.rows();
    Eigen::ArrayXXd stack(rows, static_cast<Index>(nodes_.size()));
    Index top = 0;
    auto fix = [](auto&& col) {
        if (!col.allFinite()) {
            col = col.unaryExpr([](double v) { return protect::saturate(v); });
        }
    };
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        switch (it->op) {
        case Op::Constant:
            stack.col(top++).setConstant(it->value);
            break;
        case Op::Variable:
            stack.col(top++) = X.col(it->feature).array();
            break;
        case Op::Sin: {
            auto col = stack.col(top - 1);
            col = col.sin();
            break;
        }
        case Op::Log: {
            auto col = stack.col(top - 1);
            col = (col.abs() > protect::kGuard).select(col.abs().log(), 0.0);
            break;
        }
        default: {
            auto lhs = stack.col(top - 1);
            auto rhs = stack.col(top - 2);
            switch (it->op) {
            case Op::Add:
                rhs = lhs + rhs;
                break;
            case Op::Sub:
                rhs = lhs - rhs;
                break;
            case Op::Mul:
                rhs = lhs * rhs;
                break;
            default: // Div
                rhs = (rhs.abs() > protect::kGuard).select(lhs / rhs, 1.0);
                break;
            }
            fix(rhs);
            --top;
        }
        }
    }
    return stack.col(0).matrix();
}

auto eval_expr(Expression const& expr, Matrix const& X) -> Vector
{
    return expr.evaluate(X);
}

} // namespace srkd
