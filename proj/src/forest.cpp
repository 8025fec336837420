// SPDX-License-Identifier: MIT
#include "srkd/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace srkd {

void ForestConfig::validate() const
{
    if (n_trees == 0 || min_samples_leaf == 0) {
        throw ConfigError("forest n_trees and min_samples_leaf must be positive");
    }
}

RegressionTree::RegressionTree(std::vector<Node> nodes)
    : nodes_(std::move(nodes))
{
    if (nodes_.empty()) {
        throw std::invalid_argument("a regression tree needs at least one node");
    }
    auto const n = static_cast<std::int32_t>(nodes_.size());
    for (auto const& node : nodes_) {
        if (node.feature >= 0 && (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n)) {
            throw std::invalid_argument("regression tree has a dangling child index");
        }
    }
}

namespace {

    class TreeBuilder {
    public:
        TreeBuilder(Matrix const& X, Vector const& y, std::size_t max_depth, std::size_t min_leaf)
            : X_(X)
            , y_(y)
            , max_depth_(max_depth)
            , min_leaf_(min_leaf)
        {
        }

        auto build(std::vector<Index>& rows, std::size_t depth) -> std::int32_t
        {
            auto const id = static_cast<std::int32_t>(nodes_.size());
            nodes_.emplace_back();

            double sum = 0.0;
            double lo = y_(rows.front());
            double hi = lo;
            for (auto r : rows) {
                sum += y_(r);
                lo = std::min(lo, y_(r));
                hi = std::max(hi, y_(r));
            }
            auto const n = rows.size();
            // a pure node keeps the exact target; otherwise the mean, clamped against rounding
            nodes_[static_cast<std::size_t>(id)].value = lo == hi ? lo : std::clamp(sum / static_cast<double>(n), lo, hi);

            if (depth >= max_depth_ || lo == hi || n < 2 * min_leaf_) {
                return id;
            }
            auto const split = best_split(rows, sum);
            if (split.feature < 0) {
                return id;
            }

            std::vector<Index> left;
            std::vector<Index> right;
            for (auto r : rows) {
                (X_(r, split.feature) <= split.threshold ? left : right).push_back(r);
            }
            rows.clear();
            rows.shrink_to_fit();

            auto const l = build(left, depth + 1);
            auto const rgt = build(right, depth + 1);
            auto& node = nodes_[static_cast<std::size_t>(id)];
            node.feature = static_cast<std::int32_t>(split.feature);
            node.threshold = split.threshold;
            node.left = l;
            node.right = rgt;
            return id;
        }

        auto release() -> std::vector<RegressionTree::Node> { return std::move(nodes_); }

    private:
        struct Split {
            Index feature { -1 };
            double threshold { 0.0 };
            double gain { 0.0 };
        };

        auto best_split(std::vector<Index> const& rows, double total) const -> Split
        {
            Split best;
            auto const n = rows.size();
            std::vector<Index> order(rows);
            for (Index f = 0; f < X_.cols(); ++f) {
                std::copy(rows.begin(), rows.end(), order.begin());
                std::sort(order.begin(), order.end(), [&](Index a, Index b) {
                    auto const xa = X_(a, f);
                    auto const xb = X_(b, f);
                    return xa != xb ? xa < xb : a < b;
                });
                double left_sum = 0.0;
                for (std::size_t i = 0; i + 1 < n; ++i) {
                    left_sum += y_(order[i]);
                    auto const x_here = X_(order[i], f);
                    auto const x_next = X_(order[i + 1], f);
                    if (x_here == x_next) {
                        continue;
                    }
                    auto const nl = static_cast<double>(i + 1);
                    auto const nr = static_cast<double>(n - i - 1);
                    if (i + 1 < min_leaf_ || n - i - 1 < min_leaf_) {
                        continue;
                    }
                    auto const diff = left_sum / nl - (total - left_sum) / nr;
                    // reduction in summed squared error
                    auto const gain = nl * nr / static_cast<double>(n) * diff * diff;
                    if (gain > best.gain) {
                        auto threshold = 0.5 * (x_here + x_next);
                        if (!(threshold < x_next)) {
                            threshold = x_here;
                        }
                        best = { f, threshold, gain };
                    }
                }
            }
            return best;
        }

        Matrix const& X_;
        Vector const& y_;
        std::size_t max_depth_;
        std::size_t min_leaf_;
        std::vector<RegressionTree::Node> nodes_;
    };

    auto node_to_json(std::vector<RegressionTree::Node> const& nodes, std::int32_t i) -> nlohmann::json
    {
        auto const& n = nodes[static_cast<std::size_t>(i)];
        if (n.feature < 0) {
            return { { "leaf", n.value } };
        }
        return { { "feature", n.feature }, { "threshold", n.threshold }, { "value", n.value },
            { "left", node_to_json(nodes, n.left) }, { "right", node_to_json(nodes, n.right) } };
    }

    auto node_from_json(nlohmann::json const& j, std::vector<RegressionTree::Node>& nodes) -> std::int32_t
    {
        auto const id = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        if (j.contains("leaf")) {
            nodes.back().value = j.at("leaf").get<double>();
            return id;
        }
        RegressionTree::Node node;
        node.feature = j.at("feature").get<std::int32_t>();
        node.threshold = j.at("threshold").get<double>();
        node.value = j.at("value").get<double>();
        node.left = node_from_json(j.at("left"), nodes);
        node.right = node_from_json(j.at("right"), nodes);
        nodes[static_cast<std::size_t>(id)] = node;
        return id;
    }

} // namespace

auto RegressionTree::grow(Matrix const& X, Vector const& y, std::vector<Index> rows, std::size_t max_depth,
    std::size_t min_samples_leaf) -> RegressionTree
{
    if (rows.empty()) {
        throw std::invalid_argument("cannot grow a tree on zero rows");
    }
    TreeBuilder builder(X, y, max_depth, std::max<std::size_t>(1, min_samples_leaf));
    builder.build(rows, 0);
    return RegressionTree(builder.release());
}

auto RegressionTree::predict(Eigen::Ref<Vector const> const& x) const -> double
{
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        auto const& n = nodes_[i];
        i = static_cast<std::size_t>(x(n.feature) <= n.threshold ? n.left : n.right);
    }
    return nodes_[i].value;
}

auto RegressionTree::depth() const -> std::size_t
{
    std::size_t deepest = 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack { { 0, 0 } };
    while (!stack.empty()) {
        auto [i, d] = stack.back();
        stack.pop_back();
        auto const& n = nodes_[static_cast<std::size_t>(i)];
        if (n.feature < 0) {
            deepest = std::max(deepest, d);
        } else {
            stack.emplace_back(n.left, d + 1);
            stack.emplace_back(n.right, d + 1);
        }
    }
    return deepest;
}

auto RegressionTree::to_json() const -> nlohmann::json
{
    return node_to_json(nodes_, 0);
}

auto RegressionTree::from_json(nlohmann::json const& j) -> RegressionTree
{
    std::vector<Node> nodes;
    node_from_json(j, nodes);
    return RegressionTree(std::move(nodes));
}

ForestModel::ForestModel(std::vector<RegressionTree> trees, Index dim, double y_min, double y_max)
    : trees_(std::move(trees))
    , dim_(dim)
    , y_min_(y_min)
    , y_max_(y_max)
{
    if (trees_.empty()) {
        throw std::invalid_argument("a forest needs at least one tree");
    }
}

auto ForestModel::predict(Matrix const& X) const -> Vector
{
    if (X.cols() != dim_) {
        throw std::invalid_argument(fmt::format("forest expects {} features, got {}", dim_, X.cols()));
    }
    Vector out(X.rows());
    Vector row(X.cols());
    for (Index i = 0; i < X.rows(); ++i) {
        row = X.row(i).transpose();
        double sum = 0.0;
        for (auto const& tree : trees_) {
            sum += tree.predict(row);
        }
        // the mean of in-range leaves is in range; the clamp only absorbs rounding
        out(i) = std::clamp(sum / static_cast<double>(trees_.size()), y_min_, y_max_);
    }
    return out;
}

auto ForestModel::to_json() const -> nlohmann::json
{
    auto trees = nlohmann::json::array();
    for (auto const& t : trees_) {
        trees.push_back(t.to_json());
    }
    return { { "dim", dim_ }, { "y_min", y_min_ }, { "y_max", y_max_ }, { "trees", trees } };
}

auto ForestModel::from_json(nlohmann::json const& j) -> ForestModel
{
    std::vector<RegressionTree> trees;
    for (auto const& t : j.at("trees")) {
        trees.push_back(RegressionTree::from_json(t));
    }
    return { std::move(trees), j.at("dim").get<Index>(), j.at("y_min").get<double>(), j.at("y_max").get<double>() };
}

auto train_rf(Matrix const& X, Vector const& y, ForestConfig const& cfg) -> ForestModel
{
    cfg.validate();
    if (X.rows() < 2 || X.rows() != y.size()) {
        throw std::invalid_argument(fmt::format("train_rf needs matching X/y with at least 2 rows (got {} and {})", X.rows(), y.size()));
    }
    auto const n = X.rows();
    std::vector<RegressionTree> trees(cfg.n_trees);
    parallel_for(cfg.n_trees, cfg.threads, [&](std::size_t t) {
        std::vector<Index> rows(static_cast<std::size_t>(n));
        if (cfg.bootstrap) {
            Rng rng(derive_seed(cfg.seed, t));
            std::uniform_int_distribution<Index> pick(0, n - 1);
            for (auto& r : rows) {
                r = pick(rng);
            }
        } else {
            std::iota(rows.begin(), rows.end(), Index { 0 });
        }
        trees[t] = RegressionTree::grow(X, y, std::move(rows), cfg.max_depth, cfg.min_samples_leaf);
    });
    return { std::move(trees), X.cols(), y.minCoeff(), y.maxCoeff() };
}

} // namespace srkd
