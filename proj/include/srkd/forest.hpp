// SPDX-License-Identifier: MIT
#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "srkd/core.hpp"

namespace srkd {

struct ForestConfig {
    std::size_t n_trees { 1000 };
    std::size_t max_depth { 25 };
    std::size_t min_samples_leaf { 1 };
    bool bootstrap { true };
    std::uint64_t seed { 0 };
    std::size_t threads { 1 };

    void validate() const;
};

// CART regression tree. Splits minimize the summed squared error of the two
// children; candidate thresholds are midpoints between consecutive distinct
// feature values and every feature is searched at every node.
class RegressionTree {
public:
    struct Node {
        std::int32_t feature { -1 }; // -1 marks a leaf
        double threshold { 0.0 };    // x[feature] <= threshold goes left
        double value { 0.0 };
        std::int32_t left { -1 };
        std::int32_t right { -1 };
    };

    RegressionTree() = default;
    explicit RegressionTree(std::vector<Node> nodes);

    static auto grow(Matrix const& X, Vector const& y, std::vector<Index> rows, std::size_t max_depth,
        std::size_t min_samples_leaf = 1) -> RegressionTree;

    [[nodiscard]] auto predict(Eigen::Ref<Vector const> const& x) const -> double;
    [[nodiscard]] auto depth() const -> std::size_t; // edges on the longest root-to-leaf path
    [[nodiscard]] auto nodes() const -> std::vector<Node> const& { return nodes_; }

    [[nodiscard]] auto to_json() const -> nlohmann::json;
    static auto from_json(nlohmann::json const& j) -> RegressionTree;

private:
    std::vector<Node> nodes_;
};

class ForestModel {
public:
    ForestModel() = default;
    ForestModel(std::vector<RegressionTree> trees, Index dim, double y_min, double y_max);

    // Mean of the tree predictions.
    [[nodiscard]] auto predict(Matrix const& X) const -> Vector;

    [[nodiscard]] auto trees() const -> std::vector<RegressionTree> const& { return trees_; }
    [[nodiscard]] auto dim() const -> Index { return dim_; }

    [[nodiscard]] auto to_json() const -> nlohmann::json;
    static auto from_json(nlohmann::json const& j) -> ForestModel;

private:
    std::vector<RegressionTree> trees_;
    Index dim_ { 0 };
    double y_min_ { 0.0 };
    double y_max_ { 0.0 };
};

auto train_rf(Matrix const& X, Vector const& y, ForestConfig const& cfg) -> ForestModel;

} // namespace srkd
