// SPDX-License-Identifier: MIT
#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "srkd/core.hpp"

namespace srkd {

struct MlpTrainConfig {
    std::vector<std::size_t> hidden { 150, 75 };
    double l2_alpha { 2e-4 };
    double learning_rate { 0.01 };
    std::size_t max_iters { 180 }; // full-batch Adam epochs, no early stopping
    double beta1 { 0.9 };
    double beta2 { 0.999 };
    double epsilon { 1e-8 };
    std::uint64_t seed { 0 };

    void validate() const;
};

struct DenseLayer {
    Matrix weights; // out x in
    Vector bias;    // out
};

// Feed-forward regressor: tanh on every hidden layer, identity output.
class MlpModel {
public:
    MlpModel() = default;
    explicit MlpModel(std::vector<DenseLayer> layers);

    // Glorot-uniform weights and biases.
    static auto initialize(std::size_t inputs, std::vector<std::size_t> const& hidden, Rng& rng) -> MlpModel;

    [[nodiscard]] auto predict(Matrix const& X) const -> Vector;

    [[nodiscard]] auto layers() const -> std::vector<DenseLayer> const& { return layers_; }
    [[nodiscard]] auto layers() -> std::vector<DenseLayer>& { return layers_; }
    [[nodiscard]] auto inputs() const -> Index { return layers_.empty() ? 0 : layers_.front().weights.cols(); }
    [[nodiscard]] auto parameter_count() const -> std::size_t;

    [[nodiscard]] auto to_json() const -> nlohmann::json;
    static auto from_json(nlohmann::json const& j) -> MlpModel;

private:
    std::vector<DenseLayer> layers_;
};

struct MlpGradient {
    double loss { 0.0 };
    std::vector<DenseLayer> layers; // same shapes as the model
};

// mean((f(X) - y)^2) + alpha * sum of squared weights (biases unpenalized)
auto mlp_loss(MlpModel const& model, Matrix const& X, Vector const& y, double alpha) -> double;
auto mlp_loss_gradient(MlpModel const& model, Matrix const& X, Vector const& y, double alpha) -> MlpGradient;

// Throws NumericError when the loss becomes non-finite.
auto train_mlp(Matrix const& X, Vector const& y, MlpTrainConfig const& cfg) -> MlpModel;

} // namespace srkd
