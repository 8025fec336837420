// SPDX-License-Identifier: MIT
#include "srkd/mlp.hpp"

#include <cmath>

#include <fmt/format.h>

namespace srkd {

void MlpTrainConfig::validate() const
{
    if (hidden.empty()) {
        throw ConfigError("MLP needs at least one hidden layer");
    }
    for (auto h : hidden) {
        if (h == 0) {
            throw ConfigError("MLP hidden layer sizes must be positive");
        }
    }
    if (!(learning_rate > 0.0) || !(l2_alpha >= 0.0) || max_iters == 0) {
        throw ConfigError("MLP learning_rate and max_iters must be positive, l2_alpha non-negative");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw ConfigError("invalid Adam moment parameters");
    }
}

MlpModel::MlpModel(std::vector<DenseLayer> layers)
    : layers_(std::move(layers))
{
    if (layers_.empty()) {
        throw std::invalid_argument("MLP needs at least one layer");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        auto const& l = layers_[i];
        if (l.bias.size() != l.weights.rows() || (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows())) {
            throw std::invalid_argument("MLP layer shapes do not chain");
        }
    }
    if (layers_.back().weights.rows() != 1) {
        throw std::invalid_argument("MLP output layer must have one unit");
    }
}

auto MlpModel::initialize(std::size_t inputs, std::vector<std::size_t> const& hidden, Rng& rng) -> MlpModel
{
    std::vector<std::size_t> sizes { inputs };
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        auto const fan_in = static_cast<Index>(sizes[i]);
        auto const fan_out = static_cast<Index>(sizes[i + 1]);
        auto const bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-bound, bound);
        DenseLayer layer { Matrix(fan_out, fan_in), Vector(fan_out) };
        for (Index r = 0; r < fan_out; ++r) {
            for (Index c = 0; c < fan_in; ++c) {
                layer.weights(r, c) = u(rng);
            }
        }
        for (Index r = 0; r < fan_out; ++r) {
            layer.bias(r) = u(rng);
        }
        layers.push_back(std::move(layer));
    }
    return MlpModel(std::move(layers));
}

namespace {
    // activations[0] = X, activations[k] = output of layer k (N x units)
    auto forward(std::vector<DenseLayer> const& layers, Matrix const& X) -> std::vector<Matrix>
    {
        std::vector<Matrix> acts;
        acts.reserve(layers.size() + 1);
        acts.push_back(X);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Matrix z = acts.back() * layers[i].weights.transpose();
            z.rowwise() += layers[i].bias.transpose();
            if (i + 1 < layers.size()) {
                z = z.array().tanh().matrix();
            }
            acts.push_back(std::move(z));
        }
        return acts;
    }

    auto penalty(std::vector<DenseLayer> const& layers) -> double
    {
        double sum = 0.0;
        for (auto const& l : layers) {
            sum += l.weights.squaredNorm();
        }
        return sum;
    }
} // namespace

auto MlpModel::predict(Matrix const& X) const -> Vector
{
    if (X.cols() != inputs()) {
        throw std::invalid_argument(fmt::format("MLP expects {} features, got {}", inputs(), X.cols()));
    }
    return forward(layers_, X).back().col(0);
}

auto MlpModel::parameter_count() const -> std::size_t
{
    std::size_t n = 0;
    for (auto const& l : layers_) {
        n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    }
    return n;
}

auto mlp_loss(MlpModel const& model, Matrix const& X, Vector const& y, double alpha) -> double
{
    Vector const residual = model.predict(X) - y;
    return residual.squaredNorm() / static_cast<double>(y.size()) + alpha * penalty(model.layers());
}

auto mlp_loss_gradient(MlpModel const& model, Matrix const& X, Vector const& y, double alpha) -> MlpGradient
{
    auto const& layers = model.layers();
    auto const acts = forward(layers, X);
    auto const n = static_cast<double>(y.size());
    Vector const residual = acts.back().col(0) - y;

    MlpGradient grad;
    grad.loss = residual.squaredNorm() / n + alpha * penalty(layers);
    grad.layers.resize(layers.size());

    Matrix delta = (2.0 / n) * residual; // dL/dz for the output layer, N x 1
    for (std::size_t k = layers.size(); k-- > 0;) {
        auto const& input = acts[k];
        grad.layers[k].weights = delta.transpose() * input + 2.0 * alpha * layers[k].weights;
        grad.layers[k].bias = delta.colwise().sum().transpose();
        if (k > 0) {
            Matrix upstream = delta * layers[k].weights;
            delta = (upstream.array() * (1.0 - input.array().square())).matrix();
        }
    }
    return grad;
}

auto train_mlp(Matrix const& X, Vector const& y, MlpTrainConfig const& cfg) -> MlpModel
{
    cfg.validate();
    if (X.rows() < 2 || X.rows() != y.size()) {
        throw std::invalid_argument(fmt::format("train_mlp needs matching X/y with at least 2 rows (got {} and {})", X.rows(), y.size()));
    }
    Rng rng(cfg.seed);
    auto model = MlpModel::initialize(static_cast<std::size_t>(X.cols()), cfg.hidden, rng);
    auto& layers = model.layers();

    std::vector<DenseLayer> m1;
    std::vector<DenseLayer> m2;
    for (auto const& l : layers) {
        m1.push_back({ Matrix::Zero(l.weights.rows(), l.weights.cols()), Vector::Zero(l.bias.size()) });
    }
    m2 = m1;

    double b1t = 1.0;
    double b2t = 1.0;
    for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
        auto const grad = mlp_loss_gradient(model, X, y, cfg.l2_alpha);
        if (!std::isfinite(grad.loss)) {
            throw NumericError(fmt::format("MLP loss became non-finite at epoch {}", t));
        }
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        auto const step = cfg.learning_rate * std::sqrt(1.0 - b2t) / (1.0 - b1t);
        auto update = [&](auto& param, auto const& g, auto& m, auto& v) {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
            param.array() -= step * m.array() / (v.array().sqrt() + cfg.epsilon);
        };
        for (std::size_t k = 0; k < layers.size(); ++k) {
            update(layers[k].weights, grad.layers[k].weights, m1[k].weights, m2[k].weights);
            update(layers[k].bias, grad.layers[k].bias, m1[k].bias, m2[k].bias);
        }
    }
    auto const final_loss = mlp_loss(model, X, y, cfg.l2_alpha);
    if (!std::isfinite(final_loss)) {
        throw NumericError("MLP loss became non-finite after the last epoch");
    }
    return model;
}

auto MlpModel::to_json() const -> nlohmann::json
{
    auto j = nlohmann::json::array();
    for (auto const& l : layers_) {
        std::vector<double> w(static_cast<std::size_t>(l.weights.size()));
        // row-major flat array
        for (Index r = 0; r < l.weights.rows(); ++r) {
            for (Index c = 0; c < l.weights.cols(); ++c) {
                w[static_cast<std::size_t>(r * l.weights.cols() + c)] = l.weights(r, c);
            }
        }
        j.push_back({ { "rows", l.weights.rows() }, { "cols", l.weights.cols() }, { "weights", w },
            { "bias", std::vector<double>(l.bias.begin(), l.bias.end()) } });
    }
    return j;
}

auto MlpModel::from_json(nlohmann::json const& j) -> MlpModel
{
    std::vector<DenseLayer> layers;
    for (auto const& item : j) {
        auto const rows = item.at("rows").get<Index>();
        auto const cols = item.at("cols").get<Index>();
        auto const w = item.at("weights").get<std::vector<double>>();
        auto const b = item.at("bias").get<std::vector<double>>();
        if (static_cast<Index>(w.size()) != rows * cols || static_cast<Index>(b.size()) != rows) {
            throw std::invalid_argument("MLP layer record has inconsistent sizes");
        }
        DenseLayer layer { Matrix(rows, cols), Vector(rows) };
        for (Index r = 0; r < rows; ++r) {
            for (Index c = 0; c < cols; ++c) {
                layer.weights(r, c) = w[static_cast<std::size_t>(r * cols + c)];
            }
            layer.bias(r) = b[static_cast<std::size_t>(r)];
        }
        layers.push_back(std::move(layer));
    }
    return MlpModel(std::move(layers));
}

} // namespace srkd
