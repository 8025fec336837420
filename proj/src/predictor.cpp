// SPDX-License-Identifier: MIT
#include "srkd/predictor.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <fmt/format.h>

namespace srkd {

namespace {
    constexpr int kFormatVersion = 1;
    constexpr std::string_view kFormatName = "srkd-model";
} // namespace

auto to_string(ModelKind kind) -> std::string_view
{
    switch (kind) {
    case ModelKind::NN:
        return "NN";
    case ModelKind::RF:
        return "RF";
    case ModelKind::GPp:
        return "GPp";
    case ModelKind::GPe:
        return "GPe";
    }
    return "?";
}

auto parse_model_kind(std::string_view text) -> ModelKind
{
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "nn" || lower == "mlp") {
        return ModelKind::NN;
    }
    if (lower == "rf") {
        return ModelKind::RF;
    }
    if (lower == "gpp") {
        return ModelKind::GPp;
    }
    if (lower == "gpe") {
        return ModelKind::GPe;
    }
    throw ConfigError(fmt::format("unknown model '{}' (expected NN, RF, GPp or GPe)", text));
}

Predictor::Predictor(ModelKind kind, Model model, Index dim)
    : kind_(kind)
    , model_(std::move(model))
    , dim_(dim)
{
    bool const consistent = std::visit(
        [&](auto const& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, MlpModel>) {
                return kind == ModelKind::NN && m.inputs() == dim;
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                return kind == ModelKind::RF && m.dim() == dim;
            } else {
                return is_gp(kind) && m.required_features() <= static_cast<std::size_t>(dim);
            }
        },
        model_);
    if (!consistent) {
        throw std::invalid_argument(fmt::format("model payload does not match kind {} with {} inputs", to_string(kind), dim));
    }
}

auto Predictor::mlp(MlpModel model) -> Predictor
{
    auto const dim = model.inputs();
    return { ModelKind::NN, std::move(model), dim };
}

auto Predictor::forest(ForestModel model) -> Predictor
{
    auto const dim = model.dim();
    return { ModelKind::RF, std::move(model), dim };
}

auto Predictor::expression(ModelKind kind, Expression expr, Index dim) -> Predictor
{
    return { kind, std::move(expr), dim };
}

auto Predictor::predict(Matrix const& X) const -> Vector
{
    if (X.cols() != dim_) {
        throw std::invalid_argument(fmt::format("{} predictor expects {} features, got {}", id(), dim_, X.cols()));
    }
    return std::visit(
        [&](auto const& m) -> Vector {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, Expression>) {
                return m.evaluate(X);
            } else {
                return m.predict(X);
            }
        },
        model_);
}

auto Predictor::to_json() const -> nlohmann::json
{
    nlohmann::json j { { "format", kFormatName }, { "version", kFormatVersion }, { "kind", id() }, { "dim", dim_ } };
    std::visit(
        [&](auto const& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, MlpModel>) {
                j["layers"] = m.to_json();
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                j["forest"] = m.to_json();
            } else {
                j["expression"] = m.to_string();
            }
        },
        model_);
    return j;
}

auto Predictor::from_json(nlohmann::json const& j) -> Predictor
{
    if (j.value("format", "") != kFormatName) {
        throw DataError("not an srkd model file");
    }
    auto const version = j.at("version").get<int>();
    if (version != kFormatVersion) {
        throw DataError(fmt::format("unsupported model format version {}", version));
    }
    auto const kind = parse_model_kind(j.at("kind").get<std::string>());
    auto const dim = j.at("dim").get<Index>();
    switch (kind) {
    case ModelKind::NN:
        return { kind, MlpModel::from_json(j.at("layers")), dim };
    case ModelKind::RF:
        return { kind, ForestModel::from_json(j.at("forest")), dim };
    default:
        return { kind, Expression::parse(j.at("expression").get<std::string>()), dim };
    }
}

void Predictor::save(std::filesystem::path const& path) const
{
    std::ofstream out(path);
    if (!out) {
        throw DataError(fmt::format("cannot write model file '{}'", path.string()));
    }
    out << to_json().dump() << '\n';
}

auto Predictor::load(std::filesystem::path const& path) -> Predictor
{
    std::ifstream in(path);
    if (!in) {
        throw DataError(fmt::format("cannot open model file '{}'", path.string()));
    }
    return from_json(nlohmann::json::parse(in));
}

} // namespace srkd
