// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <filesystem>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "srkd/expression.hpp"
#include "srkd/forest.hpp"
#include "srkd/mlp.hpp"

namespace srkd {

// Model families used both as teachers and as students.
enum class ModelKind : std::uint8_t { NN, RF, GPp, GPe };

inline constexpr std::array kAllModelKinds { ModelKind::NN, ModelKind::RF, ModelKind::GPp, ModelKind::GPe };

auto to_string(ModelKind kind) -> std::string_view;
// Accepts the canonical labels case-insensitively; "MLP" is an alias for NN.
// Throws ConfigError.
auto parse_model_kind(std::string_view text) -> ModelKind;

constexpr auto is_gp(ModelKind kind) noexcept -> bool { return kind == ModelKind::GPp || kind == ModelKind::GPe; }

class Predictor {
public:
    using Model = std::variant<MlpModel, ForestModel, Expression>;

    Predictor(ModelKind kind, Model model, Index dim);

    static auto mlp(MlpModel model) -> Predictor;
    static auto forest(ForestModel model) -> Predictor;
    static auto expression(ModelKind kind, Expression expr, Index dim) -> Predictor;

    // Throws std::invalid_argument when X has the wrong number of columns.
    [[nodiscard]] auto predict(Matrix const& X) const -> Vector;

    [[nodiscard]] auto kind() const -> ModelKind { return kind_; }
    [[nodiscard]] auto id() const -> std::string_view { return to_string(kind_); }
    [[nodiscard]] auto dim() const -> Index { return dim_; }
    [[nodiscard]] auto model() const -> Model const& { return model_; }

    // {"format": "srkd-model", "version": 1, "kind", "dim", ...}
    [[nodiscard]] auto to_json() const -> nlohmann::json;
    static auto from_json(nlohmann::json const& j) -> Predictor;

    void save(std::filesystem::path const& path) const;
    static auto load(std::filesystem::path const& path) -> Predictor;

private:
    ModelKind kind_;
    Model model_;
    Index dim_;
};

} // namespace srkd
