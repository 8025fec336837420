// SPDX-License-Identifier: MIT
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srkd/forest.hpp"
#include "srkd/gp.hpp"
#include "srkd/mlp.hpp"
#include "srkd/predictor.hpp"

namespace srkd {

// Flat, typed experiment configuration. Every learner hyperparameter has its
// own key; the defaults are the fixed values used across all datasets.
struct ExperimentConfig {
    std::filesystem::path dataset;
    std::string target;
    char delimiter { ',' };

    double test_fraction { 0.2 };
    double validation_fraction { 0.2 };
    double kde_bandwidth { 0.3 };
    double kde_percentile { 0.10 };
    double synth_epsilon { 0.3 };
    std::optional<std::size_t> synth_count; // empty: one ninth of the inside samples

    std::vector<ModelKind> teachers { kAllModelKinds.begin(), kAllModelKinds.end() };
    std::vector<ModelKind> students { kAllModelKinds.begin(), kAllModelKinds.end() };
    std::size_t runs { 30 };
    std::uint64_t seed { 0 };

    MlpTrainConfig mlp;
    ForestConfig forest;
    GpConfig gp;

    // Not part of the reproducibility snapshot: neither changes any artifact.
    std::filesystem::path out { "results" };
    std::size_t jobs { 1 };

    // Throws ConfigError.
    void validate() const;

    // Snapshot with the same keys the loader accepts; `out` and `jobs` excluded.
    [[nodiscard]] auto to_json() const -> nlohmann::ordered_json;
};

// Reads a flat YAML mapping. A manifest.json written by run_experiment is also
// accepted: its "config" block is loaded. Relative dataset paths resolve
// against the file's directory. Throws ConfigError.
auto load_config(std::filesystem::path const& path) -> ExperimentConfig;
auto parse_config(std::string const& text, std::filesystem::path const& base_dir = {}) -> ExperimentConfig;

// "NN,RF" or "all"; throws ConfigError.
auto parse_model_list(std::string const& text) -> std::vector<ModelKind>;

} // namespace srkd
