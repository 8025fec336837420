// SPDX-License-Identifier: MIT
#include "srkd/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace srkd {

void ExperimentConfig::validate() const
{
    if (dataset.empty()) {
        throw ConfigError("config: 'dataset' is required");
    }
    if (target.empty()) {
        throw ConfigError("config: 'target' is required");
    }
    if (teachers.empty() || students.empty()) {
        throw ConfigError("config: teacher and student sets must be non-empty");
    }
    if (runs == 0) {
        throw ConfigError("config: 'runs' must be positive");
    }
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError(fmt::format("config: test_fraction must lie in (0, 1), got {}", test_fraction));
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError(fmt::format("config: validation_fraction must lie in [0, 1), got {}", validation_fraction));
    }
    if (!(kde_bandwidth > 0.0)) {
        throw ConfigError("config: kde_bandwidth must be positive");
    }
    if (!(kde_percentile > 0.0 && kde_percentile < 1.0)) {
        throw ConfigError("config: kde_percentile must lie in (0, 1)");
    }
    if (!(synth_epsilon > 0.0)) {
        throw ConfigError("config: synth_epsilon must be positive");
    }
    if (synth_count && *synth_count == 0) {
        throw ConfigError("config: synth_count must be positive or 'auto'");
    }
    mlp.validate();
    forest.validate();
    gp.validate();
}

auto parse_model_list(std::string const& text) -> std::vector<ModelKind>
{
    std::vector<ModelKind> out;
    if (text == "all") {
        return { kAllModelKinds.begin(), kAllModelKinds.end() };
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto const b = item.find_first_not_of(" \t");
        auto const e = item.find_last_not_of(" \t");
        if (b == std::string::npos) {
            continue;
        }
        auto const kind = parse_model_kind(item.substr(b, e - b + 1));
        if (std::find(out.begin(), out.end(), kind) == out.end()) {
            out.push_back(kind);
        }
    }
    if (out.empty()) {
        throw ConfigError(fmt::format("empty model list '{}'", text));
    }
    // canonical order keeps artifacts independent of how the list was typed
    std::vector<ModelKind> ordered;
    for (auto k : kAllModelKinds) {
        if (std::find(out.begin(), out.end(), k) != out.end()) {
            ordered.push_back(k);
        }
    }
    return ordered;
}

namespace {

    auto model_names(std::vector<ModelKind> const& kinds) -> std::vector<std::string>
    {
        std::vector<std::string> out;
        for (auto k : kinds) {
            out.emplace_back(to_string(k));
        }
        return out;
    }

    template <typename T>
    auto scalar(YAML::Node const& node, std::string const& key) -> T
    {
        try {
            return node.as<T>();
        } catch (YAML::Exception const&) {
            throw ConfigError(fmt::format("config: key '{}' has an invalid value", key));
        }
    }

    auto model_list(YAML::Node const& node, std::string const& key) -> std::vector<ModelKind>
    {
        if (node.IsSequence()) {
            std::string joined;
            for (auto const& item : node) {
                joined += scalar<std::string>(item, key) + ",";
            }
            return parse_model_list(joined);
        }
        return parse_model_list(scalar<std::string>(node, key));
    }

} // namespace

auto ExperimentConfig::to_json() const -> nlohmann::ordered_json
{
    nlohmann::ordered_json j;
    j["dataset"] = dataset.string();
    j["target"] = target;
    j["delimiter"] = std::string(1, delimiter);
    j["test_fraction"] = test_fraction;
    j["validation_fraction"] = validation_fraction;
    j["kde_bandwidth"] = kde_bandwidth;
    j["kde_percentile"] = kde_percentile;
    j["synth_epsilon"] = synth_epsilon;
    j["synth_count"] = synth_count ? nlohmann::ordered_json(*synth_count) : nlohmann::ordered_json("auto");
    j["teachers"] = model_names(teachers);
    j["students"] = model_names(students);
    j["runs"] = runs;
    j["seed"] = seed;
    j["mlp_hidden"] = mlp.hidden;
    j["mlp_alpha"] = mlp.l2_alpha;
    j["mlp_learning_rate"] = mlp.learning_rate;
    j["mlp_max_iters"] = mlp.max_iters;
    j["rf_trees"] = forest.n_trees;
    j["rf_max_depth"] = forest.max_depth;
    j["rf_min_samples_leaf"] = forest.min_samples_leaf;
    j["rf_bootstrap"] = forest.bootstrap;
    j["gp_islands"] = gp.islands;
    j["gp_population"] = gp.population_per_island;
    j["gp_generations"] = gp.generations;
    j["gp_max_complexity"] = gp.max_complexity;
    j["gp_crossover_rate"] = gp.crossover_rate;
    j["gp_mutation_rate"] = gp.mutation_rate;
    j["gp_tournament_size"] = gp.tournament_size;
    j["gp_migration_interval"] = gp.migration_interval;
    j["gp_migration_size"] = gp.migration_size;
    j["gp_init_min_depth"] = gp.init_min_depth;
    j["gp_init_max_depth"] = gp.init_max_depth;
    j["gp_constant_range"] = gp.constant_range;
    return j;
}

auto parse_config(std::string const& text, std::filesystem::path const& base_dir) -> ExperimentConfig
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (YAML::Exception const& e) {
        throw ConfigError(fmt::format("config: {}", e.what()));
    }
    if (root.IsMap() && root["config"] && root["config"].IsMap()) {
        root = root["config"]; // manifest.json
    }
    if (!root.IsMap()) {
        throw ConfigError("config: expected a key-value mapping");
    }

    ExperimentConfig cfg;
    using Setter = std::function<void(YAML::Node const&, std::string const&)>;
    auto size = [](std::size_t& field) -> Setter {
        return [&field](auto const& n, auto const& k) { field = scalar<std::size_t>(n, k); };
    };
    auto real = [](double& field) -> Setter {
        return [&field](auto const& n, auto const& k) { field = scalar<double>(n, k); };
    };
    std::map<std::string, Setter> const setters {
        { "dataset", [&](auto const& n, auto const& k) { cfg.dataset = scalar<std::string>(n, k); } },
        { "target", [&](auto const& n, auto const& k) { cfg.target = scalar<std::string>(n, k); } },
        { "delimiter", [&](auto const& n, auto const& k) {
             auto const s = scalar<std::string>(n, k);
             if (s.size() != 1) {
                 throw ConfigError("config: delimiter must be a single character");
             }
             cfg.delimiter = s[0];
         } },
        { "test_fraction", real(cfg.test_fraction) },
        { "validation_fraction", real(cfg.validation_fraction) },
        { "kde_bandwidth", real(cfg.kde_bandwidth) },
        { "kde_percentile", real(cfg.kde_percentile) },
        { "synth_epsilon", real(cfg.synth_epsilon) },
        { "synth_count", [&](auto const& n, auto const& k) {
             if (scalar<std::string>(n, k) == "auto") {
                 cfg.synth_count.reset();
             } else {
                 cfg.synth_count = scalar<std::size_t>(n, k);
             }
         } },
        { "teachers", [&](auto const& n, auto const& k) { cfg.teachers = model_list(n, k); } },
        { "students", [&](auto const& n, auto const& k) { cfg.students = model_list(n, k); } },
        { "runs", size(cfg.runs) },
        { "seed", [&](auto const& n, auto const& k) { cfg.seed = scalar<std::uint64_t>(n, k); } },
        { "out", [&](auto const& n, auto const& k) { cfg.out = scalar<std::string>(n, k); } },
        { "jobs", size(cfg.jobs) },
        { "mlp_hidden", [&](auto const& n, auto const& k) { cfg.mlp.hidden = scalar<std::vector<std::size_t>>(n, k); } },
        { "mlp_alpha", real(cfg.mlp.l2_alpha) },
        { "mlp_learning_rate", real(cfg.mlp.learning_rate) },
        { "mlp_max_iters", size(cfg.mlp.max_iters) },
        { "rf_trees", size(cfg.forest.n_trees) },
        { "rf_max_depth", size(cfg.forest.max_depth) },
        { "rf_min_samples_leaf", size(cfg.forest.min_samples_leaf) },
        { "rf_bootstrap", [&](auto const& n, auto const& k) { cfg.forest.bootstrap = scalar<bool>(n, k); } },
        { "gp_islands", size(cfg.gp.islands) },
        { "gp_population", size(cfg.gp.population_per_island) },
        { "gp_generations", size(cfg.gp.generations) },
        { "gp_max_complexity", size(cfg.gp.max_complexity) },
        { "gp_crossover_rate", real(cfg.gp.crossover_rate) },
        { "gp_mutation_rate", real(cfg.gp.mutation_rate) },
        { "gp_tournament_size", size(cfg.gp.tournament_size) },
        { "gp_migration_interval", size(cfg.gp.migration_interval) },
        { "gp_migration_size", size(cfg.gp.migration_size) },
        { "gp_init_min_depth", size(cfg.gp.init_min_depth) },
        { "gp_init_max_depth", size(cfg.gp.init_max_depth) },
        { "gp_constant_range", real(cfg.gp.constant_range) },
    };

    for (auto const& item : root) {
        auto const key = item.first.as<std::string>();
        auto const it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError(fmt::format("config: unknown key '{}'", key));
        }
        it->second(item.second, key);
    }
    if (!cfg.dataset.empty() && cfg.dataset.is_relative() && !base_dir.empty()) {
        cfg.dataset = base_dir / cfg.dataset;
    }
    if (!cfg.dataset.empty()) {
        cfg.dataset = std::filesystem::weakly_canonical(cfg.dataset);
    }
    return cfg;
}

auto load_config(std::filesystem::path const& path) -> ExperimentConfig
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

} // namespace srkd
