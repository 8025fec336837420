// SPDX-License-Identifier: MIT
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "srkd/config.hpp"
#include "srkd/data.hpp"
#include "srkd/density.hpp"
#include "srkd/distill.hpp"
#include "srkd/evaluation.hpp"
#include "srkd/gp.hpp"
#include "srkd/predictor.hpp"

namespace srkd {

// Counter-mode derivation: FNV-1a of the role folded into a SplitMix64 chain
// over (master, run). Pure integer arithmetic, so identical on every platform.
auto seed_schedule(std::uint64_t master, std::uint64_t run, std::string_view role) -> std::uint64_t;

// Seed roles used within one run.
auto run_seed_roles() -> std::vector<std::string>;
auto synth_role(ModelKind teacher) -> std::string;

// Learners trained on one training set. GPp and GPe share a single front.
struct ModelSet {
    std::optional<Predictor> nn;
    std::optional<Predictor> rf;
    std::optional<Predictor> gpp;
    std::optional<Predictor> gpe;
    std::optional<ParetoFront> front;

    // Throws std::logic_error when the kind was not trained.
    [[nodiscard]] auto get(ModelKind kind) const -> Predictor const&;
};

// Trains the families needed for `kinds`. Seeds come from the schedule for
// (cfg.seed, run) so base and augmented students share initial conditions.
auto train_models(Matrix const& X, Vector const& y, std::vector<ModelKind> const& kinds, ExperimentConfig const& cfg,
    std::size_t run) -> ModelSet;

auto partition_options(ExperimentConfig const& cfg, std::size_t run) -> PartitionOptions;
// Rows in the interpolation region: unflagged training rows plus the kept
// interpolation test and validation rows.
auto inside_rows(Partition const& part) -> std::size_t;
auto synth_config(ExperimentConfig const& cfg, std::size_t run, ModelKind teacher, std::size_t inside_rows) -> SynthConfig;

struct RunManifest {
    std::filesystem::path directory;
    nlohmann::ordered_json manifest;   // contents of manifest.json
    nlohmann::ordered_json timings;    // contents of timings.json (excluded from reproducibility)
    std::vector<std::string> artifacts; // file names relative to `directory`, sorted
    std::vector<RunRecord> records;
    ExperimentMatrices matrices;
};

// Full pipeline. Writes every artifact into cfg.out. On failure the completed
// runs are flushed, manifest.json records the error, and the exception is
// rethrown with its (dataset, seed, teacher, student) coordinate.
auto run_experiment(ExperimentConfig const& cfg) -> RunManifest;

// Rebuilds matrices and their CSV/JSON files from a stored records.csv.
auto report(std::filesystem::path const& records_csv, std::filesystem::path const& out_dir) -> ExperimentMatrices;

// Writes split.json and density_scores.csv (one row per table row) for run 0.
void write_split_artifacts(ExperimentConfig const& cfg, std::filesystem::path const& out_dir);

// Trains the teachers of run 0 and writes synth_<teacher>.csv for each.
void write_synth_artifacts(ExperimentConfig const& cfg, std::filesystem::path const& out_dir);

struct RecoveryRun {
    std::uint64_t seed { 0 };
    double rmse { 0.0 };
    std::string expression;
    double seconds { 0.0 };
    bool recovered { false };
};

struct RecoveryReport {
    std::vector<RecoveryRun> runs;
    double threshold { 1e-3 };
    [[nodiscard]] auto recovered() const -> std::size_t;
};

// y = sin(x0) + x1 on 200 noiseless points drawn uniformly from [-3, 3]^2,
// fresh data and GP seed per run. A run counts when the training RMSE of the
// most accurate front entry is below `threshold`.
auto formula_recovery(GpConfig const& gp, std::size_t runs, std::uint64_t master_seed, double threshold = 1e-3)
    -> RecoveryReport;

} // namespace srkd
