// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "srkd/core.hpp"
#include "srkd/data.hpp"
#include "srkd/density.hpp"
#include "srkd/predictor.hpp"

namespace srkd {

// Throws std::invalid_argument on empty or mismatched inputs.
auto rmse(Vector const& y_true, Vector const& y_pred) -> double;

// Relative RMSE change in percent, positive when the augmented model is more
// accurate: (base - aug) / base * 100. Empty when base is zero.
auto perf_diff(double rmse_base, double rmse_aug) -> std::optional<double>;

struct TTestResult {
    double p_value { 1.0 };
    double t_statistic { 0.0 };
    std::size_t n { 0 };
    bool degenerate { false }; // zero variance or fewer than two samples
};

// One-sided one-sample t-test of H0: mean(diffs) <= 0 against mean > 0, with
// diffs = rmse_base - rmse_aug per run (a paired test). p is the Student-t
// upper tail with n - 1 degrees of freedom. Zero variance gives p = 0 when the
// mean is positive and 1 otherwise; fewer than two samples give p = 1.
auto one_sided_t_test(std::span<double const> diffs) -> TTestResult;

struct RunRecord {
    std::uint64_t run_seed { 0 };
    std::size_t run { 0 };
    ModelKind teacher { ModelKind::NN };
    ModelKind student { ModelKind::NN };
    double rmse_interp_base { 0.0 };
    double rmse_interp_aug { 0.0 };
    double rmse_extrap_base { 0.0 }; // NaN when the run has no extrapolation test rows
    double rmse_extrap_aug { 0.0 };
    double rmse_val_base { 0.0 };    // NaN without a validation slice
    double rmse_val_aug { 0.0 };
    std::size_t n_train { 0 };
    std::size_t n_synth { 0 };
    std::size_t n_interp { 0 };
    std::size_t n_extrap { 0 };
    std::size_t n_validation { 0 };
};

enum class Regime : std::uint8_t { Interpolation, Extrapolation };

struct MatrixCell {
    std::optional<double> mean_diff; // mean of per-run perf_diff values
    std::size_t runs { 0 };          // records in the cell
    std::size_t valid_runs { 0 };    // records with a defined perf_diff
    TTestResult test;
    bool significant { false }; // p < 0.05
};

// Rows are teachers, columns students, both in canonical NN, RF, GPp, GPe order
// restricted to the kinds present in the records.
struct ResultMatrix {
    Regime regime { Regime::Interpolation };
    std::vector<ModelKind> teachers;
    std::vector<ModelKind> students;
    std::vector<std::vector<MatrixCell>> cells; // [teacher][student]

    [[nodiscard]] auto at(ModelKind teacher, ModelKind student) const -> MatrixCell const&;
    // Cells with a positive mean difference, and those among them that are significant.
    [[nodiscard]] auto positive_cells() const -> std::size_t;
    [[nodiscard]] auto significant_positive_cells() const -> std::size_t;
};

inline constexpr double kSignificanceLevel = 0.05;

struct ExperimentMatrices {
    ResultMatrix interpolation;
    ResultMatrix extrapolation;
};

// Throws DataError when cells hold different run counts.
auto build_matrices(std::vector<RunRecord> const& records) -> ExperimentMatrices;

void write_diff_csv(std::ostream& out, ResultMatrix const& m);
void write_significance_csv(std::ostream& out, ResultMatrix const& m);
void write_pvalue_csv(std::ostream& out, ResultMatrix const& m);
auto matrices_json(ExperimentMatrices const& m) -> nlohmann::ordered_json;

void write_records_csv(std::ostream& out, std::vector<RunRecord> const& records);
auto read_records_csv(std::istream& in) -> std::vector<RunRecord>;

struct GateCandidate {
    std::string label; // "base" for the baseline
    double validation_rmse { 0.0 };
    bool baseline { false };
};

// Index of the candidate with minimal validation RMSE; ties go to the baseline,
// then to the earliest candidate. Throws std::invalid_argument when empty.
auto validation_gate(std::span<GateCandidate const> candidates) -> std::size_t;

struct ResidualPoint {
    Index row { 0 }; // index into the source table
    bool extrapolation { false };
    double abs_residual { 0.0 };
    double log_density { 0.0 };
    double centroid_distance { 0.0 };
};

// Every test point (interpolation first, then extrapolation). The training
// centroid is the origin of the standardized frame, so the distance is the
// norm of the standardized point.
auto residual_diagnostics(Predictor const& model, SplitDataset const& split, DensityModel const& density)
    -> std::vector<ResidualPoint>;

void write_residuals_csv(std::ostream& out, std::vector<ResidualPoint> const& points, bool header = true,
    std::string const& prefix_column = {}, std::string const& prefix_value = {});

} // namespace srkd
