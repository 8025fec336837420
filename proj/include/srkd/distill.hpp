// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "srkd/core.hpp"
#include "srkd/data.hpp"
#include "srkd/density.hpp"
#include "srkd/predictor.hpp"

namespace srkd {

struct SynthConfig {
    double noise_sigma { 0.3 }; // standardized units
    std::size_t n_synth { 1 };
    std::uint64_t seed { 0 };
};

// One ninth of the inside (interpolation) sample count, rounded to one
// significant figure: 1671 -> 200, 2700 -> 300, 1439 -> 200, 100 -> 10.
// Never less than 1.
auto synthetic_count(std::size_t inside_samples) -> std::size_t;

struct SyntheticSet {
    Matrix X_hat;                    // standardized frame
    Vector y_hat;                    // teacher predictions at X_hat
    std::vector<Index> base_indices; // rows of the training matrix each sample perturbs
    std::string teacher_id;

    [[nodiscard]] auto size() const -> Index { return X_hat.rows(); }
};

// For each sample: draw a base row uniformly (with replacement) from the
// training rows the density model flags as low density, add N(0, sigma^2 I)
// noise in standardized space, and label the result with the teacher.
// Throws DataError when no training row is flagged.
auto generate_synthetic(Matrix const& X_train, DensityModel const& density, Predictor const& teacher,
    SynthConfig const& cfg) -> SyntheticSet;

// Row-wise concatenation, original rows first.
auto augment(Matrix const& X, Vector const& y, SyntheticSet const& synth) -> std::pair<Matrix, Vector>;

// Features in original units, then y_hat, base_index (row in the source
// table) and teacher_id. `train_rows` maps training-matrix rows to table rows.
void write_synthetic_csv(std::ostream& out, SyntheticSet const& synth, Standardizer const& standardizer,
    std::vector<std::string> const& feature_names, std::vector<Index> const& train_rows, bool header = true,
    std::string const& prefix_column = {}, std::string const& prefix_value = {});

} // namespace srkd
