// SPDX-License-Identifier: MIT
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "srkd/core.hpp"
#include "srkd/density.hpp"

namespace srkd {

struct RawTable {
    std::vector<std::string> feature_names;
    std::string target_name;
    Matrix rows;   // N x d
    Vector target; // N

    [[nodiscard]] auto size() const -> Index { return rows.rows(); }
    [[nodiscard]] auto dim() const -> Index { return rows.cols(); }
};

// RFC-4180 reader: header row required, quoted fields allowed, '.' decimal
// separator. Every column other than `target_column` becomes a feature, in
// header order. Throws DataError on a missing file or column, a ragged row,
// or any cell that is unparseable or non-finite (message names row and column).
auto load_csv(std::filesystem::path const& path, std::string_view target_column, char delimiter = ',') -> RawTable;
auto read_csv(std::istream& in, std::string_view target_column, char delimiter = ',',
    std::string_view source = "<stream>") -> RawTable;

// Splits one CSV record (no trailing newline) into fields, honouring quotes.
auto split_csv_record(std::string_view line, char delimiter = ',') -> std::vector<std::string>;

class Standardizer {
public:
    Standardizer() = default;
    Standardizer(Vector means, Vector std_devs);

    // Population statistics per column. Throws DataError naming the first
    // zero-variance column.
    static auto fit(Matrix const& X, std::vector<std::string> const& names = {}) -> Standardizer;

    [[nodiscard]] auto transform(Matrix const& X) const -> Matrix;
    [[nodiscard]] auto inverse(Matrix const& Z) const -> Matrix;

    [[nodiscard]] auto means() const -> Vector const& { return means_; }
    [[nodiscard]] auto std_devs() const -> Vector const& { return std_devs_; }
    [[nodiscard]] auto dim() const -> Index { return means_.size(); }

private:
    Vector means_;
    Vector std_devs_;
};

inline auto fit_standardizer(Matrix const& X, std::vector<std::string> const& names = {}) -> Standardizer
{
    return Standardizer::fit(X, names);
}

// Row indices for one run. Validation rows are carved out of the training
// side; they never reach the density model or any learner.
struct IndexSplit {
    std::vector<Index> train;
    std::vector<Index> test;
    std::vector<Index> validation;
};

// Seeded shuffle of 0..n-1; the first round(n * test_fraction) indices form the
// test side, then round(|train| * validation_fraction) training indices are
// held out for validation. Every list is returned sorted.
auto random_split(Index n, double test_fraction, std::uint64_t seed, double validation_fraction = 0.0) -> IndexSplit;

struct DataPart {
    Matrix X;                // standardized
    Vector y;
    std::vector<Index> rows; // indices into the RawTable

    [[nodiscard]] auto size() const -> Index { return X.rows(); }
};

struct SplitDataset {
    DataPart train;
    DataPart test_interp;
    DataPart test_extrap;
    // Held-out training rows inside the interpolation region; used only to
    // choose between baseline and augmented students.
    DataPart validation;
    // Validation rows that fell in the extrapolation region and were dropped.
    std::vector<Index> validation_dropped;
    Standardizer standardizer;
    std::uint64_t seed { 0 };

    // Dense datasets may legitimately produce no extrapolation test points.
    [[nodiscard]] auto has_extrapolation() const -> bool { return test_extrap.size() > 0; }
};

// Classifies test (and validation) rows against a density model fitted on the
// standardized training rows of `indices`.
auto split_by_density(RawTable const& table, IndexSplit const& indices, Standardizer const& standardizer,
    DensityModel const& density, std::uint64_t seed = 0) -> SplitDataset;

struct PartitionOptions {
    double test_fraction { 0.2 };
    double validation_fraction { 0.0 };
    double bandwidth { DensityModel::kDefaultBandwidth };
    double percentile { DensityModel::kDefaultPercentile };
    std::uint64_t seed { 0 };
};

struct Partition {
    SplitDataset split;
    DensityModel density;
};

// random_split -> standardizer and KDE fitted on the training rows -> split_by_density.
auto partition(RawTable const& table, PartitionOptions const& options) -> Partition;

// {"seed", "train_idx", "interp_idx", "extrap_idx", "validation_idx", "validation_dropped_idx"}
auto split_manifest(SplitDataset const& split) -> nlohmann::ordered_json;

} // namespace srkd
