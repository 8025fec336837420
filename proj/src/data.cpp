// SPDX-License-Identifier: MIT
#include "srkd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace srkd {

namespace {

    // Full RFC-4180 record splitter over a whole document; quoted fields may
    // span lines and use "" as an escaped quote.
    auto parse_records(std::string_view text, char delimiter) -> std::vector<std::vector<std::string>>
    {
        std::vector<std::vector<std::string>> records;
        std::vector<std::string> record;
        std::string field;
        bool quoted = false;
        bool field_started = false;
        auto end_field = [&] {
            record.push_back(std::move(field));
            field.clear();
            field_started = false;
        };
        auto end_record = [&] {
            end_field();
            bool const blank = record.size() == 1 && record.front().empty();
            if (!blank) {
                records.push_back(std::move(record));
            }
            record.clear();
        };
        for (std::size_t i = 0; i < text.size(); ++i) {
            char const c = text[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        field.push_back('"');
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    field.push_back(c);
                }
                continue;
            }
            if (c == '"' && !field_started) {
                quoted = true;
                field_started = true;
            } else if (c == delimiter) {
                end_field();
            } else if (c == '\r') {
                // swallowed; CRLF and LF both end a record
            } else if (c == '\n') {
                end_record();
            } else {
                field.push_back(c);
                field_started = true;
            }
        }
        if (quoted) {
            throw DataError("unterminated quoted field at end of input");
        }
        if (field_started || !field.empty() || !record.empty()) {
            end_record();
        }
        return records;
    }

    auto trim(std::string_view s) -> std::string_view
    {
        auto const first = s.find_first_not_of(" \t");
        if (first == std::string_view::npos) {
            return {};
        }
        auto const last = s.find_last_not_of(" \t");
        return s.substr(first, last - first + 1);
    }

    auto parse_cell(std::string_view raw, std::string_view source, std::size_t row, std::string_view column) -> double
    {
        auto const cell = trim(raw);
        double value = 0.0;
        auto const* begin = cell.data();
        auto const* end = cell.data() + cell.size();
        if (!cell.empty() && *begin == '+') {
            ++begin;
        }
        auto const [ptr, ec] = std::from_chars(begin, end, value);
        if (cell.empty() || ec != std::errc {} || ptr != end) {
            throw DataError(fmt::format("{}: row {} column '{}': cannot parse '{}' as a number", source, row, column, raw));
        }
        if (!std::isfinite(value)) {
            throw DataError(fmt::format("{}: row {} column '{}': non-finite value '{}'", source, row, column, raw));
        }
        return value;
    }

} // namespace

auto split_csv_record(std::string_view line, char delimiter) -> std::vector<std::string>
{
    auto records = parse_records(line, delimiter);
    if (records.empty()) {
        return { std::string {} };
    }
    return std::move(records.front());
}

auto read_csv(std::istream& in, std::string_view target_column, char delimiter, std::string_view source) -> RawTable
{
    std::string const text { std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>() };
    auto records = parse_records(text, delimiter);
    if (records.empty()) {
        throw DataError(fmt::format("{}: missing header row", source));
    }
    auto header = std::move(records.front());
    for (auto& name : header) {
        name = std::string(trim(name));
    }
    // UTF-8 byte order mark on the first header cell
    if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) {
        header.front().erase(0, 3);
    }
    auto const target_it = std::find(header.begin(), header.end(), target_column);
    if (target_it == header.end()) {
        throw DataError(fmt::format("{}: target column '{}' not found in header", source, target_column));
    }
    auto const target_idx = static_cast<std::size_t>(target_it - header.begin());
    if (header.size() < 2) {
        throw DataError(fmt::format("{}: no feature columns besides the target", source));
    }

    RawTable table;
    table.target_name = std::string(target_column);
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j != target_idx) {
            table.feature_names.push_back(header[j]);
        }
    }
    auto const n = static_cast<Index>(records.size() - 1);
    auto const d = static_cast<Index>(header.size() - 1);
    if (n < 2) {
        throw DataError(fmt::format("{}: need at least 2 data rows, found {}", source, n));
    }
    table.rows.resize(n, d);
    table.target.resize(n);
    for (Index i = 0; i < n; ++i) {
        auto const& rec = records[static_cast<std::size_t>(i) + 1];
        auto const row_number = static_cast<std::size_t>(i) + 2; // 1-based, header is row 1
        if (rec.size() != header.size()) {
            throw DataError(fmt::format("{}: row {} has {} fields, header has {}", source, row_number, rec.size(), header.size()));
        }
        Index col = 0;
        for (std::size_t j = 0; j < rec.size(); ++j) {
            auto const value = parse_cell(rec[j], source, row_number, header[j]);
            if (j == target_idx) {
                table.target(i) = value;
            } else {
                table.rows(i, col++) = value;
            }
        }
    }
    return table;
}

auto load_csv(std::filesystem::path const& path, std::string_view target_column, char delimiter) -> RawTable
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError(fmt::format("cannot open data file '{}'", path.string()));
    }
    return read_csv(in, target_column, delimiter, path.string());
}

Standardizer::Standardizer(Vector means, Vector std_devs)
    : means_(std::move(means))
    , std_devs_(std::move(std_devs))
{
    if (means_.size() != std_devs_.size()) {
        throw std::invalid_argument("standardizer means and std_devs differ in length");
    }
    if ((std_devs_.array() <= 0.0).any()) {
        throw std::invalid_argument("standardizer std_devs must be strictly positive");
    }
}

auto Standardizer::fit(Matrix const& X, std::vector<std::string> const& names) -> Standardizer
{
    if (X.rows() < 1) {
        throw DataError("cannot standardize an empty matrix");
    }
    Vector means = X.colwise().mean().transpose();
    Vector sds(X.cols());
    for (Index j = 0; j < X.cols(); ++j) {
        auto const var = (X.col(j).array() - means(j)).square().mean();
        if (!(var > 0.0)) {
            auto const name = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)] : fmt::format("#{}", j);
            throw DataError(fmt::format("feature column '{}' has zero variance", name));
        }
        sds(j) = std::sqrt(var);
    }
    return { std::move(means), std::move(sds) };
}

auto Standardizer::transform(Matrix const& X) const -> Matrix
{
    if (X.cols() != dim()) {
        throw std::invalid_argument(fmt::format("standardizer expects {} columns, got {}", dim(), X.cols()));
    }
    return ((X.rowwise() - means_.transpose()).array().rowwise() / std_devs_.transpose().array()).matrix();
}

auto Standardizer::inverse(Matrix const& Z) const -> Matrix
{
    if (Z.cols() != dim()) {
        throw std::invalid_argument(fmt::format("standardizer expects {} columns, got {}", dim(), Z.cols()));
    }
    return ((Z.array().rowwise() * std_devs_.transpose().array()).matrix().rowwise() + means_.transpose());
}

auto random_split(Index n, double test_fraction, std::uint64_t seed, double validation_fraction) -> IndexSplit
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError(fmt::format("test_fraction must lie in (0, 1), got {}", test_fraction));
    }
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError(fmt::format("validation_fraction must lie in [0, 1), got {}", validation_fraction));
    }
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index { 0 });
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    auto const n_test = static_cast<std::size_t>(std::lround(static_cast<double>(n) * test_fraction));
    if (n_test < 1 || n_test >= order.size()) {
        throw DataError(fmt::format("test_fraction {} leaves an empty side for {} rows", test_fraction, n));
    }
    auto const n_train = order.size() - n_test;
    auto const n_val = static_cast<std::size_t>(std::lround(static_cast<double>(n_train) * validation_fraction));
    if (n_train - n_val < 2) {
        throw DataError(fmt::format("validation_fraction {} leaves fewer than 2 training rows", validation_fraction));
    }

    IndexSplit split;
    split.test.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test),
        order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), order.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.validation.begin(), split.validation.end());
    return split;
}

namespace {
    auto make_part(RawTable const& table, Standardizer const& standardizer, std::vector<Index> rows) -> DataPart
    {
        DataPart part;
        part.X = standardizer.transform(take_rows(table.rows, rows));
        part.y = take_rows(table.target, rows);
        part.rows = std::move(rows);
        return part;
    }
} // namespace

auto split_by_density(RawTable const& table, IndexSplit const& indices, Standardizer const& standardizer,
    DensityModel const& density, std::uint64_t seed) -> SplitDataset
{
    if (density.dim() != table.dim() || standardizer.dim() != table.dim()) {
        throw std::invalid_argument("density model, standardizer and table disagree on dimension");
    }
    SplitDataset split;
    split.seed = seed;
    split.standardizer = standardizer;
    split.train = make_part(table, standardizer, indices.train);

    auto classify = [&](std::vector<Index> const& rows, std::vector<Index>& interp, std::vector<Index>& extrap) {
        auto const Z = standardizer.transform(take_rows(table.rows, rows));
        auto const scores = density.log_densities(Z);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            (scores(static_cast<Index>(i)) < density.log_threshold() ? extrap : interp).push_back(rows[i]);
        }
    };

    std::vector<Index> interp;
    std::vector<Index> extrap;
    classify(indices.test, interp, extrap);
    split.test_interp = make_part(table, standardizer, std::move(interp));
    split.test_extrap = make_part(table, standardizer, std::move(extrap));

    std::vector<Index> val_keep;
    classify(indices.validation, val_keep, split.validation_dropped);
    split.validation = make_part(table, standardizer, std::move(val_keep));
    return split;
}

auto partition(RawTable const& table, PartitionOptions const& options) -> Partition
{
    auto const indices = random_split(table.size(), options.test_fraction, options.seed, options.validation_fraction);
    auto standardizer = Standardizer::fit(take_rows(table.rows, indices.train), table.feature_names);
    auto density = DensityModel::fit(standardizer.transform(take_rows(table.rows, indices.train)),
        options.bandwidth, options.percentile);
    auto split = split_by_density(table, indices, standardizer, density, options.seed);
    return { std::move(split), std::move(density) };
}

auto split_manifest(SplitDataset const& split) -> nlohmann::ordered_json
{
    nlohmann::ordered_json j;
    j["seed"] = split.seed;
    j["train_idx"] = split.train.rows;
    j["interp_idx"] = split.test_interp.rows;
    j["extrap_idx"] = split.test_extrap.rows;
    j["validation_idx"] = split.validation.rows;
    j["validation_dropped_idx"] = split.validation_dropped;
    return j;
}

} // namespace srkd
