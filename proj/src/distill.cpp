// SPDX-License-Identifier: MIT
#include "srkd/distill.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace srkd {

auto synthetic_count(std::size_t inside_samples) -> std::size_t
{
    auto const ninth = static_cast<double>(inside_samples) / 9.0;
    if (ninth < 1.0) {
        return 1;
    }
    auto const magnitude = std::pow(10.0, std::floor(std::log10(ninth)));
    auto const rounded = std::round(ninth / magnitude) * magnitude;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(rounded)));
}

auto generate_synthetic(Matrix const& X_train, DensityModel const& density, Predictor const& teacher,
    SynthConfig const& cfg) -> SyntheticSet
{
    if (!(cfg.noise_sigma > 0.0) || !std::isfinite(cfg.noise_sigma)) {
        throw ConfigError(fmt::format("synthetic noise sigma must be positive, got {}", cfg.noise_sigma));
    }
    if (cfg.n_synth == 0) {
        throw ConfigError("synthetic sample count must be at least 1");
    }
    if (X_train.cols() != density.dim() || X_train.cols() != teacher.dim()) {
        throw std::invalid_argument("training matrix, density model and teacher disagree on dimension");
    }
    auto const low = density.low_density_subset(X_train);
    if (low.empty()) {
        throw DataError("no training row falls below the density threshold; raise the KDE percentile");
    }

    auto const n = static_cast<Index>(cfg.n_synth);
    auto const d = X_train.cols();
    SyntheticSet synth;
    synth.X_hat.resize(n, d);
    synth.base_indices.resize(cfg.n_synth);
    synth.teacher_id = std::string(teacher.id());

    Rng rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, low.size() - 1);
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    for (Index i = 0; i < n; ++i) {
        auto const base = low[pick(rng)];
        synth.base_indices[static_cast<std::size_t>(i)] = base;
        for (Index k = 0; k < d; ++k) {
            synth.X_hat(i, k) = X_train(base, k) + noise(rng);
        }
    }
    synth.y_hat = teacher.predict(synth.X_hat);
    if (!synth.y_hat.allFinite()) {
        throw NumericError(fmt::format("teacher {} produced a non-finite synthetic label", synth.teacher_id));
    }
    return synth;
}

auto augment(Matrix const& X, Vector const& y, SyntheticSet const& synth) -> std::pair<Matrix, Vector>
{
    if (X.rows() != y.size() || synth.X_hat.rows() != synth.y_hat.size()) {
        throw std::invalid_argument("feature and target row counts differ");
    }
    if (synth.size() > 0 && synth.X_hat.cols() != X.cols()) {
        throw std::invalid_argument(fmt::format("synthetic rows have {} features, training rows {}", synth.X_hat.cols(), X.cols()));
    }
    Matrix Xa(X.rows() + synth.size(), X.cols());
    Vector ya(y.size() + synth.y_hat.size());
    Xa.topRows(X.rows()) = X;
    ya.head(y.size()) = y;
    if (synth.size() > 0) {
        Xa.bottomRows(synth.size()) = synth.X_hat;
        ya.tail(synth.size()) = synth.y_hat;
    }
    return { std::move(Xa), std::move(ya) };
}

void write_synthetic_csv(std::ostream& out, SyntheticSet const& synth, Standardizer const& standardizer,
    std::vector<std::string> const& feature_names, std::vector<Index> const& train_rows, bool header,
    std::string const& prefix_column, std::string const& prefix_value)
{
    auto const raw = standardizer.inverse(synth.X_hat);
    if (header) {
        if (!prefix_column.empty()) {
            out << csv_field(prefix_column) << ',';
        }
        for (auto const& name : feature_names) {
            out << csv_field(name) << ',';
        }
        out << "y_hat,base_index,teacher_id\n";
    }
    for (Index i = 0; i < raw.rows(); ++i) {
        if (!prefix_column.empty()) {
            out << prefix_value << ',';
        }
        for (Index k = 0; k < raw.cols(); ++k) {
            out << format_real(raw(i, k)) << ',';
        }
        auto const base = synth.base_indices[static_cast<std::size_t>(i)];
        auto const table_row = train_rows.empty() ? base : train_rows[static_cast<std::size_t>(base)];
        out << format_real(synth.y_hat(i)) << ',' << table_row << ',' << synth.teacher_id << '\n';
    }
}

} // namespace srkd
