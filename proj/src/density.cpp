// SPDX-License-Identifier: MIT
#include "srkd/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

namespace srkd {

auto percentile_linear(std::vector<double> values, double p) -> double
{
    if (values.empty()) {
        throw std::invalid_argument("percentile of an empty sample");
    }
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument(fmt::format("percentile {} outside [0, 1]", p));
    }
    std::sort(values.begin(), values.end());
    auto const pos = p * static_cast<double>(values.size() - 1);
    auto const lo = static_cast<std::size_t>(std::floor(pos));
    auto const hi = std::min(lo + 1, values.size() - 1);
    auto const frac = pos - static_cast<double>(lo);
    if (frac == 0.0) {
        return values[lo];
    }
    return values[lo] + frac * (values[hi] - values[lo]);
}

auto DensityModel::fit(Matrix reference, double bandwidth, double percentile) -> DensityModel
{
    if (reference.rows() < 1 || reference.cols() < 1) {
        throw std::invalid_argument("KDE needs at least one reference point");
    }
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
        throw std::invalid_argument(fmt::format("KDE bandwidth must be positive, got {}", bandwidth));
    }
    if (!(percentile >= 0.0 && percentile < 1.0)) {
        throw std::invalid_argument(fmt::format("KDE percentile must lie in [0, 1), got {}", percentile));
    }

    DensityModel model;
    model.reference_ = std::move(reference);
    model.bandwidth_ = bandwidth;
    model.percentile_ = percentile;
    auto const m = static_cast<double>(model.reference_.rows());
    auto const d = static_cast<double>(model.reference_.cols());
    model.log_norm_ = -std::log(m) - 0.5 * d * std::log(2.0 * std::numbers::pi * bandwidth * bandwidth);

    model.reference_scores_ = model.log_densities(model.reference_);
    std::vector<double> scores(model.reference_scores_.begin(), model.reference_scores_.end());
    model.log_threshold_ = percentile_linear(std::move(scores), percentile);
    return model;
}

void DensityModel::check_dim(Index d) const
{
    if (d != reference_.cols()) {
        throw std::invalid_argument(fmt::format("query has dimension {}, KDE was fitted on {}", d, reference_.cols()));
    }
}

auto DensityModel::log_density(Eigen::Ref<Vector const> const& x) const -> double
{
    check_dim(x.size());
    auto const scale = -0.5 / (bandwidth_ * bandwidth_);
    // log-sum-exp over the kernel exponents
    Vector exponents = scale * (reference_.rowwise() - x.transpose()).rowwise().squaredNorm();
    auto const peak = exponents.maxCoeff();
    auto const sum = (exponents.array() - peak).exp().sum();
    return peak + std::log(sum) + log_norm_;
}

auto DensityModel::log_densities(Matrix const& X) const -> Vector
{
    check_dim(X.cols());
    Vector out(X.rows());
    for (Index i = 0; i < X.rows(); ++i) {
        out(i) = log_density(Vector(X.row(i).transpose()));
    }
    return out;
}

auto DensityModel::is_extrapolation(Eigen::Ref<Vector const> const& x) const -> bool
{
    return log_density(x) < log_threshold_;
}

auto DensityModel::low_density_subset(Matrix const& X) const -> std::vector<Index>
{
    auto const scores = log_densities(X);
    std::vector<Index> out;
    for (Index i = 0; i < scores.size(); ++i) {
        if (scores(i) < log_threshold_) {
            out.push_back(i);
        }
    }
    return out;
}

void write_density_scores(std::ostream& out, DensityModel const& model, Matrix const& X)
{
    auto const scores = model.log_densities(X);
    out << "index,score,flag\n";
    for (Index i = 0; i < scores.size(); ++i) {
        out << i << ',' << format_real(scores(i)) << ',' << (scores(i) < model.log_threshold() ? 1 : 0) << '\n';
    }
}

} // namespace srkd
