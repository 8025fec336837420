// SPDX-License-Identifier: MIT
#pragma once

#include <iosfwd>
#include <vector>

#include "srkd/core.hpp"

namespace srkd {

// Linear interpolation between order statistics: position p * (n - 1) in the
// sorted sample. Requires a non-empty sample and 0 <= p <= 1.
auto percentile_linear(std::vector<double> values, double p) -> double;

// Gaussian kernel density estimate over standardized features with a single
// isotropic bandwidth. The kernel carries its full normalization constant
// (2 pi h^2)^(-d/2), so exp(log_density) is a proper density.
//
// The extrapolation threshold is the `percentile` quantile of the reference
// points' own log-density scores. A point is flagged when its score is
// strictly below the threshold; ties stay in the interpolation region.
class DensityModel {
public:
    static constexpr double kDefaultBandwidth = 0.3;
    static constexpr double kDefaultPercentile = 0.10;

    DensityModel() = default;

    // Throws std::invalid_argument for an empty reference set, a non-positive
    // bandwidth, or a percentile outside [0, 1). A percentile of 0 is the
    // limiting case that flags nothing.
    static auto fit(Matrix reference, double bandwidth = kDefaultBandwidth,
        double percentile = kDefaultPercentile) -> DensityModel;

    [[nodiscard]] auto log_density(Eigen::Ref<Vector const> const& x) const -> double;
    [[nodiscard]] auto log_densities(Matrix const& X) const -> Vector;
    [[nodiscard]] auto is_extrapolation(Eigen::Ref<Vector const> const& x) const -> bool;

    // Indices of the rows of X whose score falls below the threshold, ascending.
    [[nodiscard]] auto low_density_subset(Matrix const& X) const -> std::vector<Index>;

    [[nodiscard]] auto reference_points() const -> Matrix const& { return reference_; }
    [[nodiscard]] auto reference_scores() const -> Vector const& { return reference_scores_; }
    [[nodiscard]] auto bandwidth() const -> double { return bandwidth_; }
    [[nodiscard]] auto percentile() const -> double { return percentile_; }
    [[nodiscard]] auto log_threshold() const -> double { return log_threshold_; }
    [[nodiscard]] auto dim() const -> Index { return reference_.cols(); }

private:
    void check_dim(Index d) const;

    Matrix reference_;
    Vector reference_scores_;
    double bandwidth_ { kDefaultBandwidth };
    double percentile_ { kDefaultPercentile };
    double log_threshold_ { 0.0 };
    double log_norm_ { 0.0 }; // -log(M) - d/2 log(2 pi h^2)
};

inline auto fit_kde(Matrix X_std, double bandwidth = DensityModel::kDefaultBandwidth,
    double percentile = DensityModel::kDefaultPercentile) -> DensityModel
{
    return DensityModel::fit(std::move(X_std), bandwidth, percentile);
}

// CSV with columns index,score,flag for every row of X.
void write_density_scores(std::ostream& out, DensityModel const& model, Matrix const& X);

} // namespace srkd
