// SPDX-License-Identifier: MIT
#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "srkd/core.hpp"
#include "srkd/expression.hpp"

namespace srkd {

struct GpConfig {
    std::size_t islands { 4 };
    std::size_t population_per_island { 200 };
    std::size_t generations { 100 };
    std::size_t max_complexity { 30 };
    double crossover_rate { 0.7 };
    double mutation_rate { 0.25 };
    std::size_t tournament_size { 5 };
    std::size_t migration_interval { 10 };
    std::size_t migration_size { 5 };
    std::size_t init_min_depth { 2 };
    std::size_t init_max_depth { 5 };
    double constant_range { 3.0 }; // fresh constants are uniform in [-range, range]
    std::uint64_t seed { 0 };
    std::size_t threads { 1 }; // islands evolved concurrently; output does not depend on it

    // Throws ConfigError.
    void validate() const;
};

struct FrontEntry {
    Expression expression;
    double loss { 0.0 }; // training MSE
    std::size_t complexity { 0 };
};

// Non-dominated (loss, complexity) set sorted by complexity; along the list
// complexity strictly increases and loss strictly decreases.
class ParetoFront {
public:
    ParetoFront() = default;
    // Validates the ordering invariant; throws std::invalid_argument.
    explicit ParetoFront(std::vector<FrontEntry> entries);
    // Keeps only the non-dominated candidates; the first candidate wins exact ties.
    static auto from_candidates(std::vector<FrontEntry> candidates) -> ParetoFront;

    [[nodiscard]] auto entries() const -> std::vector<FrontEntry> const& { return entries_; }
    [[nodiscard]] auto size() const -> std::size_t { return entries_.size(); }
    [[nodiscard]] auto empty() const -> bool { return entries_.empty(); }
    [[nodiscard]] auto operator[](std::size_t i) const -> FrontEntry const& { return entries_[i]; }

    // [{"complexity", "loss", "expression"}, ...]
    [[nodiscard]] auto to_json() const -> nlohmann::json;
    static auto from_json(nlohmann::json const& j) -> ParetoFront;

private:
    std::vector<FrontEntry> entries_;
};

auto mse(Expression const& expr, Matrix const& X, Vector const& y) -> double;

// Island-model GP over the primitive set {+, -, *, /, log, sin}. Deterministic
// for a given seed; the returned front always contains the mean-constant model.
auto evolve(Matrix const& X, Vector const& y, GpConfig const& config) -> ParetoFront;

inline constexpr double kLossFloor = 1e-12;

// score_i = -log((loss_i / loss_{i-1}) / (complexity_i - complexity_{i-1}))
// over consecutive front entries, losses floored at kLossFloor. The first entry
// scores -inf.
auto gpp_scores(ParetoFront const& front) -> std::vector<double>;

// Index of the maximal score (earliest on ties); 0 for a singleton front.
auto select_gpp_index(ParetoFront const& front) -> std::size_t;
// Index of the minimal loss (lowest complexity on ties).
auto select_gpe_index(ParetoFront const& front) -> std::size_t;

auto select_gpp(ParetoFront const& front) -> Expression const&;
auto select_gpe(ParetoFront const& front) -> Expression const&;

} // namespace srkd
