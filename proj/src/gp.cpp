// SPDX-License-Identifier: MIT
#include "srkd/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace srkd {

void GpConfig::validate() const
{
    auto positive = [](std::size_t v, char const* name) {
        if (v == 0) {
            throw ConfigError(fmt::format("GP {} must be positive", name));
        }
    };
    positive(islands, "islands");
    positive(population_per_island, "population_per_island");
    positive(generations, "generations");
    positive(max_complexity, "max_complexity");
    positive(tournament_size, "tournament_size");
    positive(migration_interval, "migration_interval");
    auto rate = [](double v, char const* name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ConfigError(fmt::format("GP {} must lie in [0, 1], got {}", name, v));
        }
    };
    rate(crossover_rate, "crossover_rate");
    rate(mutation_rate, "mutation_rate");
    if (init_min_depth > init_max_depth) {
        throw ConfigError("GP init_min_depth exceeds init_max_depth");
    }
    if (migration_size >= population_per_island) {
        throw ConfigError("GP migration_size must be smaller than the island population");
    }
    if (!(constant_range > 0.0)) {
        throw ConfigError("GP constant_range must be positive");
    }
}

ParetoFront::ParetoFront(std::vector<FrontEntry> entries)
    : entries_(std::move(entries))
{
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (!std::isfinite(entries_[i].loss) || entries_[i].loss < 0.0 || entries_[i].complexity == 0) {
            throw std::invalid_argument("front entries need a finite non-negative loss and positive complexity");
        }
        if (i > 0 && (entries_[i].complexity <= entries_[i - 1].complexity || entries_[i].loss >= entries_[i - 1].loss)) {
            throw std::invalid_argument("front must have strictly increasing complexity and strictly decreasing loss");
        }
    }
}

auto ParetoFront::from_candidates(std::vector<FrontEntry> candidates) -> ParetoFront
{
    std::erase_if(candidates, [](auto const& c) { return !std::isfinite(c.loss); });
    std::stable_sort(candidates.begin(), candidates.end(), [](auto const& a, auto const& b) {
        return a.complexity != b.complexity ? a.complexity < b.complexity : a.loss < b.loss;
    });
    std::vector<FrontEntry> kept;
    for (auto& c : candidates) {
        if (kept.empty() || (c.loss < kept.back().loss && c.complexity > kept.back().complexity)) {
            kept.push_back(std::move(c));
        }
    }
    return ParetoFront(std::move(kept));
}

auto ParetoFront::to_json() const -> nlohmann::json
{
    auto j = nlohmann::json::array();
    for (auto const& e : entries_) {
        j.push_back({ e.complexity, e.loss, e.expression.to_string() });
    }
    return j;
}

auto ParetoFront::from_json(nlohmann::json const& j) -> ParetoFront
{
    std::vector<FrontEntry> entries;
    for (auto const& item : j) {
        entries.push_back({ Expression::parse(item.at(2).get<std::string>()), item.at(1).get<double>(),
            item.at(0).get<std::size_t>() });
    }
    return ParetoFront(std::move(entries));
}

auto mse(Expression const& expr, Matrix const& X, Vector const& y) -> double
{
    auto const loss = (expr.evaluate(X) - y).squaredNorm() / static_cast<double>(y.size());
    return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
}

namespace {

    struct Individual {
        Expression expr;
        double loss { std::numeric_limits<double>::infinity() };
    };

    auto better(Individual const& a, Individual const& b) -> bool
    {
        return a.loss != b.loss ? a.loss < b.loss : a.expr.size() < b.expr.size();
    }

    constexpr std::array kBinary { Op::Add, Op::Sub, Op::Mul, Op::Div };
    constexpr std::array kUnary { Op::Log, Op::Sin };
    constexpr double kGrowLeafProbability = 0.3;
    constexpr double kVariableProbability = 0.7;
    constexpr double kInternalBias = 0.9;
    constexpr std::size_t kMaxMutationDepth = 3;
    constexpr int kRetries = 10;

    class Island {
    public:
        Island(Matrix const& X, Vector const& y, GpConfig const& cfg, std::uint64_t seed)
            : X_(X)
            , y_(y)
            , cfg_(cfg)
            , rng_(seed)
            , features_(static_cast<std::uint32_t>(X.cols()))
        {
        }

        void initialize()
        {
            auto const span = cfg_.init_max_depth - cfg_.init_min_depth + 1;
            population_.clear();
            population_.reserve(cfg_.population_per_island);
            for (std::size_t k = 0; k < cfg_.population_per_island; ++k) {
                auto const depth = cfg_.init_min_depth + (k / 2) % span;
                bool const full = k % 2 == 0;
                auto expr = random_tree(depth, full);
                population_.push_back(scored(std::move(expr)));
            }
        }

        void step()
        {
            std::vector<Individual> next;
            next.reserve(population_.size());
            next.push_back(population_[best_index()]);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            while (next.size() < population_.size()) {
                auto const& first = population_[tournament()];
                Expression child = first.expr;
                bool changed = false;
                if (u(rng_) < cfg_.crossover_rate) {
                    auto const& second = population_[tournament()];
                    child = crossover(child, second.expr);
                    changed = true;
                }
                if (u(rng_) < cfg_.mutation_rate) {
                    child = mutate(child);
                    changed = true;
                }
                if (changed) {
                    next.push_back(scored(std::move(child)));
                } else {
                    next.push_back(first);
                }
            }
            population_ = std::move(next);
        }

        [[nodiscard]] auto population() const -> std::vector<Individual> const& { return population_; }

        [[nodiscard]] auto best(std::size_t count) const -> std::vector<Individual>
        {
            auto order = ranking();
            std::vector<Individual> out;
            for (std::size_t i = 0; i < std::min(count, order.size()); ++i) {
                out.push_back(population_[order[i]]);
            }
            return out;
        }

        void replace_worst(std::vector<Individual> const& migrants)
        {
            auto order = ranking();
            for (std::size_t i = 0; i < migrants.size() && i < order.size(); ++i) {
                population_[order[order.size() - 1 - i]] = migrants[i];
            }
        }

    private:
        auto ranking() const -> std::vector<std::size_t>
        {
            std::vector<std::size_t> order(population_.size());
            std::iota(order.begin(), order.end(), std::size_t { 0 });
            std::stable_sort(order.begin(), order.end(),
                [&](auto a, auto b) { return better(population_[a], population_[b]); });
            return order;
        }

        auto best_index() const -> std::size_t
        {
            std::size_t best = 0;
            for (std::size_t i = 1; i < population_.size(); ++i) {
                if (better(population_[i], population_[best])) {
                    best = i;
                }
            }
            return best;
        }

        auto scored(Expression expr) const -> Individual
        {
            auto const loss = mse(expr, X_, y_);
            return { std::move(expr), loss };
        }

        auto tournament() -> std::size_t
        {
            std::uniform_int_distribution<std::size_t> pick(0, population_.size() - 1);
            auto winner = pick(rng_);
            for (std::size_t k = 1; k < cfg_.tournament_size; ++k) {
                auto const challenger = pick(rng_);
                if (better(population_[challenger], population_[winner])) {
                    winner = challenger;
                }
            }
            return winner;
        }

        auto random_constant() -> double
        {
            return std::uniform_real_distribution<double>(-cfg_.constant_range, cfg_.constant_range)(rng_);
        }

        auto random_leaf() -> Node
        {
            if (features_ > 0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < kVariableProbability) {
                return { Op::Variable, 0.0, std::uniform_int_distribution<std::uint32_t>(0, features_ - 1)(rng_) };
            }
            return { Op::Constant, random_constant(), 0 };
        }

        auto random_function() -> Op
        {
            auto const k = std::uniform_int_distribution<std::size_t>(0, kBinary.size() + kUnary.size() - 1)(rng_);
            return k < kBinary.size() ? kBinary[k] : kUnary[k - kBinary.size()];
        }

        void grow_into(std::vector<Node>& out, std::size_t depth, bool full)
        {
            bool const leaf = depth == 0
                || (!full && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < kGrowLeafProbability);
            if (leaf) {
                out.push_back(random_leaf());
                return;
            }
            auto const op = random_function();
            out.push_back({ op, 0.0, 0 });
            for (int i = 0; i < arity(op); ++i) {
                grow_into(out, depth - 1, full);
            }
        }

        auto random_nodes(std::size_t depth, bool full, std::size_t limit) -> std::vector<Node>
        {
            std::vector<Node> nodes;
            for (;;) {
                for (int attempt = 0; attempt < kRetries; ++attempt) {
                    nodes.clear();
                    grow_into(nodes, depth, full);
                    if (nodes.size() <= limit) {
                        return nodes;
                    }
                }
                if (depth == 0) {
                    return { random_leaf() };
                }
                --depth;
            }
        }

        auto random_tree(std::size_t depth, bool full) -> Expression
        {
            return Expression(random_nodes(depth, full, cfg_.max_complexity));
        }

        auto pick_node(Expression const& e) -> std::size_t
        {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            auto const n = e.size();
            std::vector<std::size_t> internal;
            for (std::size_t i = 0; i < n; ++i) {
                if (arity(e.nodes()[i].op) > 0) {
                    internal.push_back(i);
                }
            }
            if (!internal.empty() && u(rng_) < kInternalBias) {
                return internal[std::uniform_int_distribution<std::size_t>(0, internal.size() - 1)(rng_)];
            }
            return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
        }

        auto crossover(Expression const& a, Expression const& b) -> Expression
        {
            auto const cut = pick_node(a);
            auto const removed = a.subtree_end(cut) - cut;
            auto const budget = cfg_.max_complexity - (a.size() - removed);
            std::vector<std::size_t> donors;
            for (std::size_t i = 0; i < b.size(); ++i) {
                if (b.subtree_end(i) - i <= budget) {
                    donors.push_back(i);
                }
            }
            if (donors.empty()) {
                return a;
            }
            // prefer function nodes on the donor side as well
            std::vector<std::size_t> internal;
            for (auto i : donors) {
                if (arity(b.nodes()[i].op) > 0) {
                    internal.push_back(i);
                }
            }
            auto const& pool = (!internal.empty() && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < kInternalBias) ? internal : donors;
            auto const donor = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_)];
            return a.replace_subtree(cut, b.subtree(donor));
        }

        auto mutate(Expression const& e) -> Expression
        {
            auto const kind = std::uniform_int_distribution<int>(0, 3)(rng_);
            switch (kind) {
            case 0:
                return mutate_subtree(e);
            case 1:
                return mutate_point(e);
            case 2:
                return mutate_constant(e);
            default:
                return hoist(e);
            }
        }

        auto mutate_subtree(Expression const& e) -> Expression
        {
            auto const at = std::uniform_int_distribution<std::size_t>(0, e.size() - 1)(rng_);
            auto const removed = e.subtree_end(at) - at;
            auto const budget = cfg_.max_complexity - (e.size() - removed);
            auto const depth = std::uniform_int_distribution<std::size_t>(0, kMaxMutationDepth)(rng_);
            auto const grown = random_nodes(depth, false, budget);
            return e.replace_subtree(at, grown);
        }

        auto mutate_point(Expression const& e) -> Expression
        {
            auto const at = std::uniform_int_distribution<std::size_t>(0, e.size() - 1)(rng_);
            auto node = e.nodes()[at];
            switch (arity(node.op)) {
            case 0:
                node = random_leaf();
                break;
            case 1:
                node.op = node.op == Op::Log ? Op::Sin : Op::Log;
                break;
            default: {
                auto const k = std::uniform_int_distribution<std::size_t>(0, kBinary.size() - 2)(rng_);
                auto const current = static_cast<std::size_t>(std::find(kBinary.begin(), kBinary.end(), node.op) - kBinary.begin());
                node.op = kBinary[k >= current ? k + 1 : k];
            }
            }
            std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
            nodes[at] = node;
            return Expression(std::move(nodes));
        }

        auto mutate_constant(Expression const& e) -> Expression
        {
            std::vector<std::size_t> constants;
            for (std::size_t i = 0; i < e.size(); ++i) {
                if (e.nodes()[i].op == Op::Constant) {
                    constants.push_back(i);
                }
            }
            if (constants.empty()) {
                return mutate_point(e);
            }
            auto const at = constants[std::uniform_int_distribution<std::size_t>(0, constants.size() - 1)(rng_)];
            std::vector<Node> nodes(e.nodes().begin(), e.nodes().end());
            auto& c = nodes[at].value;
            c += std::normal_distribution<double>(0.0, 0.1 * std::max(1.0, std::abs(c)))(rng_);
            if (!std::isfinite(c)) {
                c = random_constant();
            }
            return Expression(std::move(nodes));
        }

        auto hoist(Expression const& e) -> Expression
        {
            if (e.size() == 1) {
                return mutate_point(e);
            }
            auto const at = std::uniform_int_distribution<std::size_t>(1, e.size() - 1)(rng_);
            auto const sub = e.subtree(at);
            return Expression(std::vector<Node>(sub.begin(), sub.end()));
        }

        Matrix const& X_;
        Vector const& y_;
        GpConfig const& cfg_;
        Rng rng_;
        std::uint32_t features_;
        std::vector<Individual> population_;
    };

    class HallOfFame {
    public:
        explicit HallOfFame(std::size_t max_complexity)
            : best_(max_complexity + 1)
        {
        }

        void offer(Expression const& expr, double loss)
        {
            if (!std::isfinite(loss) || expr.size() >= best_.size()) {
                return;
            }
            auto& slot = best_[expr.size()];
            if (!slot || loss < slot->loss) {
                slot = FrontEntry { expr, loss, expr.size() };
            }
        }

        [[nodiscard]] auto front() const -> ParetoFront
        {
            std::vector<FrontEntry> candidates;
            for (auto const& slot : best_) {
                if (slot) {
                    candidates.push_back(*slot);
                }
            }
            return ParetoFront::from_candidates(std::move(candidates));
        }

    private:
        std::vector<std::optional<FrontEntry>> best_;
    };

} // namespace

auto evolve(Matrix const& X, Vector const& y, GpConfig const& config) -> ParetoFront
{
    config.validate();
    if (X.rows() != y.size() || X.rows() < 2) {
        throw std::invalid_argument(fmt::format("evolve needs matching X/y with at least 2 rows (got {} and {})", X.rows(), y.size()));
    }

    HallOfFame hof(config.max_complexity);
    auto const mean = Expression::constant(y.mean());
    hof.offer(mean, mse(mean, X, y));

    std::vector<Island> islands;
    islands.reserve(config.islands);
    for (std::size_t i = 0; i < config.islands; ++i) {
        islands.emplace_back(X, y, config, derive_seed(config.seed, i));
    }
    auto record = [&] {
        for (auto const& island : islands) {
            for (auto const& ind : island.population()) {
                hof.offer(ind.expr, ind.loss);
            }
        }
    };

    parallel_for(islands.size(), config.threads, [&](std::size_t i) { islands[i].initialize(); });
    record();
    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
        parallel_for(islands.size(), config.threads, [&](std::size_t i) { islands[i].step(); });
        record();
        if (islands.size() > 1 && config.migration_size > 0 && gen % config.migration_interval == 0 && gen < config.generations) {
            std::vector<std::vector<Individual>> emigrants;
            emigrants.reserve(islands.size());
            for (auto const& island : islands) {
                emigrants.push_back(island.best(config.migration_size));
            }
            for (std::size_t i = 0; i < islands.size(); ++i) {
                islands[(i + 1) % islands.size()].replace_worst(emigrants[i]);
            }
        }
    }
    return hof.front();
}

auto gpp_scores(ParetoFront const& front) -> std::vector<double>
{
    std::vector<double> scores(front.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 1; i < front.size(); ++i) {
        auto const loss = std::max(front[i].loss, kLossFloor);
        auto const prev = std::max(front[i - 1].loss, kLossFloor);
        auto const dc = static_cast<double>(front[i].complexity - front[i - 1].complexity);
        scores[i] = -std::log((loss / prev) / dc);
    }
    return scores;
}

auto select_gpp_index(ParetoFront const& front) -> std::size_t
{
    if (front.empty()) {
        throw std::invalid_argument("cannot select from an empty front");
    }
    auto const scores = gpp_scores(front);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) {
            best = i;
        }
    }
    return best;
}

auto select_gpe_index(ParetoFront const& front) -> std::size_t
{
    if (front.empty()) {
        throw std::invalid_argument("cannot select from an empty front");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < front.size(); ++i) {
        if (front[i].loss < front[best].loss
            || (front[i].loss == front[best].loss && front[i].complexity < front[best].complexity)) {
            best = i;
        }
    }
    return best;
}

auto select_gpp(ParetoFront const& front) -> Expression const&
{
    return front[select_gpp_index(front)].expression;
}

auto select_gpe(ParetoFront const& front) -> Expression const&
{
    return front[select_gpe_index(front)].expression;
}

} // namespace srkd
