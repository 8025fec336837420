// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "srkd/forest.hpp"
#include "srkd/mlp.hpp"
#include "srkd/predictor.hpp"

using namespace srkd;

namespace {

auto uniform_matrix(Index n, Index d, double lo, double hi, std::uint64_t seed) -> Matrix
{
    Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix X(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index k = 0; k < d; ++k) {
            X(i, k) = u(rng);
        }
    }
    return X;
}

auto max_relative_gradient_error(MlpModel model, Matrix const& X, Vector const& y, double alpha) -> double
{
    auto const analytic = mlp_loss_gradient(model, X, y, alpha);
    double worst = 0.0;
    double const h = 1e-6;
    auto compare = [&](double& param, double grad) {
        auto const saved = param;
        param = saved + h;
        auto const up = mlp_loss(model, X, y, alpha);
        param = saved - h;
        auto const down = mlp_loss(model, X, y, alpha);
        param = saved;
        auto const numeric = (up - down) / (2.0 * h);
        auto const scale = std::max({ std::abs(grad), std::abs(numeric), 1e-6 });
        worst = std::max(worst, std::abs(grad - numeric) / scale);
    };
    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        auto& layer = model.layers()[l];
        for (Index r = 0; r < layer.weights.rows(); ++r) {
            for (Index c = 0; c < layer.weights.cols(); ++c) {
                compare(layer.weights(r, c), analytic.layers[l].weights(r, c));
            }
            compare(layer.bias(r), analytic.layers[l].bias(r));
        }
    }
    return worst;
}

} // namespace

TEST_CASE("MLP analytic gradient matches central differences")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        auto const model = MlpModel::initialize(3, { 8, 5 }, rng);
        auto const X = uniform_matrix(5, 3, -2, 2, seed + 100);
        Vector const y = uniform_matrix(5, 1, -1, 1, seed + 200).col(0);
        CHECK(max_relative_gradient_error(model, X, y, 2e-4) < 1e-5);
        CHECK(max_relative_gradient_error(model, X, y, 0.0) < 1e-5);
    }
}

TEST_CASE("MLP loss includes the weight penalty only")
{
    Rng rng(1);
    auto model = MlpModel::initialize(2, { 3 }, rng);
    auto const X = uniform_matrix(4, 2, -1, 1, 2);
    Vector const y = Vector::Zero(4);
    double sq = 0.0;
    for (auto const& l : model.layers()) {
        sq += l.weights.squaredNorm();
    }
    auto const base = mlp_loss(model, X, y, 0.0);
    CHECK(base == doctest::Approx(model.predict(X).squaredNorm() / 4.0).epsilon(1e-12));
    CHECK(mlp_loss(model, X, y, 0.5) == doctest::Approx(base + 0.5 * sq).epsilon(1e-12));
    model.layers()[0].bias.setConstant(3.0);
    auto const shifted = mlp_loss(model, X, y, 0.0);
    CHECK(mlp_loss(model, X, y, 0.5) == doctest::Approx(shifted + 0.5 * sq).epsilon(1e-12));
}

TEST_CASE("MLP shapes and defaults")
{
    MlpTrainConfig const cfg;
    CHECK(cfg.hidden == std::vector<std::size_t> { 150, 75 });
    CHECK(cfg.l2_alpha == 2e-4);
    CHECK(cfg.learning_rate == 0.01);
    CHECK(cfg.max_iters == 180);

    Rng rng(3);
    auto const model = MlpModel::initialize(4, cfg.hidden, rng);
    REQUIRE(model.layers().size() == 3);
    CHECK(model.layers()[0].weights.rows() == 150);
    CHECK(model.layers()[0].weights.cols() == 4);
    CHECK(model.layers()[1].weights.rows() == 75);
    CHECK(model.layers()[2].weights.rows() == 1);
    CHECK(model.parameter_count() == 4 * 150 + 150 + 150 * 75 + 75 + 75 + 1);
    auto const limit = std::sqrt(6.0 / (4.0 + 150.0));
    CHECK(model.layers()[0].weights.cwiseAbs().maxCoeff() <= limit);
}

TEST_CASE("MLP fits simple targets")
{
    SUBCASE("zero function")
    {
        auto const X = uniform_matrix(200, 2, -1, 1, 4);
        MlpTrainConfig cfg;
        cfg.seed = 1;
        auto const model = train_mlp(X, Vector::Zero(200), cfg);
        CHECK(model.predict(X).cwiseAbs().maxCoeff() < 1e-2);
    }
    SUBCASE("linear target")
    {
        auto const X = uniform_matrix(500, 1, -1, 1, 5);
        Vector const y = 2.0 * X.col(0);
        MlpTrainConfig cfg;
        cfg.seed = 2;
        auto const model = train_mlp(X, y, cfg);
        auto const r = std::sqrt((model.predict(X) - y).squaredNorm() / 500.0);
        CHECK(r < 0.05);
    }
}

TEST_CASE("MLP training is seeded")
{
    auto const X = uniform_matrix(60, 2, -1, 1, 6);
    Vector const y = X.col(0).array().sin() + X.col(1).array();
    MlpTrainConfig cfg;
    cfg.hidden = { 10, 5 };
    cfg.max_iters = 30;
    cfg.seed = 8;
    auto const a = train_mlp(X, y, cfg);
    auto const b = train_mlp(X, y, cfg);
    CHECK(a.to_json() == b.to_json());
    cfg.seed = 9;
    CHECK(train_mlp(X, y, cfg).to_json() != a.to_json());
    auto const back = MlpModel::from_json(a.to_json());
    CHECK((back.predict(X) - a.predict(X)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forest on a constant target is exact")
{
    auto const X = uniform_matrix(40, 2, -1, 1, 7);
    ForestConfig cfg;
    cfg.n_trees = 20;
    auto const f = train_rf(X, Vector::Constant(40, 3.25), cfg);
    for (auto const& t : f.trees()) {
        CHECK(t.nodes().size() == 1);
    }
    CHECK((f.predict(uniform_matrix(10, 2, -50, 50, 8)).array() == 3.25).all());
}

TEST_CASE("depth-one tree splits a step at the midpoint")
{
    Matrix X(20, 1);
    Vector y(20);
    for (Index i = 0; i < 20; ++i) {
        X(i, 0) = -1.0 + 0.1 * static_cast<double>(i) + (i >= 10 ? 0.05 : 0.0);
        y(i) = X(i, 0) < 0.0 ? 0.0 : 1.0;
    }
    std::vector<Index> rows(20);
    std::iota(rows.begin(), rows.end(), 0);
    auto const tree = RegressionTree::grow(X, y, rows, 1);
    REQUIRE(tree.nodes().size() == 3);
    auto const& root = tree.nodes().front();
    CHECK(root.feature == 0);
    CHECK(root.threshold == doctest::Approx((X(9, 0) + X(10, 0)) / 2.0));
    CHECK(tree.depth() == 1);
    double sse = 0.0;
    for (Index i = 0; i < 20; ++i) {
        sse += std::pow(tree.predict(X.row(i).transpose()) - y(i), 2);
    }
    CHECK(sse == 0.0);
}

TEST_CASE("exhaustive split oracle")
{
    // brute force every midpoint of one feature and compare the chosen SSE
    Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        auto const X = uniform_matrix(15, 1, -1, 1, 300 + static_cast<std::uint64_t>(trial));
        Vector const y = uniform_matrix(15, 1, -1, 1, 400 + static_cast<std::uint64_t>(trial)).col(0);
        std::vector<Index> rows(15);
        std::iota(rows.begin(), rows.end(), 0);
        auto const tree = RegressionTree::grow(X, y, rows, 1);
        auto sse_at = [&](double thr) {
            double sl = 0, sr = 0;
            int nl = 0, nr = 0;
            for (Index i = 0; i < 15; ++i) {
                (X(i, 0) <= thr ? sl : sr) += y(i);
                (X(i, 0) <= thr ? nl : nr) += 1;
            }
            double sse = 0;
            for (Index i = 0; i < 15; ++i) {
                auto const m = X(i, 0) <= thr ? sl / nl : sr / nr;
                sse += (y(i) - m) * (y(i) - m);
            }
            return sse;
        };
        std::vector<double> xs(X.data(), X.data() + 15);
        std::sort(xs.begin(), xs.end());
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            best = std::min(best, sse_at((xs[i] + xs[i + 1]) / 2.0));
        }
        REQUIRE(tree.nodes().size() == 3);
        CHECK(sse_at(tree.nodes().front().threshold) == doctest::Approx(best).epsilon(1e-12));
    }
}

TEST_CASE("forest predictions stay inside the target range")
{
    auto const X = uniform_matrix(150, 3, -1, 1, 11);
    Vector const y = (X.col(0).array() * 3.0).exp() + X.col(1).array();
    ForestConfig cfg;
    cfg.n_trees = 50;
    cfg.seed = 3;
    auto const f = train_rf(X, y, cfg);
    auto const Q = uniform_matrix(5000, 3, -100, 100, 12);
    auto const p = f.predict(Q);
    CHECK(p.minCoeff() >= y.minCoeff());
    CHECK(p.maxCoeff() <= y.maxCoeff());
    for (auto const& t : f.trees()) {
        CHECK(t.depth() <= cfg.max_depth);
    }
}

TEST_CASE("depth limit is honoured")
{
    auto const X = uniform_matrix(300, 2, -1, 1, 13);
    Vector const y = uniform_matrix(300, 1, -1, 1, 14).col(0);
    std::vector<Index> rows(300);
    std::iota(rows.begin(), rows.end(), 0);
    for (std::size_t depth : { 0, 1, 3, 6 }) {
        CHECK(RegressionTree::grow(X, y, rows, depth).depth() <= depth);
    }
}

TEST_CASE("isolated training points are reproduced exactly")
{
    auto const X = uniform_matrix(30, 2, -1, 1, 15);
    Vector const y = uniform_matrix(30, 1, -5, 5, 16).col(0);
    ForestConfig cfg;
    cfg.n_trees = 10;
    cfg.bootstrap = false;
    auto const f = train_rf(X, y, cfg);
    auto const p = f.predict(X);
    for (Index i = 0; i < 30; ++i) {
        CHECK(p(i) == doctest::Approx(y(i)).epsilon(1e-12));
    }
}

TEST_CASE("forest defaults, seeding and JSON")
{
    ForestConfig const defaults;
    CHECK(defaults.n_trees == 1000);
    CHECK(defaults.max_depth == 25);

    auto const X = uniform_matrix(60, 2, -1, 1, 17);
    Vector const y = X.col(0) - X.col(1);
    ForestConfig cfg;
    cfg.n_trees = 15;
    cfg.seed = 4;
    auto const a = train_rf(X, y, cfg);
    cfg.threads = 3;
    auto const b = train_rf(X, y, cfg);
    CHECK(a.to_json() == b.to_json());
    auto const back = ForestModel::from_json(a.to_json());
    CHECK((back.predict(X) - a.predict(X)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predictor dispatch")
{
    Matrix X(2, 2);
    X << 1, 2, 3, 4;
    auto const gp = Predictor::expression(ModelKind::GPe, Expression::parse("(x0 + x1)"), 2);
    auto const p = gp.predict(X);
    CHECK(p(0) == 3.0);
    CHECK(p(1) == 7.0);
    CHECK(gp.id() == "GPe");
    CHECK_THROWS_AS((void)gp.predict(Matrix::Zero(2, 3)), std::invalid_argument);

    Rng rng(1);
    auto const mlp = MlpModel::initialize(2, { 4 }, rng);
    auto const nn = Predictor::mlp(mlp);
    CHECK((nn.predict(X) - mlp.predict(X)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(nn.kind() == ModelKind::NN);
}

TEST_CASE("predictor files round trip")
{
    auto const dir = std::filesystem::temp_directory_path() / "srkd_predictor_test";
    std::filesystem::create_directories(dir);
    auto const X = uniform_matrix(25, 2, -1, 1, 18);
    Vector const y = X.col(0).array().square();
    ForestConfig fc;
    fc.n_trees = 5;
    MlpTrainConfig mc;
    mc.hidden = { 6 };
    mc.max_iters = 5;
    std::vector<Predictor> models { Predictor::forest(train_rf(X, y, fc)), Predictor::mlp(train_mlp(X, y, mc)),
        Predictor::expression(ModelKind::GPp, Expression::parse("sin((x0 / 0.1))"), 2) };
    for (auto const& m : models) {
        auto const path = dir / (std::string(m.id()) + ".json");
        m.save(path);
        auto const back = Predictor::load(path);
        CHECK(back.kind() == m.kind());
        CHECK((back.predict(X) - m.predict(X)).cwiseAbs().maxCoeff() == 0.0);
    }
    nlohmann::json bad = models[2].to_json();
    bad["version"] = 99;
    CHECK_THROWS((void)Predictor::from_json(bad));
    std::filesystem::remove_all(dir);
}

TEST_CASE("model kind labels")
{
    CHECK(parse_model_kind("gpp") == ModelKind::GPp);
    CHECK(parse_model_kind("MLP") == ModelKind::NN);
    CHECK(parse_model_kind("rf") == ModelKind::RF);
    CHECK_THROWS_AS((void)parse_model_kind("svm"), ConfigError);
    for (auto k : kAllModelKinds) {
        CHECK(parse_model_kind(to_string(k)) == k);
    }
}
