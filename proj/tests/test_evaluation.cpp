// SPDX-License-Identifier: MIT
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "srkd/evaluation.hpp"
#include "ttest_oracle.hpp"

using namespace srkd;

namespace {

auto vec(std::initializer_list<double> v) -> Vector
{
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) {
        out(i++) = x;
    }
    return out;
}

auto record(std::size_t run, ModelKind t, ModelKind s, double ib, double ia, double eb, double ea) -> RunRecord
{
    RunRecord r;
    r.run = run;
    r.run_seed = 1000 + run;
    r.teacher = t;
    r.student = s;
    r.rmse_interp_base = ib;
    r.rmse_interp_aug = ia;
    r.rmse_extrap_base = eb;
    r.rmse_extrap_aug = ea;
    r.rmse_val_base = ib;
    r.rmse_val_aug = ia;
    r.n_train = 10;
    return r;
}

} // namespace

TEST_CASE("rmse")
{
    CHECK(rmse(vec({ 1, 2, 3 }), vec({ 1, 2, 3 })) == 0.0);
    CHECK(rmse(vec({ 0, 0 }), vec({ 3, 4 })) == doctest::Approx(3.5355339059327378).epsilon(1e-15));
    CHECK(rmse(vec({ 1, 1, 1, 1 }), vec({ -1.5, -1.5, -1.5, -1.5 })) == doctest::Approx(2.5));
    CHECK_THROWS_AS((void)rmse(Vector(0), Vector(0)), std::invalid_argument);
    CHECK_THROWS_AS((void)rmse(vec({ 1 }), vec({ 1, 2 })), std::invalid_argument);
}

TEST_CASE("performance difference")
{
    CHECK(*perf_diff(2.0, 2.0) == 0.0);
    CHECK(*perf_diff(1.0, 1.7344) == doctest::Approx(-73.44).epsilon(1e-12));
    CHECK(*perf_diff(1.0, 0.8717) == doctest::Approx(12.83).epsilon(1e-12));
    CHECK_FALSE(perf_diff(0.0, 1.0).has_value());
    CHECK_FALSE(perf_diff(std::nan(""), 1.0).has_value());
    Rng rng(1);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int i = 0; i < 100; ++i) {
        auto const b = u(rng);
        auto const a = u(rng);
        auto const k = u(rng);
        CHECK((*perf_diff(b, a) > 0) == (a < b));
        CHECK(*perf_diff(k * b, k * a) == doctest::Approx(*perf_diff(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("t-test examples")
{
    std::vector<double> const d { 1.0, 1.1, 0.9, 1.0, 1.0 };
    auto const r = one_sided_t_test(d);
    CHECK(r.t_statistic == doctest::Approx(31.622776601683793).epsilon(1e-12));
    CHECK(r.p_value < 1e-5);
    CHECK(r.n == 5);

    std::vector<double> const sym { 1.0, -1.0 };
    auto const s = one_sided_t_test(sym);
    CHECK(s.t_statistic == 0.0);
    CHECK(s.p_value == doctest::Approx(0.5).epsilon(1e-15));

    std::vector<double> const neg { -0.5, -0.2, -0.9, 0.1 };
    CHECK(one_sided_t_test(neg).p_value > 0.5);
}

TEST_CASE("t-test degenerate inputs")
{
    std::vector<double> const one { 2.0 };
    CHECK(one_sided_t_test(one).p_value == 1.0);
    CHECK(one_sided_t_test(one).degenerate);
    CHECK(one_sided_t_test(std::vector<double> {}).p_value == 1.0);
    std::vector<double> const flat_up { 0.3, 0.3, 0.3 };
    CHECK(one_sided_t_test(flat_up).p_value == 0.0);
    std::vector<double> const flat_zero { 0.0, 0.0 };
    CHECK(one_sided_t_test(flat_zero).p_value == 1.0);
}

TEST_CASE("t-test matches the reference implementation")
{
    for (auto const& c : oracle::kTTestOracle) {
        auto const r = one_sided_t_test(c.diffs);
        CHECK(r.t_statistic == doctest::Approx(c.t).epsilon(1e-10));
        CHECK(std::abs(r.p_value - c.p) < 1e-9);
    }
}

TEST_CASE("shifting diffs upward lowers p")
{
    std::vector<double> d { 0.1, -0.3, 0.4, 0.05, -0.1, 0.2 };
    double prev = one_sided_t_test(d).p_value;
    for (int step = 0; step < 10; ++step) {
        for (auto& x : d) {
            x += 0.05;
        }
        auto const p = one_sided_t_test(d).p_value;
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("single run with no change gives zero matrices")
{
    std::vector<RunRecord> recs;
    for (auto t : kAllModelKinds) {
        for (auto s : kAllModelKinds) {
            recs.push_back(record(0, t, s, 1.0, 1.0, 2.0, 2.0));
        }
    }
    auto const m = build_matrices(recs);
    CHECK(m.interpolation.teachers.size() == 4);
    CHECK(m.interpolation.students.size() == 4);
    for (auto const& row : m.extrapolation.cells) {
        for (auto const& c : row) {
            CHECK(*c.mean_diff == 0.0);
            CHECK_FALSE(c.significant);
        }
    }
    CHECK(m.interpolation.positive_cells() == 0);
}

TEST_CASE("matrices match a brute-force aggregation")
{
    Rng rng(21);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::vector<RunRecord> recs;
    for (std::size_t run = 0; run < 6; ++run) {
        for (auto t : kAllModelKinds) {
            for (auto s : kAllModelKinds) {
                recs.push_back(record(run, t, s, u(rng), u(rng), u(rng), u(rng)));
            }
        }
    }
    std::shuffle(recs.begin(), recs.end(), rng);
    auto const m = build_matrices(recs);

    std::size_t positive = 0;
    std::size_t significant = 0;
    for (auto t : kAllModelKinds) {
        for (auto s : kAllModelKinds) {
            double sum = 0.0;
            std::vector<double> diffs;
            for (auto const& r : recs) {
                if (r.teacher == t && r.student == s) {
                    sum += (r.rmse_extrap_base - r.rmse_extrap_aug) / r.rmse_extrap_base * 100.0;
                    diffs.push_back(r.rmse_extrap_base - r.rmse_extrap_aug);
                }
            }
            auto const& cell = m.extrapolation.at(t, s);
            CHECK(cell.runs == 6);
            CHECK(*cell.mean_diff == doctest::Approx(sum / 6.0).epsilon(1e-12));
            CHECK(cell.test.p_value == one_sided_t_test(diffs).p_value);
            CHECK(cell.significant == (cell.test.p_value < 0.05));
            if (sum > 0) {
                ++positive;
                significant += cell.significant ? 1 : 0;
            }
        }
    }
    CHECK(m.extrapolation.positive_cells() == positive);
    CHECK(m.extrapolation.significant_positive_cells() == significant);
}

TEST_CASE("partial grids and ragged cells")
{
    std::vector<RunRecord> recs { record(0, ModelKind::GPe, ModelKind::GPp, 1, 0.5, 1, 0.5) };
    auto const m = build_matrices(recs);
    CHECK(m.interpolation.teachers == std::vector<ModelKind> { ModelKind::GPe });
    CHECK(m.interpolation.students == std::vector<ModelKind> { ModelKind::GPp });
    CHECK(*m.interpolation.at(ModelKind::GPe, ModelKind::GPp).mean_diff == 50.0);

    recs.push_back(record(0, ModelKind::GPe, ModelKind::NN, 1, 1, 1, 1));
    recs.push_back(record(1, ModelKind::GPe, ModelKind::NN, 1, 1, 1, 1));
    CHECK_THROWS_AS((void)build_matrices(recs), DataError);
}

TEST_CASE("missing extrapolation rows leave the cell undefined")
{
    auto const nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<RunRecord> recs { record(0, ModelKind::NN, ModelKind::RF, 1, 0.9, nan, nan),
        record(1, ModelKind::NN, ModelKind::RF, 1, 0.8, 2.0, 1.0) };
    auto const m = build_matrices(recs);
    auto const& cell = m.extrapolation.at(ModelKind::NN, ModelKind::RF);
    CHECK(cell.runs == 2);
    CHECK(cell.valid_runs == 1);
    CHECK(*cell.mean_diff == 50.0);

    std::ostringstream out;
    write_diff_csv(out, build_matrices({ record(0, ModelKind::NN, ModelKind::RF, 1, 0.9, nan, nan) }).extrapolation);
    CHECK(out.str() == "teacher,RF\nNN,NA\n");
}

TEST_CASE("matrix exports")
{
    std::vector<RunRecord> recs { record(0, ModelKind::NN, ModelKind::NN, 2, 1, 1, 2),
        record(0, ModelKind::NN, ModelKind::RF, 4, 3, 1, 1) };
    auto const m = build_matrices(recs);
    std::ostringstream diff;
    write_diff_csv(diff, m.interpolation);
    CHECK(diff.str() == "teacher,NN,RF\nNN,50,25\n");
    std::ostringstream sig;
    write_significance_csv(sig, m.interpolation);
    CHECK(sig.str() == "teacher,NN,RF\nNN,0,0\n");
    auto const j = matrices_json(m);
    CHECK(j["interpolation"]["perf_diff_percent"][0][0] == 50.0);
    CHECK(j["extrapolation"]["perf_diff_percent"][0][0] == -100.0);
}

TEST_CASE("records round trip through csv")
{
    std::vector<RunRecord> recs { record(0, ModelKind::NN, ModelKind::GPe, 0.1, 0.2, 0.3, 0.4),
        record(3, ModelKind::GPp, ModelKind::RF, 1.0 / 3.0, 2.0 / 7.0, std::nan(""), std::nan("")) };
    recs[1].n_synth = 200;
    std::ostringstream out;
    write_records_csv(out, recs);
    std::istringstream in(out.str());
    auto const back = read_records_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[1].rmse_interp_base == recs[1].rmse_interp_base);
    CHECK(back[1].rmse_interp_aug == recs[1].rmse_interp_aug);
    CHECK(std::isnan(back[1].rmse_extrap_base));
    CHECK(back[1].teacher == ModelKind::GPp);
    CHECK(back[1].n_synth == 200);
    CHECK(back[0].run_seed == 1000);
    std::ostringstream again;
    write_records_csv(again, back);
    CHECK(again.str() == out.str());
}

TEST_CASE("validation gate")
{
    std::vector<GateCandidate> base_wins { { "base", 1.0, true }, { "NN", 1.2, false }, { "RF", 1.1, false } };
    CHECK(validation_gate(base_wins) == 0);
    std::vector<GateCandidate> aug_wins { { "base", 1.0, true }, { "NN", 1.2, false }, { "RF", 0.9, false } };
    CHECK(validation_gate(aug_wins) == 2);
    std::vector<GateCandidate> tie { { "NN", 1.0, false }, { "base", 1.0, true } };
    CHECK(validation_gate(tie) == 1);
    std::vector<GateCandidate> nan_aug { { "base", 1.0, true }, { "NN", std::nan(""), false } };
    CHECK(validation_gate(nan_aug) == 0);
    CHECK_THROWS((void)validation_gate(std::vector<GateCandidate> {}));

    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<GateCandidate> c { { "base", std::round(u(rng) * 10) / 10, true } };
        for (int k = 0; k < 4; ++k) {
            c.push_back({ "aug", std::round(u(rng) * 10) / 10, false });
        }
        CHECK(c[validation_gate(c)].validation_rmse <= c[0].validation_rmse);
    }
}

TEST_CASE("residual diagnostics")
{
    // 1-D grid; a constant-mean model has residual |x - mean|
    RawTable table;
    table.feature_names = { "x" };
    table.target_name = "y";
    table.rows.resize(41, 1);
    table.target.resize(41);
    for (Index i = 0; i < 41; ++i) {
        table.rows(i, 0) = -2.0 + 0.1 * static_cast<double>(i);
        table.target(i) = table.rows(i, 0);
    }
    IndexSplit idx;
    for (Index i = 0; i < 41; ++i) {
        bool const inner = i >= 8 && i <= 32;
        ((inner && i % 4 != 0) ? idx.train : idx.test).push_back(i);
    }
    auto const X_train = take_rows(table.rows, idx.train);
    auto const st = Standardizer::fit(X_train);
    auto const density = DensityModel::fit(st.transform(X_train), 0.3, 0.10);
    auto const split = split_by_density(table, idx, st, density);
    REQUIRE(split.has_extrapolation());

    auto const mean = split.train.y.mean();
    auto const model = Predictor::expression(ModelKind::GPp, Expression::constant(mean), 1);
    auto const pts = residual_diagnostics(model, split, density);
    REQUIRE(pts.size() == idx.test.size());
    for (auto const& p : pts) {
        CHECK(p.abs_residual == doctest::Approx(std::abs(table.target(p.row) - mean)).epsilon(1e-12));
        auto const z = (table.rows(p.row, 0) - st.means()(0)) / st.std_devs()(0);
        CHECK(p.centroid_distance == doctest::Approx(std::abs(z)).epsilon(1e-12));
    }
    // the largest residuals belong to extrapolation points
    auto sorted = pts;
    std::sort(sorted.begin(), sorted.end(), [](auto const& a, auto const& b) { return a.abs_residual > b.abs_residual; });
    auto const decile = std::max<std::size_t>(1, sorted.size() / 10);
    for (std::size_t i = 0; i < decile; ++i) {
        CHECK(sorted[i].extrapolation);
    }

    // x = z * sd + mean undoes the standardization, so this model is exact
    auto const exact = Expression::binary(Op::Add,
        Expression::binary(Op::Mul, Expression::variable(0), Expression::constant(st.std_devs()(0))),
        Expression::constant(st.means()(0)));
    for (auto const& p : residual_diagnostics(Predictor::expression(ModelKind::GPe, exact, 1), split, density)) {
        CHECK(p.abs_residual < 1e-12);
    }

    std::ostringstream out;
    write_residuals_csv(out, pts);
    CHECK(out.str().rfind("row,region,abs_residual,log_density,centroid_distance\n", 0) == 0);
}
