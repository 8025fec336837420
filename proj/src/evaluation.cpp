// SPDX-License-Identifier: MIT
#include "srkd/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

namespace srkd {

auto rmse(Vector const& y_true, Vector const& y_pred) -> double
{
    if (y_true.size() != y_pred.size()) {
        throw std::invalid_argument(fmt::format("rmse: length mismatch ({} vs {})", y_true.size(), y_pred.size()));
    }
    if (y_true.size() == 0) {
        throw std::invalid_argument("rmse: empty vectors");
    }
    return std::sqrt((y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size()));
}

auto perf_diff(double rmse_base, double rmse_aug) -> std::optional<double>
{
    if (!(rmse_base > 0.0) || !std::isfinite(rmse_base) || !std::isfinite(rmse_aug)) {
        return std::nullopt;
    }
    return (rmse_base - rmse_aug) / rmse_base * 100.0;
}

auto one_sided_t_test(std::span<double const> diffs) -> TTestResult
{
    TTestResult result;
    result.n = diffs.size();
    if (diffs.size() < 2) {
        result.degenerate = true;
        result.p_value = 1.0;
        return result;
    }
    auto const n = static_cast<double>(diffs.size());
    auto const mean = std::accumulate(diffs.begin(), diffs.end(), 0.0) / n;
    auto const [lo, hi] = std::minmax_element(diffs.begin(), diffs.end());
    if (*lo == *hi) {
        result.degenerate = true;
        result.p_value = *lo > 0.0 ? 0.0 : 1.0;
        result.t_statistic = *lo > 0.0 ? std::numeric_limits<double>::infinity() : (*lo < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
        return result;
    }
    double ss = 0.0;
    for (auto d : diffs) {
        ss += (d - mean) * (d - mean);
    }
    auto const sd = std::sqrt(ss / (n - 1.0));
    result.t_statistic = mean / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    result.p_value = boost::math::cdf(boost::math::complement(dist, result.t_statistic));
    return result;
}

auto ResultMatrix::at(ModelKind teacher, ModelKind student) const -> MatrixCell const&
{
    auto const ti = std::find(teachers.begin(), teachers.end(), teacher);
    auto const si = std::find(students.begin(), students.end(), student);
    if (ti == teachers.end() || si == students.end()) {
        throw std::out_of_range(fmt::format("no cell for teacher {} / student {}", to_string(teacher), to_string(student)));
    }
    return cells[static_cast<std::size_t>(ti - teachers.begin())][static_cast<std::size_t>(si - students.begin())];
}

auto ResultMatrix::positive_cells() const -> std::size_t
{
    std::size_t n = 0;
    for (auto const& row : cells) {
        n += static_cast<std::size_t>(std::count_if(row.begin(), row.end(), [](auto const& c) { return c.mean_diff && *c.mean_diff > 0.0; }));
    }
    return n;
}

auto ResultMatrix::significant_positive_cells() const -> std::size_t
{
    std::size_t n = 0;
    for (auto const& row : cells) {
        n += static_cast<std::size_t>(std::count_if(row.begin(), row.end(),
            [](auto const& c) { return c.mean_diff && *c.mean_diff > 0.0 && c.significant; }));
    }
    return n;
}

namespace {

    auto kinds_present(std::vector<RunRecord> const& records, bool teacher) -> std::vector<ModelKind>
    {
        std::vector<ModelKind> out;
        for (auto kind : kAllModelKinds) {
            if (std::any_of(records.begin(), records.end(), [&](auto const& r) { return (teacher ? r.teacher : r.student) == kind; })) {
                out.push_back(kind);
            }
        }
        return out;
    }

    auto build_one(Regime regime, std::vector<ModelKind> const& teachers, std::vector<ModelKind> const& students,
        std::map<std::pair<ModelKind, ModelKind>, std::vector<RunRecord const*>> const& groups) -> ResultMatrix
    {
        ResultMatrix m;
        m.regime = regime;
        m.teachers = teachers;
        m.students = students;
        for (auto t : teachers) {
            auto& row = m.cells.emplace_back();
            for (auto s : students) {
                auto& cell = row.emplace_back();
                auto const& recs = groups.at({ t, s });
                cell.runs = recs.size();
                std::vector<double> diffs;
                std::vector<double> paired;
                for (auto const* r : recs) {
                    auto const base = regime == Regime::Interpolation ? r->rmse_interp_base : r->rmse_extrap_base;
                    auto const aug = regime == Regime::Interpolation ? r->rmse_interp_aug : r->rmse_extrap_aug;
                    if (auto d = perf_diff(base, aug)) {
                        diffs.push_back(*d);
                    }
                    if (std::isfinite(base) && std::isfinite(aug)) {
                        paired.push_back(base - aug);
                    }
                }
                cell.valid_runs = diffs.size();
                if (!diffs.empty()) {
                    cell.mean_diff = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(diffs.size());
                }
                cell.test = one_sided_t_test(paired);
                cell.significant = cell.test.p_value < kSignificanceLevel;
            }
        }
        return m;
    }

    auto cell_text(std::optional<double> v) -> std::string
    {
        return v ? format_real(*v) : std::string("NA");
    }

    template <typename F>
    void write_grid(std::ostream& out, ResultMatrix const& m, F&& value)
    {
        out << "teacher";
        for (auto s : m.students) {
            out << ',' << to_string(s);
        }
        out << '\n';
        for (std::size_t i = 0; i < m.teachers.size(); ++i) {
            out << to_string(m.teachers[i]);
            for (auto const& cell : m.cells[i]) {
                out << ',' << value(cell);
            }
            out << '\n';
        }
    }

    auto matrix_json(ResultMatrix const& m) -> nlohmann::ordered_json
    {
        nlohmann::ordered_json j;
        j["regime"] = m.regime == Regime::Interpolation ? "interpolation" : "extrapolation";
        j["rows"] = "teacher";
        j["columns"] = "student";
        std::vector<std::string> teachers;
        std::vector<std::string> students;
        for (auto t : m.teachers) {
            teachers.emplace_back(to_string(t));
        }
        for (auto s : m.students) {
            students.emplace_back(to_string(s));
        }
        j["teachers"] = teachers;
        j["students"] = students;
        auto diff = nlohmann::ordered_json::array();
        auto pval = nlohmann::ordered_json::array();
        auto sig = nlohmann::ordered_json::array();
        auto runs = nlohmann::ordered_json::array();
        for (auto const& row : m.cells) {
            auto d = nlohmann::ordered_json::array();
            auto p = nlohmann::ordered_json::array();
            auto s = nlohmann::ordered_json::array();
            auto r = nlohmann::ordered_json::array();
            for (auto const& c : row) {
                d.push_back(c.mean_diff ? nlohmann::ordered_json(*c.mean_diff) : nlohmann::ordered_json(nullptr));
                p.push_back(c.test.p_value);
                s.push_back(c.significant ? 1 : 0);
                r.push_back(c.runs);
            }
            diff.push_back(d);
            pval.push_back(p);
            sig.push_back(s);
            runs.push_back(r);
        }
        j["perf_diff_percent"] = diff;
        j["p_value"] = pval;
        j["significant"] = sig;
        j["runs"] = runs;
        j["positive_cells"] = m.positive_cells();
        j["significant_positive_cells"] = m.significant_positive_cells();
        j["cells"] = m.teachers.size() * m.students.size();
        return j;
    }

    auto parse_double(std::string const& s) -> double
    {
        double v = 0.0;
        auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc {} || ptr != s.data() + s.size()) {
            throw DataError(fmt::format("records: cannot parse '{}' as a number", s));
        }
        return v;
    }

    auto parse_size(std::string const& s) -> std::uint64_t
    {
        std::uint64_t v = 0;
        auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc {} || ptr != s.data() + s.size()) {
            throw DataError(fmt::format("records: cannot parse '{}' as an integer", s));
        }
        return v;
    }

    constexpr std::array kRecordColumns {
        "run", "run_seed", "teacher", "student", "n_train", "n_synth", "n_interp", "n_extrap", "n_validation",
        "rmse_interp_base", "rmse_interp_aug", "rmse_extrap_base", "rmse_extrap_aug", "rmse_val_base", "rmse_val_aug"
    };

} // namespace

auto build_matrices(std::vector<RunRecord> const& records) -> ExperimentMatrices
{
    if (records.empty()) {
        throw DataError("no run records to aggregate");
    }
    auto const teachers = kinds_present(records, true);
    auto const students = kinds_present(records, false);
    std::map<std::pair<ModelKind, ModelKind>, std::vector<RunRecord const*>> groups;
    for (auto t : teachers) {
        for (auto s : students) {
            groups[{ t, s }];
        }
    }
    for (auto const& r : records) {
        groups[{ r.teacher, r.student }].push_back(&r);
    }
    auto const expected = groups.begin()->second.size();
    for (auto const& [key, recs] : groups) {
        if (recs.size() != expected) {
            throw DataError(fmt::format("ragged result grid: cell {}->{} has {} runs, expected {}",
                to_string(key.first), to_string(key.second), recs.size(), expected));
        }
    }
    return { build_one(Regime::Interpolation, teachers, students, groups),
        build_one(Regime::Extrapolation, teachers, students, groups) };
}

void write_diff_csv(std::ostream& out, ResultMatrix const& m)
{
    write_grid(out, m, [](MatrixCell const& c) { return cell_text(c.mean_diff); });
}

void write_significance_csv(std::ostream& out, ResultMatrix const& m)
{
    write_grid(out, m, [](MatrixCell const& c) { return std::string(c.significant ? "1" : "0"); });
}

void write_pvalue_csv(std::ostream& out, ResultMatrix const& m)
{
    write_grid(out, m, [](MatrixCell const& c) { return format_real(c.test.p_value); });
}

auto matrices_json(ExperimentMatrices const& m) -> nlohmann::ordered_json
{
    nlohmann::ordered_json j;
    j["significance_level"] = kSignificanceLevel;
    j["interpolation"] = matrix_json(m.interpolation);
    j["extrapolation"] = matrix_json(m.extrapolation);
    return j;
}

void write_records_csv(std::ostream& out, std::vector<RunRecord> const& records)
{
    for (std::size_t i = 0; i < kRecordColumns.size(); ++i) {
        out << (i ? "," : "") << kRecordColumns[i];
    }
    out << '\n';
    for (auto const& r : records) {
        out << r.run << ',' << r.run_seed << ',' << to_string(r.teacher) << ',' << to_string(r.student) << ','
            << r.n_train << ',' << r.n_synth << ',' << r.n_interp << ',' << r.n_extrap << ',' << r.n_validation << ','
            << format_real(r.rmse_interp_base) << ',' << format_real(r.rmse_interp_aug) << ','
            << format_real(r.rmse_extrap_base) << ',' << format_real(r.rmse_extrap_aug) << ','
            << format_real(r.rmse_val_base) << ',' << format_real(r.rmse_val_aug) << '\n';
    }
}

auto read_records_csv(std::istream& in) -> std::vector<RunRecord>
{
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("records file is empty");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    auto const header = split_csv_record(line);
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) {
        column[header[i]] = i;
    }
    for (auto const* name : kRecordColumns) {
        if (!column.contains(name)) {
            throw DataError(fmt::format("records file lacks column '{}'", name));
        }
    }
    std::vector<RunRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto const f = split_csv_record(line);
        if (f.size() != header.size()) {
            throw DataError(fmt::format("records line {} has {} fields, header has {}", line_no, f.size(), header.size()));
        }
        auto get = [&](char const* name) -> std::string const& { return f[column.at(name)]; };
        RunRecord r;
        r.run = parse_size(get("run"));
        r.run_seed = parse_size(get("run_seed"));
        r.teacher = parse_model_kind(get("teacher"));
        r.student = parse_model_kind(get("student"));
        r.n_train = parse_size(get("n_train"));
        r.n_synth = parse_size(get("n_synth"));
        r.n_interp = parse_size(get("n_interp"));
        r.n_extrap = parse_size(get("n_extrap"));
        r.n_validation = parse_size(get("n_validation"));
        r.rmse_interp_base = parse_double(get("rmse_interp_base"));
        r.rmse_interp_aug = parse_double(get("rmse_interp_aug"));
        r.rmse_extrap_base = parse_double(get("rmse_extrap_base"));
        r.rmse_extrap_aug = parse_double(get("rmse_extrap_aug"));
        r.rmse_val_base = parse_double(get("rmse_val_base"));
        r.rmse_val_aug = parse_double(get("rmse_val_aug"));
        records.push_back(r);
    }
    return records;
}

auto validation_gate(std::span<GateCandidate const> candidates) -> std::size_t
{
    if (candidates.empty()) {
        throw std::invalid_argument("validation gate needs at least one candidate");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        auto const& c = candidates[i];
        auto const& b = candidates[best];
        if (c.validation_rmse < b.validation_rmse || (c.validation_rmse == b.validation_rmse && c.baseline && !b.baseline)) {
            best = i;
        }
    }
    return best;
}

auto residual_diagnostics(Predictor const& model, SplitDataset const& split, DensityModel const& density)
    -> std::vector<ResidualPoint>
{
    std::vector<ResidualPoint> points;
    auto add = [&](DataPart const& part, bool extrap) {
        if (part.size() == 0) {
            return;
        }
        auto const pred = model.predict(part.X);
        auto const scores = density.log_densities(part.X);
        for (Index i = 0; i < part.size(); ++i) {
            points.push_back({ part.rows[static_cast<std::size_t>(i)], extrap, std::abs(part.y(i) - pred(i)), scores(i),
                part.X.row(i).norm() });
        }
    };
    add(split.test_interp, false);
    add(split.test_extrap, true);
    return points;
}

void write_residuals_csv(std::ostream& out, std::vector<ResidualPoint> const& points, bool header,
    std::string const& prefix_column, std::string const& prefix_value)
{
    if (header) {
        if (!prefix_column.empty()) {
            out << prefix_column << ',';
        }
        out << "row,region,abs_residual,log_density,centroid_distance\n";
    }
    for (auto const& p : points) {
        if (!prefix_column.empty()) {
            out << prefix_value << ',';
        }
        out << p.row << ',' << (p.extrapolation ? "extrap" : "interp") << ',' << format_real(p.abs_residual) << ','
            << format_real(p.log_density) << ',' << format_real(p.centroid_distance) << '\n';
    }
}

} // namespace srkd
