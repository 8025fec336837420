// SPDX-License-Identifier: MIT
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "srkd/experiment.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
    std::string teachers;
    std::string students;
    std::optional<std::size_t> jobs;
};

void add_common(CLI::App* cmd, Overrides& o, bool needs_config = true)
{
    auto* c = cmd->add_option("--config", o.config, "experiment config (YAML, or a manifest.json)");
    if (needs_config) {
        c->required();
    }
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--runs", o.runs, "number of runs");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--teachers", o.teachers, "teacher list, e.g. NN,GPe or all");
    cmd->add_option("--students", o.students, "student list, e.g. GPp,RF or all");
    cmd->add_option("--jobs", o.jobs, "runs executed concurrently");
}

auto resolve(Overrides const& o) -> srkd::ExperimentConfig
{
    auto cfg = srkd::load_config(o.config);
    if (!o.out.empty()) {
        cfg.out = o.out;
    }
    if (o.runs) {
        cfg.runs = *o.runs;
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (!o.teachers.empty()) {
        cfg.teachers = srkd::parse_model_list(o.teachers);
    }
    if (!o.students.empty()) {
        cfg.students = srkd::parse_model_list(o.students);
    }
    if (o.jobs) {
        cfg.jobs = *o.jobs;
    }
    cfg.validate();
    return cfg;
}

void print_matrix(srkd::ResultMatrix const& m, std::string_view title)
{
    fmt::print("{} (rows: teacher, columns: student)\n{:>6}", title, "");
    for (auto s : m.students) {
        fmt::print("{:>12}", srkd::to_string(s));
    }
    fmt::print("\n");
    for (std::size_t i = 0; i < m.teachers.size(); ++i) {
        fmt::print("{:>6}", srkd::to_string(m.teachers[i]));
        for (auto const& cell : m.cells[i]) {
            auto const text = cell.mean_diff ? fmt::format("{:.2f}{}", *cell.mean_diff, cell.significant ? "*" : "") : "NA";
            fmt::print("{:>12}", text);
        }
        fmt::print("\n");
    }
    fmt::print("positive cells: {}/{}, significant: {}\n", m.positive_cells(), m.teachers.size() * m.students.size(),
        m.significant_positive_cells());
}

} // namespace

auto main(int argc, char** argv) -> int
{
    CLI::App app { "Symbolic-regression knowledge distillation experiments" };
    app.set_version_flag("--version", std::string(srkd::kVersion));
    app.require_subcommand(1);

    Overrides o;
    auto* run = app.add_subcommand("run", "full pipeline: split, teachers, synthetic data, students, matrices");
    add_common(run, o);
    auto* split = app.add_subcommand("split", "data split and density model only");
    add_common(split, o);
    auto* synth = app.add_subcommand("synth", "train teachers and write synthetic sets");
    add_common(synth, o);

    std::string records;
    auto* rep = app.add_subcommand("report", "rebuild matrices from a records.csv");
    rep->add_option("records", records, "records.csv from a previous run")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", o.out, "output directory (default: next to records.csv)");

    double threshold = 1e-3;
    std::size_t min_recovered = 8;
    auto* rec = app.add_subcommand("recover", "GP recovery benchmark on y = sin(x0) + x1");
    add_common(rec, o, false);
    rec->add_option("--threshold", threshold, "training RMSE counted as recovered");
    rec->add_option("--min-recovered", min_recovered, "runs that must recover for exit code 0");

    try {
        app.parse(argc, argv);
    } catch (CLI::ParseError const& e) {
        auto const code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            auto const cfg = resolve(o);
            auto const result = srkd::run_experiment(cfg);
            print_matrix(result.matrices.interpolation, "interpolation perf_diff %");
            print_matrix(result.matrices.extrapolation, "extrapolation perf_diff %");
            fmt::print("{} records written to {}\n", result.records.size(), cfg.out.string());
        } else if (*split) {
            auto const cfg = resolve(o);
            srkd::write_split_artifacts(cfg, cfg.out);
            fmt::print("split written to {}\n", cfg.out.string());
        } else if (*synth) {
            auto const cfg = resolve(o);
            srkd::write_synth_artifacts(cfg, cfg.out);
            fmt::print("synthetic sets written to {}\n", cfg.out.string());
        } else if (*rep) {
            auto const dir = o.out.empty() ? std::filesystem::path(records).parent_path() : std::filesystem::path(o.out);
            auto const m = srkd::report(records, dir);
            print_matrix(m.interpolation, "interpolation perf_diff %");
            print_matrix(m.extrapolation, "extrapolation perf_diff %");
        } else if (*rec) {
            srkd::GpConfig gp;
            std::uint64_t seed = 0;
            std::size_t runs = 10;
            if (!o.config.empty()) {
                auto const cfg = srkd::load_config(o.config);
                gp = cfg.gp;
                seed = cfg.seed;
            }
            if (o.seed) {
                seed = *o.seed;
            }
            if (o.runs) {
                runs = *o.runs;
            }
            auto const report = srkd::formula_recovery(gp, runs, seed, threshold);
            for (auto const& r : report.runs) {
                fmt::print("seed {:>20}  rmse {:.3e}  {:6.2f}s  {}  {}\n", r.seed, r.rmse, r.seconds,
                    r.recovered ? "ok  " : "miss", r.expression);
            }
            fmt::print("recovered {}/{}\n", report.recovered(), report.runs.size());
            return report.recovered() >= std::min(min_recovered, runs) ? 0 : 4;
        }
    } catch (srkd::ConfigError const& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (srkd::DataError const& e) {
        fmt::print(stderr, "data error: {}\n", e.what());
        return 3;
    } catch (srkd::NumericError const& e) {
        fmt::print(stderr, "numeric failure: {}\n", e.what());
        return 4;
    } catch (std::exception const& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
