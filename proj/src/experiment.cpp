// SPDX-License-Identifier: MIT
#include "srkd/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace srkd {

auto seed_schedule(std::uint64_t master, std::uint64_t run, std::string_view role) -> std::uint64_t
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : role) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    auto s = mix64(master ^ 0x5851f42d4c957f2dULL);
    s = mix64(s ^ mix64(run + 0x9e3779b97f4a7c15ULL));
    return mix64(s ^ mix64(h));
}

auto synth_role(ModelKind teacher) -> std::string
{
    return fmt::format("synth:{}", to_string(teacher));
}

auto run_seed_roles() -> std::vector<std::string>
{
    std::vector<std::string> roles { "split", "nn", "rf", "gp" };
    for (auto k : kAllModelKinds) {
        roles.push_back(synth_role(k));
    }
    return roles;
}

auto ModelSet::get(ModelKind kind) const -> Predictor const&
{
    std::optional<Predictor> const* slot = nullptr;
    switch (kind) {
    case ModelKind::NN: slot = &nn; break;
    case ModelKind::RF: slot = &rf; break;
    case ModelKind::GPp: slot = &gpp; break;
    case ModelKind::GPe: slot = &gpe; break;
    }
    if (slot == nullptr || !slot->has_value()) {
        throw std::logic_error(fmt::format("model {} was not trained", to_string(kind)));
    }
    return **slot;
}

auto train_models(Matrix const& X, Vector const& y, std::vector<ModelKind> const& kinds, ExperimentConfig const& cfg,
    std::size_t run) -> ModelSet
{
    auto wants = [&](auto pred) { return std::any_of(kinds.begin(), kinds.end(), pred); };
    ModelSet set;
    if (wants([](ModelKind k) { return k == ModelKind::NN; })) {
        auto mc = cfg.mlp;
        mc.seed = seed_schedule(cfg.seed, run, "nn");
        set.nn = Predictor::mlp(train_mlp(X, y, mc));
    }
    if (wants([](ModelKind k) { return k == ModelKind::RF; })) {
        auto fc = cfg.forest;
        fc.seed = seed_schedule(cfg.seed, run, "rf");
        set.rf = Predictor::forest(train_rf(X, y, fc));
    }
    if (wants(is_gp)) {
        auto gc = cfg.gp;
        gc.seed = seed_schedule(cfg.seed, run, "gp");
        set.front = evolve(X, y, gc);
        set.gpp = Predictor::expression(ModelKind::GPp, select_gpp(*set.front), X.cols());
        set.gpe = Predictor::expression(ModelKind::GPe, select_gpe(*set.front), X.cols());
    }
    return set;
}

auto inside_rows(Partition const& part) -> std::size_t
{
    auto const& split = part.split;
    auto const flagged = part.density.low_density_subset(split.train.X).size();
    return static_cast<std::size_t>(split.train.size()) - flagged + static_cast<std::size_t>(split.test_interp.size())
        + static_cast<std::size_t>(split.validation.size());
}

auto partition_options(ExperimentConfig const& cfg, std::size_t run) -> PartitionOptions
{
    PartitionOptions opts;
    opts.test_fraction = cfg.test_fraction;
    opts.validation_fraction = cfg.validation_fraction;
    opts.bandwidth = cfg.kde_bandwidth;
    opts.percentile = cfg.kde_percentile;
    opts.seed = seed_schedule(cfg.seed, run, "split");
    return opts;
}

auto synth_config(ExperimentConfig const& cfg, std::size_t run, ModelKind teacher, std::size_t inside_rows) -> SynthConfig
{
    SynthConfig sc;
    sc.noise_sigma = cfg.synth_epsilon;
    sc.n_synth = cfg.synth_count ? *cfg.synth_count : synthetic_count(inside_rows);
    sc.seed = seed_schedule(cfg.seed, run, synth_role(teacher));
    return sc;
}

namespace {

    using Clock = std::chrono::steady_clock;

    auto seconds_since(Clock::time_point start) -> double
    {
        return std::chrono::duration<double>(Clock::now() - start).count();
    }

    auto union_kinds(std::vector<ModelKind> const& a, std::vector<ModelKind> const& b) -> std::vector<ModelKind>
    {
        std::vector<ModelKind> out;
        for (auto k : kAllModelKinds) {
            if (std::find(a.begin(), a.end(), k) != a.end() || std::find(b.begin(), b.end(), k) != b.end()) {
                out.push_back(k);
            }
        }
        return out;
    }

    struct Coordinate {
        std::string dataset;
        std::optional<std::uint64_t> seed;
        std::optional<ModelKind> teacher;
        std::optional<ModelKind> student;

        [[nodiscard]] auto text() const -> std::string
        {
            return fmt::format("[dataset={} seed={} teacher={} student={}] ", dataset,
                seed ? std::to_string(*seed) : "-", teacher ? to_string(*teacher) : "-",
                student ? to_string(*student) : "-");
        }
    };

    template <typename Fn>
    auto at(Coordinate const& c, Fn&& fn) -> decltype(fn())
    {
        try {
            return fn();
        } catch (ConfigError const& e) {
            throw ConfigError(c.text() + e.what());
        } catch (DataError const& e) {
            throw DataError(c.text() + e.what());
        } catch (NumericError const& e) {
            throw NumericError(c.text() + e.what());
        } catch (std::exception const& e) {
            throw std::runtime_error(c.text() + e.what());
        }
    }

    auto safe_rmse(Predictor const& model, DataPart const& part) -> double
    {
        if (part.size() == 0) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        return rmse(part.y, model.predict(part.X));
    }

    void write_file(std::filesystem::path const& path, std::string const& text)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw DataError(fmt::format("cannot write '{}'", path.string()));
        }
        out << text;
        if (!out) {
            throw DataError(fmt::format("failed writing '{}'", path.string()));
        }
    }

    auto residual_header() -> std::string
    {
        std::ostringstream s;
        write_residuals_csv(s, {}, true, "run", "");
        return s.str();
    }

    // Everything one run contributes; merged by run index.
    struct RunOutcome {
        std::size_t run { 0 };
        std::uint64_t run_seed { 0 };
        nlohmann::ordered_json info;
        nlohmann::ordered_json fronts = nlohmann::ordered_json::object();
        nlohmann::ordered_json timings = nlohmann::ordered_json::object();
        std::vector<RunRecord> records;
        std::string gate_rows;
        std::map<std::string, std::string> fragments; // file name -> csv rows without header
        std::map<std::string, std::string> headers;
    };

    auto run_once(RawTable const& table, ExperimentConfig const& cfg, std::size_t run) -> RunOutcome
    {
        RunOutcome o;
        o.run = run;
        o.run_seed = seed_schedule(cfg.seed, run, "run");
        Coordinate coord { cfg.dataset.filename().string(), o.run_seed, std::nullopt, std::nullopt };
        auto const t0 = Clock::now();

        auto const part = at(coord, [&] { return partition(table, partition_options(cfg, run)); });
        auto const& split = part.split;
        auto const& density = part.density;
        auto const n_train = static_cast<std::size_t>(split.train.size());
        auto const inside = inside_rows(part);

        nlohmann::ordered_json seeds;
        for (auto const& role : run_seed_roles()) {
            seeds[role] = seed_schedule(cfg.seed, run, role);
        }
        o.info["run"] = run;
        o.info["run_seed"] = o.run_seed;
        o.info["seeds"] = seeds;
        o.info["split"] = split_manifest(split);
        o.info["log_threshold"] = density.log_threshold();
        o.info["inside_rows"] = inside;
        o.timings["split"] = seconds_since(t0);

        auto const needed = union_kinds(cfg.teachers, cfg.students);
        auto t = Clock::now();
        auto const base = at(coord, [&] { return train_models(split.train.X, split.train.y, needed, cfg, run); });
        o.timings["base_models"] = seconds_since(t);
        if (base.front) {
            o.fronts["base"] = base.front->to_json();
        }

        std::map<ModelKind, double> base_interp;
        std::map<ModelKind, double> base_extrap;
        std::map<ModelKind, double> base_val;
        for (auto s : cfg.students) {
            coord.student = s;
            at(coord, [&] {
                auto const& m = base.get(s);
                base_interp[s] = safe_rmse(m, split.test_interp);
                base_extrap[s] = safe_rmse(m, split.test_extrap);
                base_val[s] = safe_rmse(m, split.validation);
                auto const file = fmt::format("residuals_base_{}.csv", to_string(s));
                std::ostringstream rows;
                write_residuals_csv(rows, residual_diagnostics(m, split, density), false, "run", std::to_string(run));
                o.fragments[file] += rows.str();
                o.headers[file] = residual_header();
            });
        }
        coord.student.reset();

        std::size_t n_synth = 0;
        std::map<ModelKind, std::vector<double>> val_by_student; // aligned with cfg.teachers
        for (auto teacher : cfg.teachers) {
            coord.teacher = teacher;
            t = Clock::now();
            auto const synth = at(coord, [&] {
                return generate_synthetic(split.train.X, density, base.get(teacher), synth_config(cfg, run, teacher, inside));
            });
            n_synth = static_cast<std::size_t>(synth.size());
            {
                auto const file = fmt::format("synth_{}.csv", to_string(teacher));
                std::ostringstream rows;
                std::ostringstream head;
                write_synthetic_csv(rows, synth, split.standardizer, table.feature_names, split.train.rows, false, "run",
                    std::to_string(run));
                write_synthetic_csv(head, SyntheticSet { Matrix(0, split.train.X.cols()), Vector(0), {}, synth.teacher_id },
                    split.standardizer, table.feature_names, split.train.rows, true, "run", "");
                o.fragments[file] += rows.str();
                o.headers[file] = head.str();
            }
            auto const [Xa, ya] = augment(split.train.X, split.train.y, synth);
            auto const students = at(coord, [&] { return train_models(Xa, ya, cfg.students, cfg, run); });
            o.timings[fmt::format("aug_{}", to_string(teacher))] = seconds_since(t);
            if (students.front) {
                o.fronts[fmt::format("aug_{}", to_string(teacher))] = students.front->to_json();
            }

            for (auto s : cfg.students) {
                coord.student = s;
                at(coord, [&] {
                    auto const& m = students.get(s);
                    RunRecord r;
                    r.run_seed = o.run_seed;
                    r.run = run;
                    r.teacher = teacher;
                    r.student = s;
                    r.rmse_interp_base = base_interp[s];
                    r.rmse_extrap_base = base_extrap[s];
                    r.rmse_val_base = base_val[s];
                    r.rmse_interp_aug = safe_rmse(m, split.test_interp);
                    r.rmse_extrap_aug = safe_rmse(m, split.test_extrap);
                    r.rmse_val_aug = safe_rmse(m, split.validation);
                    r.n_train = n_train;
                    r.n_synth = n_synth;
                    r.n_interp = static_cast<std::size_t>(split.test_interp.size());
                    r.n_extrap = static_cast<std::size_t>(split.test_extrap.size());
                    r.n_validation = static_cast<std::size_t>(split.validation.size());
                    o.records.push_back(r);
                    val_by_student[s].push_back(r.rmse_val_aug);

                    auto const file = fmt::format("residuals_{}_{}.csv", to_string(teacher), to_string(s));
                    std::ostringstream rows;
                    write_residuals_csv(rows, residual_diagnostics(m, split, density), false, "run", std::to_string(run));
                    o.fragments[file] += rows.str();
                    o.headers[file] = residual_header();
                });
            }
            coord.student.reset();
        }
        o.info["n_synth"] = n_synth;

        // Gate per cell (baseline vs one teacher) and per student (baseline vs all teachers).
        auto by_student = [&](ModelKind s) {
            std::vector<RunRecord const*> out;
            for (auto const& r : o.records) {
                if (r.student == s) {
                    out.push_back(&r);
                }
            }
            return out;
        };
        std::ostringstream gate;
        auto emit = [&](std::string const& scope, ModelKind s, std::vector<RunRecord const*> const& cands) {
            std::vector<GateCandidate> c { { "base", base_val[s], true } };
            for (auto const* r : cands) {
                c.push_back({ std::string(to_string(r->teacher)), r->rmse_val_aug, false });
            }
            auto const pick = validation_gate(c);
            auto const* chosen = pick == 0 ? nullptr : cands[pick - 1];
            gate << run << ',' << scope << ',' << to_string(s) << ',' << c[pick].label << ','
                 << format_real(base_val[s]) << ',' << format_real(c[pick].validation_rmse) << ','
                 << format_real(chosen ? chosen->rmse_interp_aug : base_interp[s]) << ','
                 << format_real(chosen ? chosen->rmse_extrap_aug : base_extrap[s]) << '\n';
        };
        for (auto s : cfg.students) {
            auto const cands = by_student(s);
            for (auto const* r : cands) {
                emit(std::string(to_string(r->teacher)), s, { r });
            }
            emit("all", s, cands);
        }
        o.gate_rows = gate.str();
        o.timings["total"] = seconds_since(t0);
        return o;
    }

    auto matrix_file_text(ResultMatrix const& m, void (*writer)(std::ostream&, ResultMatrix const&)) -> std::string
    {
        std::ostringstream s;
        writer(s, m);
        return s.str();
    }

    // name -> text for every matrix artifact.
    auto matrix_artifacts(ExperimentMatrices const& m) -> std::map<std::string, std::string>
    {
        std::map<std::string, std::string> files;
        files["diff_interp.csv"] = matrix_file_text(m.interpolation, write_diff_csv);
        files["diff_extrap.csv"] = matrix_file_text(m.extrapolation, write_diff_csv);
        files["sig_interp.csv"] = matrix_file_text(m.interpolation, write_significance_csv);
        files["sig_extrap.csv"] = matrix_file_text(m.extrapolation, write_significance_csv);
        files["pvalue_interp.csv"] = matrix_file_text(m.interpolation, write_pvalue_csv);
        files["pvalue_extrap.csv"] = matrix_file_text(m.extrapolation, write_pvalue_csv);
        files["matrices.json"] = matrices_json(m).dump(2) + "\n";
        return files;
    }

    auto load_table(ExperimentConfig const& cfg) -> RawTable
    {
        Coordinate coord { cfg.dataset.filename().string(), std::nullopt, std::nullopt, std::nullopt };
        return at(coord, [&] { return load_csv(cfg.dataset, cfg.target, cfg.delimiter); });
    }

    void ensure_dir(std::filesystem::path const& dir)
    {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) {
            throw DataError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
        }
    }

} // namespace

auto run_experiment(ExperimentConfig const& cfg) -> RunManifest
{
    cfg.validate();
    auto const start = Clock::now();
    auto const table = load_table(cfg);
    ensure_dir(cfg.out);

    std::vector<std::optional<RunOutcome>> outcomes(cfg.runs);
    std::vector<std::exception_ptr> errors(cfg.runs);
    std::atomic<bool> failed { false };
    parallel_for(cfg.runs, cfg.jobs, [&](std::size_t run) {
        if (failed.load()) {
            return;
        }
        try {
            outcomes[run] = run_once(table, cfg, run);
        } catch (...) {
            errors[run] = std::current_exception();
            failed.store(true);
        }
    });

    std::exception_ptr first_error;
    std::string error_text;
    for (auto const& e : errors) {
        if (e) {
            first_error = e;
            try {
                std::rethrow_exception(e);
            } catch (std::exception const& ex) {
                error_text = ex.what();
            }
            break;
        }
    }

    RunManifest result;
    result.directory = cfg.out;
    std::map<std::string, std::string> files;
    std::map<std::string, std::string> headers;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    nlohmann::ordered_json fronts = nlohmann::ordered_json::array();
    nlohmann::ordered_json run_timings = nlohmann::ordered_json::array();
    std::string gate = "run,scope,student,choice,val_rmse_base,val_rmse_chosen,rmse_interp_chosen,rmse_extrap_chosen\n";
    for (auto const& o : outcomes) {
        if (!o) {
            continue;
        }
        runs.push_back(o->info);
        fronts.push_back({ { "run", o->run }, { "fronts", o->fronts } });
        run_timings.push_back({ { "run", o->run }, { "seconds", o->timings } });
        result.records.insert(result.records.end(), o->records.begin(), o->records.end());
        gate += o->gate_rows;
        for (auto const& [name, text] : o->fragments) {
            files[name] += text;
            headers[name] = o->headers.at(name);
        }
    }
    for (auto& [name, text] : files) {
        text = headers[name] + text;
    }

    std::ostringstream records;
    write_records_csv(records, result.records);
    files["records.csv"] = records.str();
    files["gate.csv"] = gate;
    files["fronts.json"] = fronts.dump(2) + "\n";
    if (!result.records.empty()) {
        result.matrices = build_matrices(result.records);
        files.merge(matrix_artifacts(result.matrices));
    }

    for (auto const& [name, _] : files) {
        result.artifacts.push_back(name);
    }
    result.artifacts.push_back("manifest.json");
    std::sort(result.artifacts.begin(), result.artifacts.end());

    auto& m = result.manifest;
    m["software"] = { { "name", "srkd" }, { "version", std::string(kVersion) } };
    m["config"] = cfg.to_json();
    m["dataset"] = { { "rows", table.rows.rows() }, { "features", table.feature_names }, { "target", table.target_name } };
    m["status"] = first_error ? "failed" : "complete";
    if (first_error) {
        m["error"] = error_text;
    }
    m["runs"] = runs;
    m["artifacts"] = result.artifacts;
    files["manifest.json"] = m.dump(2) + "\n";

    result.timings["runs"] = run_timings;
    result.timings["total_seconds"] = seconds_since(start);

    for (auto const& [name, text] : files) {
        write_file(cfg.out / name, text);
    }
    write_file(cfg.out / "timings.json", result.timings.dump(2) + "\n");

    if (first_error) {
        std::rethrow_exception(first_error);
    }
    return result;
}

auto report(std::filesystem::path const& records_csv, std::filesystem::path const& out_dir) -> ExperimentMatrices
{
    std::ifstream in(records_csv);
    if (!in) {
        throw DataError(fmt::format("cannot open '{}'", records_csv.string()));
    }
    auto const records = read_records_csv(in);
    if (records.empty()) {
        throw DataError(fmt::format("'{}' holds no records", records_csv.string()));
    }
    auto matrices = build_matrices(records);
    ensure_dir(out_dir);
    for (auto const& [name, text] : matrix_artifacts(matrices)) {
        write_file(out_dir / name, text);
    }
    return matrices;
}

void write_split_artifacts(ExperimentConfig const& cfg, std::filesystem::path const& out_dir)
{
    auto const table = load_table(cfg);
    Coordinate coord { cfg.dataset.filename().string(), seed_schedule(cfg.seed, 0, "run"), std::nullopt, std::nullopt };
    auto const part = at(coord, [&] { return partition(table, partition_options(cfg, 0)); });
    ensure_dir(out_dir);

    auto j = split_manifest(part.split);
    j["log_threshold"] = part.density.log_threshold();
    j["bandwidth"] = part.density.bandwidth();
    j["percentile"] = part.density.percentile();
    write_file(out_dir / "split.json", j.dump(2) + "\n");

    std::ostringstream scores;
    write_density_scores(scores, part.density, part.split.standardizer.transform(table.rows));
    write_file(out_dir / "density_scores.csv", scores.str());
}

void write_synth_artifacts(ExperimentConfig const& cfg, std::filesystem::path const& out_dir)
{
    auto const table = load_table(cfg);
    Coordinate coord { cfg.dataset.filename().string(), seed_schedule(cfg.seed, 0, "run"), std::nullopt, std::nullopt };
    auto const part = at(coord, [&] { return partition(table, partition_options(cfg, 0)); });
    auto const& split = part.split;
    auto const teachers = at(coord, [&] { return train_models(split.train.X, split.train.y, cfg.teachers, cfg, 0); });
    ensure_dir(out_dir);
    for (auto teacher : cfg.teachers) {
        coord.teacher = teacher;
        auto const synth = at(coord, [&] {
            return generate_synthetic(split.train.X, part.density, teachers.get(teacher),
                synth_config(cfg, 0, teacher, inside_rows(part)));
        });
        std::ostringstream s;
        write_synthetic_csv(s, synth, split.standardizer, table.feature_names, split.train.rows);
        write_file(out_dir / fmt::format("synth_{}.csv", to_string(teacher)), s.str());
    }
}

auto RecoveryReport::recovered() const -> std::size_t
{
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](auto const& r) { return r.recovered; }));
}

auto formula_recovery(GpConfig const& gp, std::size_t runs, std::uint64_t master_seed, double threshold) -> RecoveryReport
{
    RecoveryReport report;
    report.threshold = threshold;
    for (std::size_t run = 0; run < runs; ++run) {
        Rng rng(seed_schedule(master_seed, run, "recover:data"));
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        Matrix X(200, 2);
        for (Index i = 0; i < X.rows(); ++i) {
            X(i, 0) = u(rng);
            X(i, 1) = u(rng);
        }
        Vector const y = X.col(0).array().sin() + X.col(1).array();

        auto cfg = gp;
        cfg.seed = seed_schedule(master_seed, run, "recover:gp");
        auto const start = Clock::now();
        auto const front = evolve(X, y, cfg);
        auto const& best = front[select_gpe_index(front)];
        RecoveryRun r;
        r.seed = cfg.seed;
        r.seconds = seconds_since(start);
        r.rmse = std::sqrt(best.loss);
        r.expression = best.expression.to_string();
        r.recovered = r.rmse < threshold;
        report.runs.push_back(r);
    }
    return report;
}

} // namespace srkd
