#include "cssa/errors.hpp"
#include "cssa/scenario.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSolverError = 2;

struct RunOptions {
    std::string config;
    std::optional<std::size_t> p;
    std::optional<double> fov;
    std::optional<double> m_crit;
    std::optional<double> time_limit;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
};

int run(const RunOptions& o) {
    cssa::ScenarioConfig c = cssa::load_config(o.config);
    if (o.p) c.p = *o.p;
    if (o.fov) c.observer.sensor.fov_deg = *o.fov;
    if (o.m_crit) c.observer.sensor.m_crit = *o.m_crit;
    if (o.time_limit) c.solver.lm.time_limit_s = *o.time_limit;
    if (o.threads) c.threads = *o.threads;
    if (o.seed) c.seed = *o.seed;
    if (o.output) c.output = *o.output;
    c.validate();

    const cssa::RunResult r = cssa::run_scenario(c);
    fmt::print("{}: m={} n={} steps={} q={} density={:.4f}\n", c.name, r.dims.m, r.dims.n, r.dims.steps, r.dims.q,
               r.density);
    if (!r.artifact.empty()) {
        fmt::print("wrote {}\n", r.artifact);
    } else {
        fmt::print("Z = {:.6f}  Theta = {:.4f}", r.objective, r.coverage);
        if (r.upper_bound) fmt::print("  Z_LR* = {:.6f}  stop = {}", *r.upper_bound, r.stop_reason);
        fmt::print("\n");
        for (const auto& s : r.slots) fmt::print("  slot {:5d}  {:<16s} phase {:.4f}\n", s.slot, s.orbit, s.phase);
    }
    fmt::print("result {} ({:.1f} s)\n", c.output.string(), r.timings.at("total"));
    return kOk;
}

int catalog(double dt_b, bool refine, unsigned threads) {
    const auto sys = cssa::Cr3bpSystem::earth_moon();
    auto records = cssa::build_catalog(dt_b, sys);
    if (refine) records = cssa::refine_catalog(records, sys, threads);
    std::size_t total = 0;
    fmt::print("{:<18s} {:>6s} {:>14s} {:>14s} {:>14s} {:>12s} {:>12s}\n", "orbit", "slots", "x0", "z0", "ydot0",
               "period", "stability");
    for (const auto& r : records) {
        fmt::print("{:<18s} {:>6d} {:>14.8f} {:>14.8f} {:>14.8f} {:>12.8f} {:>12.2f}\n", r.label(), r.slots, r.x0, r.z0,
                   r.ydot0, r.period, r.stability);
        total += r.slots;
    }
    fmt::print("total slots {}\n", total);
    return kOk;
}

int presets(const std::string& dir) {
    for (const auto& c : cssa::all_presets()) {
        if (dir.empty()) {
            fmt::print("{}\n", c.name);
            continue;
        }
        std::filesystem::create_directories(dir);
        const auto path = std::filesystem::path(dir) / (c.name + ".json");
        std::ofstream out(path);
        if (!out) throw cssa::IoError("cannot write " + path.string());
        out << cssa::config_to_json(c) << "\n";
        fmt::print("{}\n", path.string());
    }
    return kOk;
}

int check(const std::string& result_path, const std::string& config_path) {
    const cssa::RunResult r = cssa::load_result(result_path);
    auto issues = cssa::check_result(r);
    if (!config_path.empty() && issues.empty() && r.artifact.empty()) {
        const auto data = cssa::build_scenario(cssa::load_config(config_path));
        for (const auto& v : cssa::revalidate(r, data.instance)) issues.push_back(v.message);
    }
    for (const auto& i : issues) fmt::print(stderr, "invalid: {}\n", i);
    if (!issues.empty()) return kSolverError;
    fmt::print("{} is consistent\n", result_path);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cislunar observer constellation design"};
    app.require_subcommand(1);

    RunOptions ro;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario file");
    run_cmd->add_option("config", ro.config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--p", ro.p, "Number of observers");
    run_cmd->add_option("--fov", ro.fov, "Full field of view, degrees");
    run_cmd->add_option("--m-crit", ro.m_crit, "Limiting magnitude");
    run_cmd->add_option("--time-limit", ro.time_limit, "Solver wall-clock limit, seconds");
    run_cmd->add_option("--threads", ro.threads, "Worker threads (default: CSSA_THREADS or 1)");
    run_cmd->add_option("--seed", ro.seed, "Seed for synthesized demand");
    run_cmd->add_option("--output", ro.output, "Result file");

    double dt_b = 12.0;
    bool refine = false;
    unsigned cat_threads = 1;
    auto* cat_cmd = app.add_subcommand("catalog", "Print the orbit catalog");
    cat_cmd->add_option("--dt-b", dt_b, "Slot spacing, hours");
    cat_cmd->add_flag("--refine", refine, "Apply differential correction");
    cat_cmd->add_option("--threads", cat_threads, "Worker threads");

    std::string result_path, plot_dir;
    auto* plot_cmd = app.add_subcommand("plot-data", "Write CSV tables from a result file");
    plot_cmd->add_option("result", result_path, "Result JSON")->required()->check(CLI::ExistingFile);
    plot_cmd->add_option("dir", plot_dir, "Output directory")->required();

    std::string preset_dir;
    auto* preset_cmd = app.add_subcommand("presets", "List the preset grid or write it as scenario files");
    preset_cmd->add_option("--write", preset_dir, "Directory to write presets into");

    std::string check_result_path, check_config;
    auto* check_cmd = app.add_subcommand("check", "Re-validate a result file");
    check_cmd->add_option("result", check_result_path, "Result JSON")->required()->check(CLI::ExistingFile);
    check_cmd->add_option("--config", check_config, "Scenario to rebuild the instance from");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*run_cmd) return run(ro);
        if (*cat_cmd) return catalog(dt_b, refine, cat_threads);
        if (*plot_cmd) {
            for (const auto& p : cssa::export_plot_data(cssa::load_result(result_path), plot_dir))
                fmt::print("{}\n", p.string());
            return kOk;
        }
        if (*preset_cmd) return presets(preset_dir);
        if (*check_cmd) return check(check_result_path, check_config);
    } catch (const cssa::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfigError;
    } catch (const cssa::ParseError& e) {
        fmt::print(stderr, "parse error: {}\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kSolverError;
    }
    return kOk;
}
