#include "cssa/scenario.hpp"

#include "cssa/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace cssa {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr std::array<std::pair<DemandKind, std::string_view>, 4> kDemandNames{{
    {DemandKind::Soi, "soi"},
    {DemandKind::Cone, "cone"},
    {DemandKind::Let, "let"},
    {DemandKind::File, "file"},
}};

constexpr std::array<std::pair<SolverMode, std::string_view>, 3> kModeNames{{
    {SolverMode::Lagrangean, "lm"},
    {SolverMode::MpsExport, "mps_export"},
    {SolverMode::ImportSolution, "import_solution"},
}};

// Typed access to one JSON object; every key must be consumed.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(where() + " must be an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    Section sub(const std::string& key) {
        used_.insert(key);
        return Section(node_.at(key), path_.empty() ? key : path_ + "." + key);
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (!has(key)) return;
        used_.insert(key);
        out = convert<T>(node_.at(key), key);
    }

    // null means unlimited
    void read_limit(const std::string& key, double& out) {
        if (!has(key)) return;
        used_.insert(key);
        const json& v = node_.at(key);
        out = v.is_null() ? std::numeric_limits<double>::infinity() : convert<double>(v, key);
    }

    void finish() const {
        for (const auto& [key, value] : node_.items())
            if (!used_.contains(key)) throw ConfigError(fmt::format("unknown key '{}' in {}", key, where()));
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> used_;

    std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    template <typename T>
    T convert(const json& v, const std::string& key) const {
        const std::string n = name(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(n + " must be a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
            if (!v.is_number()) throw ConfigError(n + " must be a number");
            return v.get<double>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer() || (v.is_number_integer() && v.get<long long>() < 0))
                throw ConfigError(n + " must be a non-negative integer");
            return static_cast<T>(v.get<unsigned long long>());
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(n + " must be a string");
            return v.get<std::string>();
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
            if (!v.is_array()) throw ConfigError(n + " must be an array of strings");
            std::vector<std::string> out;
            for (const auto& e : v) {
                if (!e.is_string()) throw ConfigError(n + " must be an array of strings");
                out.push_back(e.get<std::string>());
            }
            return out;
        } else if constexpr (std::is_same_v<T, Vec3>) {
            if (!v.is_array() || v.size() != 3 || !std::all_of(v.begin(), v.end(), [](auto& e) { return e.is_number(); }))
                throw ConfigError(n + " must be an array of three numbers");
            return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
        } else if constexpr (std::is_same_v<T, GridCounts>) {
            if (!v.is_array() || v.size() != 3 ||
                !std::all_of(v.begin(), v.end(), [](auto& e) { return e.is_number_unsigned(); }))
                throw ConfigError(n + " must be an array of three non-negative integers");
            return GridCounts{v[0].get<std::size_t>(), v[1].get<std::size_t>(), v[2].get<std::size_t>()};
        } else {
            static_assert(sizeof(T) == 0, "unsupported config type");
        }
    }
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    if (p.empty()) return {};
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

ojson to_json(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }
ojson to_json(const GridCounts& c) { return ojson::array({c.nx, c.ny, c.nz}); }

ojson lm_to_json(const LmConfig& lm) {
    ojson o;
    o["max_iterations"] = lm.max_iterations;
    o["gap_tolerance"] = lm.gap_tolerance;
    o["max_stagnant"] = lm.max_stagnant;
    o["stagnant_to_reduce_step"] = lm.stagnant_to_reduce_step;
    o["stagnant_to_inter_swap"] = lm.stagnant_to_inter_swap;
    o["c_alpha"] = lm.c_alpha;
    o["initial_step_scale"] = lm.initial_step_scale;
    o["step_reduction"] = lm.step_reduction;
    o["strategy"] = strategy_name(lm.strategy);
    o["permutation_cap"] = lm.permutation_cap;
    o["time_limit_s"] = std::isfinite(lm.time_limit_s) ? ojson(lm.time_limit_s) : ojson(nullptr);
    o["memoize"] = lm.memoize;
    return o;
}

void read_lm(Section s, LmConfig& lm) {
    s.read("max_iterations", lm.max_iterations);
    s.read("gap_tolerance", lm.gap_tolerance);
    s.read("max_stagnant", lm.max_stagnant);
    s.read("stagnant_to_reduce_step", lm.stagnant_to_reduce_step);
    s.read("stagnant_to_inter_swap", lm.stagnant_to_inter_swap);
    s.read("c_alpha", lm.c_alpha);
    s.read("initial_step_scale", lm.initial_step_scale);
    s.read("step_reduction", lm.step_reduction);
    std::string strategy(strategy_name(lm.strategy));
    s.read("strategy", strategy);
    lm.strategy = parse_strategy(strategy);
    s.read("permutation_cap", lm.permutation_cap);
    s.read_limit("time_limit_s", lm.time_limit_s);
    s.read("memoize", lm.memoize);
    s.finish();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format_number(double v) {
    // Shortest representation that round-trips.
    return fmt::format("{}", v);
}

}  // namespace

std::string_view demand_kind_name(DemandKind kind) {
    for (const auto& [k, n] : kDemandNames)
        if (k == kind) return n;
    return "?";
}

DemandKind parse_demand_kind(std::string_view name) {
    for (const auto& [k, n] : kDemandNames)
        if (n == name) return k;
    throw ConfigError(fmt::format("unknown demand kind '{}' (soi, cone, let, file)", name));
}

std::string_view solver_mode_name(SolverMode mode) {
    for (const auto& [m, n] : kModeNames)
        if (m == mode) return n;
    return "?";
}

SolverMode parse_solver_mode(std::string_view name) {
    for (const auto& [m, n] : kModeNames)
        if (n == name) return m;
    throw ConfigError(fmt::format("unknown solver mode '{}' (lm, mps_export, import_solution)", name));
}

void ScenarioConfig::validate() const {
    if (p < 1) throw ConfigError("p must be at least 1");
    if (grid.steps_per_month < 1 || grid.months < 1) throw ConfigError("time grid needs at least one step");
    if (!(catalog.dt_b_hours > 0.0)) throw ConfigError("dt_b_hours must be positive");
    for (const auto& f : catalog.families) parse_family(f);
    for (const auto& r : catalog.resonances) parse_resonance(r);
    if (!catalog.table.empty() && !std::filesystem::exists(catalog.table))
        throw ConfigError("catalog table not found: " + catalog.table.string());
    observer.sensor.validate();
    observer.optics.validate();
    switch (demand.kind) {
    case DemandKind::File:
        if (demand.path.empty()) throw ConfigError("demand kind 'file' needs a path");
        if (!std::filesystem::exists(demand.path)) throw ConfigError("demand file not found: " + demand.path.string());
        break;
    case DemandKind::Let:
        if (!(demand.let_density > 0.0 && demand.let_density <= 1.0))
            throw ConfigError("LET monthly density must lie in (0, 1]");
        [[fallthrough]];
    default:
        if (!demand.path.empty()) throw ConfigError("a demand path is only allowed with kind 'file'");
    }
    solver.lm.validate();
    switch (solver.mode) {
    case SolverMode::Lagrangean: break;
    case SolverMode::MpsExport:
        if (solver.mps_path.empty()) throw ConfigError("mps_export mode needs an MPS path");
        break;
    case SolverMode::ImportSolution:
        if (solver.solution_path.empty()) throw ConfigError("import_solution mode needs a solution path");
        if (!std::filesystem::exists(solver.solution_path))
            throw ConfigError("solution file not found: " + solver.solution_path.string());
        break;
    }
    if (threads && *threads < 1) throw ConfigError("threads must be at least 1");
    if (output.empty()) throw ConfigError("output path is empty");
}

unsigned ScenarioConfig::effective_threads() const {
    if (threads) return *threads;
    if (const char* env = std::getenv("CSSA_THREADS"); env && *env) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (*end != '\0' || v < 1 || v > 4096) throw ConfigError(fmt::format("CSSA_THREADS='{}' is not a thread count", env));
        return static_cast<unsigned>(v);
    }
    return 1;
}

ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    ScenarioConfig c;
    Section top(root, "");
    top.read("name", c.name);
    top.read("p", c.p);
    top.read("seed", c.seed);
    if (top.has("threads")) {
        unsigned t = 0;
        top.read("threads", t);
        c.threads = t;
    }
    std::string output = c.output.string();
    top.read("output", output);
    c.output = resolve(base, output);

    if (top.has("demand")) {
        Section d = top.sub("demand");
        std::string kind(demand_kind_name(c.demand.kind));
        d.read("kind", kind);
        c.demand.kind = parse_demand_kind(kind);
        if (d.has("soi")) {
            Section s = d.sub("soi");
            s.read("width_km", c.demand.soi.width_km);
            s.read("counts", c.demand.soi.counts);
            s.finish();
        }
        if (d.has("cone")) {
            Section s = d.sub("cone");
            s.read("inner_radius_km", c.demand.cone.inner_radius_km);
            s.read("half_angle_deg", c.demand.cone.half_angle_deg);
            s.read("n_axial", c.demand.cone.n_axial);
            s.read("n_radial", c.demand.cone.n_radial);
            s.read("n_azimuth", c.demand.cone.n_azimuth);
            s.finish();
        }
        if (d.has("let")) {
            Section s = d.sub("let");
            s.read("spans_km", c.demand.let.spans_km);
            s.read("counts", c.demand.let.counts);
            s.read("density", c.demand.let_density);
            s.finish();
        }
        std::string path;
        d.read("path", path);
        c.demand.path = resolve(base, path);
        d.finish();
    }
    if (top.has("observer")) {
        Section o = top.sub("observer");
        o.read("fov_deg", c.observer.sensor.fov_deg);
        o.read("m_crit", c.observer.sensor.m_crit);
        o.read("moon_radius_km", c.observer.sensor.moon_radius_km);
        o.read("diameter_km", c.observer.optics.diameter_km);
        o.read("spec_reflectance", c.observer.optics.spec_reflectance);
        o.read("diff_reflectance", c.observer.optics.diff_reflectance);
        o.read("m_sun", c.observer.optics.m_sun);
        o.read("sun_theta0_deg", c.observer.sun_theta0_deg);
        o.finish();
    }
    if (top.has("catalog")) {
        Section k = top.sub("catalog");
        k.read("dt_b_hours", c.catalog.dt_b_hours);
        k.read("refine", c.catalog.refine);
        k.read("families", c.catalog.families);
        k.read("resonances", c.catalog.resonances);
        std::string table;
        k.read("table", table);
        c.catalog.table = resolve(base, table);
        k.finish();
    }
    if (top.has("time_grid")) {
        Section g = top.sub("time_grid");
        g.read("steps_per_month", c.grid.steps_per_month);
        g.read("months", c.grid.months);
        g.finish();
    }
    if (top.has("solver")) {
        Section s = top.sub("solver");
        std::string mode(solver_mode_name(c.solver.mode));
        s.read("mode", mode);
        c.solver.mode = parse_solver_mode(mode);
        const bool lm = s.has("lm"), mps = s.has("mps"), sol = s.has("solution");
        if ((lm && c.solver.mode != SolverMode::Lagrangean) || (mps && c.solver.mode != SolverMode::MpsExport) ||
            (sol && c.solver.mode != SolverMode::ImportSolution))
            throw ConfigError(fmt::format("solver blocks do not match mode '{}'", mode));
        if (lm) read_lm(s.sub("lm"), c.solver.lm);
        if (mps) {
            Section m = s.sub("mps");
            std::string variant(variant_name(c.solver.variant)), path;
            m.read("variant", variant);
            try {
                c.solver.variant = parse_variant(variant);
            } catch (const Error& e) {
                throw ConfigError(e.what());
            }
            m.read("path", path);
            c.solver.mps_path = resolve(base, path);
            m.finish();
        }
        if (sol) {
            std::string path;
            s.read("solution", path);
            c.solver.solution_path = resolve(base, path);
        }
        s.finish();
    }
    top.finish();
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.parent_path());
}

std::string config_to_json(const ScenarioConfig& c, int indent) {
    ojson o;
    o["name"] = c.name;
    o["p"] = c.p;
    o["seed"] = c.seed;
    if (c.threads) o["threads"] = *c.threads;
    o["output"] = c.output.string();

    ojson d;
    d["kind"] = demand_kind_name(c.demand.kind);
    switch (c.demand.kind) {
    case DemandKind::Soi:
        d["soi"] = {{"width_km", c.demand.soi.width_km}, {"counts", to_json(c.demand.soi.counts)}};
        break;
    case DemandKind::Cone:
        d["cone"] = {{"inner_radius_km", c.demand.cone.inner_radius_km},
                     {"half_angle_deg", c.demand.cone.half_angle_deg},
                     {"n_axial", c.demand.cone.n_axial},
                     {"n_radial", c.demand.cone.n_radial},
                     {"n_azimuth", c.demand.cone.n_azimuth}};
        break;
    case DemandKind::Let:
        d["let"] = {{"spans_km", to_json(c.demand.let.spans_km)},
                    {"counts", to_json(c.demand.let.counts)},
                    {"density", c.demand.let_density}};
        break;
    case DemandKind::File: d["path"] = c.demand.path.string(); break;
    }
    o["demand"] = d;

    o["observer"] = {{"fov_deg", c.observer.sensor.fov_deg},
                     {"m_crit", c.observer.sensor.m_crit},
                     {"moon_radius_km", c.observer.sensor.moon_radius_km},
                     {"diameter_km", c.observer.optics.diameter_km},
                     {"spec_reflectance", c.observer.optics.spec_reflectance},
                     {"diff_reflectance", c.observer.optics.diff_reflectance},
                     {"m_sun", c.observer.optics.m_sun},
                     {"sun_theta0_deg", c.observer.sun_theta0_deg}};

    ojson k;
    k["dt_b_hours"] = c.catalog.dt_b_hours;
    k["refine"] = c.catalog.refine;
    k["families"] = c.catalog.families;
    k["resonances"] = c.catalog.resonances;
    if (!c.catalog.table.empty()) k["table"] = c.catalog.table.string();
    o["catalog"] = k;

    o["time_grid"] = {{"steps_per_month", c.grid.steps_per_month}, {"months", c.grid.months}};

    ojson s;
    s["mode"] = solver_mode_name(c.solver.mode);
    switch (c.solver.mode) {
    case SolverMode::Lagrangean: s["lm"] = lm_to_json(c.solver.lm); break;
    case SolverMode::MpsExport:
        s["mps"] = {{"variant", variant_name(c.solver.variant)}, {"path", c.solver.mps_path.string()}};
        break;
    case SolverMode::ImportSolution: s["solution"] = c.solver.solution_path.string(); break;
    }
    o["solver"] = s;
    return o.dump(indent);
}

std::string preset_name(DemandKind demand, double fov_deg, double m_crit) {
    return fmt::format("{}_fov{}_m{}", demand_kind_name(demand), format_number(fov_deg), format_number(m_crit));
}

ScenarioConfig preset_config(DemandKind demand, double fov_deg, double m_crit) {
    if (demand == DemandKind::File) throw ConfigError("no preset for file demand");
    ScenarioConfig c;
    c.name = preset_name(demand, fov_deg, m_crit);
    c.demand.kind = demand;
    c.observer.sensor.fov_deg = fov_deg;
    c.observer.sensor.m_crit = m_crit;
    c.solver.lm.time_limit_s = 1000.0;
    c.output = c.name + ".result.json";
    return c;
}

std::vector<ScenarioConfig> all_presets() {
    std::vector<ScenarioConfig> out;
    for (DemandKind d : {DemandKind::Soi, DemandKind::Cone, DemandKind::Let})
        for (double fov : {60.0, 120.0})
            for (double m : {15.0, 18.0, 20.0}) out.push_back(preset_config(d, fov, m));
    return out;
}

ScenarioData build_scenario(const ScenarioConfig& config) {
    config.validate();
    const Cr3bpSystem sys = Cr3bpSystem::earth_moon();
    const unsigned threads = config.effective_threads();
    ScenarioData data;

    std::vector<LpoRecord> records = config.catalog.table.empty()
                                         ? build_catalog(config.catalog.dt_b_hours, sys)
                                         : load_catalog_table(config.catalog.table, config.catalog.dt_b_hours, sys);
    std::set<Family> families;
    for (const auto& f : config.catalog.families) families.insert(parse_family(f));
    std::vector<Resonance> resonances;
    for (const auto& r : config.catalog.resonances) resonances.push_back(parse_resonance(r));
    for (const auto& r : records) {
        if (!families.empty() && !families.contains(r.family)) continue;
        if (!resonances.empty() && std::find(resonances.begin(), resonances.end(), r.resonance) == resonances.end())
            continue;
        data.catalog.push_back(r);
    }
    if (data.catalog.empty()) throw ConfigError("catalog filter leaves no orbits");
    if (config.catalog.refine) data.catalog = refine_catalog(data.catalog, sys, threads);

    data.grid = TimeGrid::synodic(sys, config.grid.steps_per_month, config.grid.months);
    data.ephemeris = slot_ephemeris(data.catalog, data.grid, sys, {kDefaultTolerance, threads});

    switch (config.demand.kind) {
    case DemandKind::Soi: data.demand = soi_grid(sys, data.grid.steps, config.demand.soi); break;
    case DemandKind::Cone: data.demand = cone_of_shame(sys, data.grid.steps, config.demand.cone); break;
    case DemandKind::Let: {
        const auto targets = let_window(sys, config.demand.let);
        const std::size_t period = config.grid.steps_per_month;
        const MonthlyPattern pattern =
            config.demand.let_density >= 1.0
                ? MonthlyPattern::all_ones(period, targets.size())
                : MonthlyPattern::random(period, targets.size(), config.demand.let_density, config.seed);
        data.demand = synthesize_let_demand(targets, data.grid.steps, pattern);
        break;
    }
    case DemandKind::File:
        data.demand = load_demand(config.demand.path, sys);
        if (data.demand.steps() != data.grid.steps)
            throw ConfigError(fmt::format("demand file has {} steps, time grid has {}", data.demand.steps(),
                                          data.grid.steps));
        break;
    }

    SunModel sun = SunModel::standard(sys, config.observer.sun_theta0_deg * std::numbers::pi / 180.0);
    const ObservationModel model{pointing_directions(), config.observer.sensor, config.observer.optics, sun, sys};

    Instance& inst = data.instance;
    inst.tensor = build_visibility_tensor(data.ephemeris, data.demand, model, data.grid, threads);
    inst.costs = facility_costs(data.catalog, data.ephemeris);
    inst.p = config.p;
    inst.demand = data.demand.demand;
    inst.slots = slot_metadata(data.catalog, data.ephemeris);
    inst.reference_target = mean_target_position(data.demand);
    inst.reference_sun = sun_position(0.0, sun);
    if (config.p > inst.dims().n)
        throw ConfigError(fmt::format("p = {} exceeds the {} available slots", config.p, inst.dims().n));
    inst.validate();
    return data;
}

namespace {

RunResult describe(const Solution& solution, const ScenarioData& data, const ScenarioConfig& config) {
    const Instance& inst = data.instance;
    const TensorDims& d = inst.dims();
    RunResult r;
    r.config_json = config_to_json(config);
    r.mode = solver_mode_name(config.solver.mode);
    r.dims = d;
    r.nnz = inst.tensor.nnz();
    r.density = inst.tensor.density();
    r.p = inst.p;
    std::vector<std::size_t> per_orbit(data.catalog.size(), 0);
    for (std::size_t j : solution.slots) {
        const SlotInfo& s = inst.slots[j];
        r.slots.push_back({j, s.orbit_label, s.index, s.phase(), inst.costs[j]});
        ++per_orbit[s.orbit];
    }
    for (std::size_t o = 0; o < data.catalog.size(); ++o)
        if (per_orbit[o] > 0) r.usage.emplace_back(data.catalog[o].label(), per_orbit[o]);
    r.schedule = solution.allocations;
    for (std::size_t t = 0; t < d.steps; ++t) {
        StepCoverage c{0, 0, {}};
        for (std::size_t k = 0; k < d.q; ++k) {
            c.demanded += inst.demand(t, k);
            if (solution.theta(t, k)) c.targets.push_back(k);
        }
        c.covered = c.targets.size();
        r.coverage_by_step.push_back(std::move(c));
    }
    r.coverage = solution.coverage;
    r.objective = solution.objective;
    return r;
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioData data = build_scenario(config);
    const double build_s = seconds_since(start);
    const Instance& inst = data.instance;

    RunResult result;
    const auto solve_start = std::chrono::steady_clock::now();
    switch (config.solver.mode) {
    case SolverMode::Lagrangean: {
        LmConfig lm = config.solver.lm;
        lm.threads = config.effective_threads();
        const LmResult lr = run_lagrangean(inst, lm);
        result = describe(lr.best, data, config);
        result.upper_bound = lr.best_upper;
        result.stop_reason = stop_reason_name(lr.reason);
        result.history = lr.history;
        break;
    }
    case SolverMode::MpsExport:
        export_mps(inst, config.solver.variant, config.solver.mps_path);
        result.config_json = config_to_json(config);
        result.mode = solver_mode_name(config.solver.mode);
        result.dims = inst.dims();
        result.nnz = inst.tensor.nnz();
        result.density = inst.tensor.density();
        result.p = inst.p;
        result.artifact = config.solver.mps_path.string();
        break;
    case SolverMode::ImportSolution:
        result = describe(import_solution(config.solver.solution_path, inst), data, config);
        break;
    }
    result.timings["build"] = build_s;
    result.timings["solve"] = seconds_since(solve_start);
    result.timings["total"] = seconds_since(start);
    save_result(result, config.output);
    return result;
}

std::string result_to_json(const RunResult& r) {
    ojson o;
    o["config"] = ojson::parse(r.config_json.empty() ? "{}" : r.config_json);
    o["mode"] = r.mode;
    o["dimensions"] = {{"directions", r.dims.m}, {"slots", r.dims.n}, {"steps", r.dims.steps}, {"targets", r.dims.q}};
    o["tensor"] = {{"nnz", r.nnz}, {"density", r.density}};
    o["p"] = r.p;
    if (!r.artifact.empty()) o["artifact"] = r.artifact;
    o["objective"] = r.objective;
    o["coverage"] = r.coverage;
    o["upper_bound"] = r.upper_bound ? ojson(*r.upper_bound) : ojson(nullptr);
    o["stop_reason"] = r.stop_reason;
    ojson slots = ojson::array();
    for (const auto& s : r.slots)
        slots.push_back({{"slot", s.slot}, {"orbit", s.orbit}, {"index", s.orbit_index}, {"phase", s.phase},
                         {"cost", s.cost}});
    o["slots"] = slots;
    ojson usage = ojson::array();
    for (const auto& [label, count] : r.usage) usage.push_back({{"orbit", label}, {"count", count}});
    o["usage"] = usage;
    ojson schedule = ojson::array();
    for (const auto& a : r.schedule) schedule.push_back(ojson::array({a.slot, a.t, a.direction}));
    o["schedule"] = schedule;
    ojson steps = ojson::array();
    for (const auto& c : r.coverage_by_step)
        steps.push_back({{"covered", c.covered}, {"demanded", c.demanded}, {"targets", c.targets}});
    o["theta"] = steps;
    ojson history = ojson::array();
    for (const auto& h : r.history)
        history.push_back({{"iteration", h.iteration},
                           {"z_relaxed", h.z_relaxed},
                           {"z_heuristic", h.z_heuristic},
                           {"best_upper", h.best_upper},
                           {"best_lower", h.best_lower},
                           {"step_scale", h.step_scale}});
    o["history"] = history;
    return o.dump(1) + "\n";
}

void save_result(const RunResult& result, const std::filesystem::path& path) {
    {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write result " + path.string());
        out << result_to_json(result);
        if (!out) throw IoError("write failed for " + path.string());
    }
    ojson timings(result.timings);
    std::ofstream out(path.string() + ".timings.json");
    if (!out) throw IoError("cannot write timings for " + path.string());
    out << timings.dump(1) << "\n";
}

RunResult load_result(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open result " + path.string());
    RunResult r;
    try {
        const ojson o = ojson::parse(in);
        r.config_json = o.at("config").dump(2);
        r.mode = o.at("mode").get<std::string>();
        const auto& dim = o.at("dimensions");
        r.dims = {dim.at("directions").get<std::size_t>(), dim.at("slots").get<std::size_t>(),
                  dim.at("steps").get<std::size_t>(), dim.at("targets").get<std::size_t>()};
        r.nnz = o.at("tensor").at("nnz").get<std::size_t>();
        r.density = o.at("tensor").at("density").get<double>();
        r.p = o.at("p").get<std::size_t>();
        if (o.contains("artifact")) r.artifact = o.at("artifact").get<std::string>();
        r.objective = o.at("objective").get<double>();
        r.coverage = o.at("coverage").get<double>();
        if (!o.at("upper_bound").is_null()) r.upper_bound = o.at("upper_bound").get<double>();
        r.stop_reason = o.at("stop_reason").get<std::string>();
        for (const auto& s : o.at("slots"))
            r.slots.push_back({s.at("slot").get<std::size_t>(), s.at("orbit").get<std::string>(),
                               s.at("index").get<std::size_t>(), s.at("phase").get<double>(),
                               s.at("cost").get<double>()});
        for (const auto& u : o.at("usage"))
            r.usage.emplace_back(u.at("orbit").get<std::string>(), u.at("count").get<std::size_t>());
        for (const auto& a : o.at("schedule"))
            r.schedule.push_back({a.at(0).get<std::size_t>(), a.at(1).get<std::size_t>(), a.at(2).get<std::size_t>()});
        for (const auto& c : o.at("theta"))
            r.coverage_by_step.push_back({c.at("covered").get<std::size_t>(), c.at("demanded").get<std::size_t>(),
                                          c.at("targets").get<std::vector<std::size_t>>()});
        for (const auto& h : o.at("history"))
            r.history.push_back({h.at("iteration").get<std::size_t>(), h.at("z_relaxed").get<double>(),
                                 h.at("z_heuristic").get<double>(), h.at("best_upper").get<double>(),
                                 h.at("best_lower").get<double>(), h.at("step_scale").get<double>()});
    } catch (const json::exception& e) {
        throw IoError(fmt::format("malformed result {}: {}", path.string(), e.what()));
    }
    const std::filesystem::path sidecar = path.string() + ".timings.json";
    if (std::ifstream t(sidecar); t) {
        try {
            r.timings = json::parse(t).get<std::map<std::string, double>>();
        } catch (const json::exception& e) {
            throw IoError(fmt::format("malformed timings {}: {}", sidecar.string(), e.what()));
        }
    }
    return r;
}

std::vector<std::string> check_result(const RunResult& r) {
    std::vector<std::string> issues;
    auto fail = [&](std::string msg) { issues.push_back(std::move(msg)); };
    const TensorDims& d = r.dims;
    if (r.mode == solver_mode_name(SolverMode::MpsExport)) {
        if (r.artifact.empty()) fail("export run without an MPS path");
        if (!r.slots.empty() || !r.schedule.empty()) fail("export run carries a solution");
        return issues;
    }
    if (r.slots.size() != r.p) fail(fmt::format("{} slots chosen, p = {}", r.slots.size(), r.p));
    std::set<std::size_t> chosen;
    for (std::size_t a = 0; a < r.slots.size(); ++a) {
        if (r.slots[a].slot >= d.n) fail(fmt::format("slot {} out of range", r.slots[a].slot));
        if (a > 0 && r.slots[a].slot <= r.slots[a - 1].slot) fail("slots not strictly ascending");
        if (!(r.slots[a].phase >= 0.0 && r.slots[a].phase < 1.0)) fail("slot phase outside [0, 1)");
        chosen.insert(r.slots[a].slot);
    }
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (const auto& a : r.schedule) {
        if (!chosen.contains(a.slot)) fail(fmt::format("slot {} allocated but not chosen", a.slot));
        if (a.t >= d.steps || a.direction >= d.m) fail("allocation index out of range");
        if (!used.insert({a.slot, a.t}).second) fail(fmt::format("slot {} points twice at t = {}", a.slot, a.t));
    }
    if (r.coverage_by_step.size() != d.steps) fail("theta summary length differs from the step count");
    std::size_t covered = 0, demanded = 0;
    for (const auto& c : r.coverage_by_step) {
        if (c.covered != c.targets.size()) fail("covered count differs from the target list");
        if (c.covered > c.demanded || c.demanded > d.q) fail("covered exceeds demanded");
        for (std::size_t a = 0; a < c.targets.size(); ++a)
            if (c.targets[a] >= d.q || (a > 0 && c.targets[a] <= c.targets[a - 1])) fail("bad covered target list");
        covered += c.covered;
        demanded += c.demanded;
    }
    if (demanded == 0) fail("no demanded pairs");
    else if (std::abs(r.coverage - static_cast<double>(covered) / static_cast<double>(demanded)) > 1e-12)
        fail("coverage does not match the theta summary");
    if (!(r.coverage >= 0.0 && r.coverage <= 1.0)) fail("coverage outside [0, 1]");
    double cost = 0.0;
    for (const auto& s : r.slots) cost += s.cost;
    if (d.steps > 0 &&
        std::abs(r.objective - (static_cast<double>(covered) - cost / static_cast<double>(d.steps))) >
            1e-9 * std::max(1.0, std::abs(r.objective)))
        fail("objective does not match coverage and slot costs");
    std::size_t usage = 0;
    for (const auto& [label, count] : r.usage) usage += count;
    if (usage != r.p) fail(fmt::format("usage counts sum to {}, p = {}", usage, r.p));
    if (r.upper_bound && *r.upper_bound < r.objective - 1e-9) fail("upper bound below the objective");
    for (std::size_t h = 1; h < r.history.size(); ++h) {
        if (r.history[h].best_lower < r.history[h - 1].best_lower) fail("best lower bound decreased");
        if (r.history[h].best_upper > r.history[h - 1].best_upper) fail("best upper bound increased");
    }
    return issues;
}

std::vector<Violation> revalidate(const RunResult& r, const Instance& instance) {
    const TensorDims& d = instance.dims();
    if (r.dims != d) return {{ViolationKind::ThetaShape, "result dimensions differ from the instance"}};
    Solution s;
    for (const auto& slot : r.slots) s.slots.push_back(slot.slot);
    s.allocations = r.schedule;
    s.theta = BoolMatrix(d.steps, d.q);
    if (r.coverage_by_step.size() != d.steps) return {{ViolationKind::ThetaShape, "theta summary length"}};
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k : r.coverage_by_step[t].targets) {
            if (k >= d.q) return {{ViolationKind::ThetaShape, "covered target out of range"}};
            s.theta.set(t, k, true);
        }
    s.objective = r.objective;
    s.coverage = r.coverage;
    auto v = validate_solution(s, instance);
    if (v.empty()) {
        const double z = evaluate_objective(s, instance);
        if (std::abs(z - r.objective) > 1e-9 * std::max(1.0, std::abs(z)))
            v.push_back({ViolationKind::Linking, fmt::format("stored objective {} differs from {}", r.objective, z)});
        if (std::abs(coverage_fraction(s.theta, instance.demand) - r.coverage) > 1e-12)
            v.push_back({ViolationKind::Linking, "stored coverage differs from the recomputed one"});
    }
    return v;
}

std::vector<std::filesystem::path> export_plot_data(const RunResult& r, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p);
        if (!out) throw IoError("cannot write " + p.string());
        return out;
    };
    const auto bounds = dir / "bounds.csv", coverage = dir / "coverage.csv", usage = dir / "usage.csv";
    {
        auto out = open(bounds);
        out << "iteration,z_relaxed,z_heuristic,best_upper,best_lower\n";
        for (const auto& h : r.history)
            out << fmt::format("{},{},{},{},{}\n", h.iteration, h.z_relaxed, h.z_heuristic, h.best_upper,
                               h.best_lower);
    }
    {
        auto out = open(coverage);
        out << "t,covered,demanded\n";
        for (std::size_t t = 0; t < r.coverage_by_step.size(); ++t)
            out << fmt::format("{},{},{}\n", t, r.coverage_by_step[t].covered, r.coverage_by_step[t].demanded);
    }
    {
        auto out = open(usage);
        out << "orbit,count\n";
        for (const auto& [label, count] : r.usage) out << fmt::format("\"{}\",{}\n", label, count);
        if (!out) throw IoError("write failed for " + usage.string());
    }
    return {bounds, coverage, usage};
}

}  // namespace cssa
