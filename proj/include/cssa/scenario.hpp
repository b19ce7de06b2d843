#pragma once

#include "cssa/lagrangean.hpp"
#include "cssa/model.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cssa {

enum class DemandKind { Soi, Cone, Let, File };
enum class SolverMode { Lagrangean, MpsExport, ImportSolution };

std::string_view demand_kind_name(DemandKind kind);
DemandKind parse_demand_kind(std::string_view name);
std::string_view solver_mode_name(SolverMode mode);
SolverMode parse_solver_mode(std::string_view name);

struct DemandConfig {
    DemandKind kind = DemandKind::Soi;
    SoiParams soi;
    ConeParams cone;
    LetParams let;
    double let_density = 0.3;  // monthly activation; 1 gives static demand
    std::filesystem::path path;  // kind == File
};

struct ObserverConfig {
    SensorParams sensor;
    TargetOptics optics;
    double sun_theta0_deg = 0.0;
};

struct CatalogConfig {
    double dt_b_hours = 12.0;
    bool refine = true;
    std::vector<std::string> families;     // empty keeps all
    std::vector<std::string> resonances;   // "M:N"; empty keeps all
    std::filesystem::path table;           // optional table file replacing the built-in rows
};

struct TimeGridConfig {
    std::size_t steps_per_month = 60;
    std::size_t months = 2;
};

struct SolverConfig {
    SolverMode mode = SolverMode::Lagrangean;
    LmConfig lm;
    MpsVariant variant = MpsVariant::Aggregate;
    std::filesystem::path mps_path;       // MpsExport
    std::filesystem::path solution_path;  // ImportSolution
};

struct ScenarioConfig {
    std::string name = "scenario";
    DemandConfig demand;
    ObserverConfig observer;
    CatalogConfig catalog;
    TimeGridConfig grid;
    SolverConfig solver;
    std::size_t p = 2;
    std::uint64_t seed = 0;
    std::optional<unsigned> threads;  // unset: CSSA_THREADS, then 1
    std::filesystem::path output = "result.json";

    // Relative paths are resolved against `base` (the config file's directory) at load time.
    void validate() const;
    unsigned effective_threads() const;
};

// JSON text. Unknown keys and malformed values raise ConfigError.
ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base = {});
ScenarioConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ScenarioConfig& config, int indent = 2);

// One of the nine shipped presets: demand in {soi, cone, let}, fov in {60, 120}, m_crit in {15, 18, 20}.
ScenarioConfig preset_config(DemandKind demand, double fov_deg, double m_crit);
std::string preset_name(DemandKind demand, double fov_deg, double m_crit);
std::vector<ScenarioConfig> all_presets();

struct ScenarioData {
    std::vector<LpoRecord> catalog;
    TimeGrid grid;
    std::vector<SlotEphemeris> ephemeris;
    DemandSet demand;
    Instance instance;
};

// Catalog, ephemeris, demand, tensor and instance for a config.
ScenarioData build_scenario(const ScenarioConfig& config);

struct ChosenSlot {
    std::size_t slot;
    std::string orbit;
    std::size_t orbit_index;
    double phase;
    double cost;
};

struct StepCoverage {
    std::size_t covered;
    std::size_t demanded;
    std::vector<std::size_t> targets;  // covered target indices
};

struct RunResult {
    std::string config_json;  // echo
    std::string mode;
    TensorDims dims;
    std::size_t nnz = 0;
    double density = 0.0;
    std::size_t p = 0;
    std::vector<ChosenSlot> slots;
    std::vector<Allocation> schedule;
    std::vector<StepCoverage> coverage_by_step;
    double coverage = 0.0;   // Theta
    double objective = 0.0;  // Z
    std::optional<double> upper_bound;
    std::string stop_reason;
    std::vector<IterationRecord> history;
    std::vector<std::pair<std::string, std::size_t>> usage;  // per orbit label, catalog order
    std::string artifact;  // MPS path in export mode
    std::map<std::string, double> timings;  // seconds; written to the sidecar only
};

RunResult run_scenario(const ScenarioConfig& config);

// Deterministic JSON without timings; the timings go to `<path>.timings.json`.
void save_result(const RunResult& result, const std::filesystem::path& path);
RunResult load_result(const std::filesystem::path& path);
std::string result_to_json(const RunResult& result);

// Internal consistency (counts, Theta, Z up to the slot costs, usage). Empty when valid.
std::vector<std::string> check_result(const RunResult& result);
// Full check of the embedded solution against a rebuilt instance.
std::vector<Violation> revalidate(const RunResult& result, const Instance& instance);

// bounds.csv (iteration, z_relaxed, z_heuristic), coverage.csv (t, covered, demanded),
// usage.csv (orbit, count). Returns the written files.
std::vector<std::filesystem::path> export_plot_data(const RunResult& result, const std::filesystem::path& dir);

}  // namespace cssa
