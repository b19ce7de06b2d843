#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cssa {

using Vec3 = Eigen::Vector3d;
using State6 = Eigen::Matrix<double, 6, 1>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

struct Cr3bpSystem {
    double mu;
    double length_unit_km;
    double time_unit_s;
    double synodic_period;  // TU

    static Cr3bpSystem earth_moon();

    double mu1() const { return 1.0 - mu; }
    Vec3 earth_position() const { return {-mu, 0.0, 0.0}; }
    Vec3 moon_position() const { return {1.0 - mu, 0.0, 0.0}; }
    double hours_to_tu(double hours) const { return hours * 3600.0 / time_unit_s; }
    double tu_to_hours(double tu) const { return tu * time_unit_s / 3600.0; }
};

inline constexpr double kSynodicMonthDays = 29.5;
inline constexpr double kDefaultTolerance = 1e-12;

State6 cr3bp_derivative(const State6& state, const Cr3bpSystem& system);
Matrix6 cr3bp_jacobian(const State6& state, const Cr3bpSystem& system);
double jacobi_constant(const State6& state, const Cr3bpSystem& system);

struct Propagation {
    State6 state;
    std::optional<Matrix6> stm;
};

// Adaptive Runge-Kutta-Fehlberg 7(8); tol is applied as both relative and absolute tolerance.
Propagation propagate(const State6& state0, double tof, bool with_stm, const Cr3bpSystem& system,
                      double tol = kDefaultTolerance);

// States at each requested time (non-decreasing, relative to the initial epoch) from one pass.
std::vector<State6> propagate_to_times(const State6& state0, std::span<const double> times,
                                       const Cr3bpSystem& system, double tol = kDefaultTolerance);

struct LibrationPoints {
    double l1;
    double l2;
};

LibrationPoints find_libration_points(const Cr3bpSystem& system);

// Largest 0.5*|lambda + 1/lambda| over the monodromy spectrum.
double stability_index(const Matrix6& monodromy);

enum class Family { DRO, DPO, L1Lyapunov, L2Lyapunov, L2HaloS, L2HaloN, ButterflyS, ButterflyN };

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

struct Resonance {
    int m = 1;
    int n = 1;

    double period_ratio() const { return static_cast<double>(n) / m; }
    std::string str() const { return std::to_string(m) + ":" + std::to_string(n); }
    friend bool operator==(const Resonance&, const Resonance&) = default;
};

Resonance parse_resonance(std::string_view text);

struct LpoRecord {
    Family family;
    Resonance resonance;
    double x0;
    double z0;
    double ydot0;
    double period;     // TU
    double stability;  // nu
    std::size_t slots;

    State6 initial_state() const;
    std::string label() const;
};

// ceil(P_hours / dt_b_hours), with the period taken from the synodic resonance.
std::size_t slot_count(Resonance resonance, double dt_b_hours, const Cr3bpSystem& system);

// 30 tabulated orbits plus the 10 Northern mirrors (z0 -> -z0), 40 records in all.
std::vector<LpoRecord> build_catalog(double dt_b_hours,
                                     const Cr3bpSystem& system = Cr3bpSystem::earth_moon());

// Only the 30 tabulated rows, in table order.
std::vector<LpoRecord> tabulated_orbits(double dt_b_hours,
                                        const Cr3bpSystem& system = Cr3bpSystem::earth_moon());

// Whitespace-separated rows: family M:N x0 z0 ydot0 period stability; '#' starts a comment.
std::vector<LpoRecord> load_catalog_table(const std::filesystem::path& path, double dt_b_hours,
                                          const Cr3bpSystem& system = Cr3bpSystem::earth_moon());

double closure_residual(const State6& state0, double period, const Cr3bpSystem& system,
                        double tol = kDefaultTolerance);

// Same measure evaluated in extended precision at a much tighter tolerance, so that the result
// reflects the initial condition rather than integration round-off.
double closure_residual_extended(const State6& state0, double period, const Cr3bpSystem& system);

struct CorrectedOrbit {
    State6 state;
    double period;
    Matrix6 monodromy;
    double closure;
    int iterations;
};

// Fixed-period single shooting on the perpendicular x-z plane crossing at half period, carried
// out in extended precision. `closure` is the full-period residual of the corrected state.
CorrectedOrbit correct_orbit(const LpoRecord& record, const Cr3bpSystem& system);

// Replaces x0, z0, ydot0 with corrected values, period with the exact resonant period and
// stability with the recomputed index. Slot counts are unchanged.
std::vector<LpoRecord> refine_catalog(std::span<const LpoRecord> catalog, const Cr3bpSystem& system,
                                      unsigned threads = 1);

struct TimeGrid {
    std::size_t steps;
    double dt;  // TU

    static TimeGrid synodic(const Cr3bpSystem& system, std::size_t steps_per_month = 60,
                            std::size_t months = 2);
    // t is zero-based.
    double time(std::size_t t) const { return static_cast<double>(t) * dt; }
};

struct SlotEphemeris {
    std::size_t orbit;          // catalog index
    std::size_t slot_in_orbit;  // s
    std::size_t orbit_slots;    // b
    double phase_offset;        // s / b
    std::vector<Vec3> positions;
};

struct EphemerisOptions {
    double tol = kDefaultTolerance;
    unsigned threads = 1;
};

std::vector<SlotEphemeris> slot_ephemeris(std::span<const LpoRecord> catalog, const TimeGrid& grid,
                                          const Cr3bpSystem& system, const EphemerisOptions& options = {});

}  // namespace cssa
