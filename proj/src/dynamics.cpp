#include "cssa/dynamics.hpp"

#include "cssa/errors.hpp"
#include "cssa/parallel.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace cssa {

namespace odeint = boost::numeric::odeint;

Cr3bpSystem Cr3bpSystem::earth_moon() {
    Cr3bpSystem system{};
    system.mu = 0.01215058560962404;
    system.length_unit_km = 389703.2648292776;
    system.time_unit_s = 382981.2891290545;
    system.synodic_period = kSynodicMonthDays * 86400.0 / system.time_unit_s;
    return system;
}

namespace {

constexpr double kSingularDistance = 1e-12;

template <typename T>
struct PrimaryTerms {
    T dx1, dx2, y, z;
    T r1, r2;
};

template <typename T>
PrimaryTerms<T> primary_terms(const T* s, const Cr3bpSystem& system) {
    using std::sqrt;
    PrimaryTerms<T> p{};
    p.dx1 = s[0] + T(system.mu);
    p.dx2 = s[0] - T(1) + T(system.mu);
    p.y = s[1];
    p.z = s[2];
    p.r1 = sqrt(p.dx1 * p.dx1 + p.y * p.y + p.z * p.z);
    p.r2 = sqrt(p.dx2 * p.dx2 + p.y * p.y + p.z * p.z);
    if (p.r1 < T(kSingularDistance) || p.r2 < T(kSingularDistance))
        throw SingularState("state coincides with a primary");
    return p;
}

template <typename T>
void rate(const T* s, T* ds, const Cr3bpSystem& system) {
    const PrimaryTerms<T> p = primary_terms(s, system);
    const T k1 = (T(1) - T(system.mu)) / (p.r1 * p.r1 * p.r1);
    const T k2 = T(system.mu) / (p.r2 * p.r2 * p.r2);
    ds[0] = s[3];
    ds[1] = s[4];
    ds[2] = s[5];
    ds[3] = -k1 * p.dx1 - k2 * p.dx2 + s[0] + T(2) * s[4];
    ds[4] = -k1 * p.y - k2 * p.y + s[1] - T(2) * s[3];
    ds[5] = -k1 * p.z - k2 * p.z;
}

template <typename T>
using Mat6 = Eigen::Matrix<T, 6, 6>;

// Second derivatives of the effective potential.
template <typename T>
Eigen::Matrix<T, 3, 3> potential_hessian(const T* s, const Cr3bpSystem& system) {
    const PrimaryTerms<T> p = primary_terms(s, system);
    const T mu1 = T(1) - T(system.mu);
    const T r1_3 = p.r1 * p.r1 * p.r1;
    const T r2_3 = p.r2 * p.r2 * p.r2;
    const T a1 = mu1 / r1_3;
    const T a2 = T(system.mu) / r2_3;
    const T b1 = T(3) * mu1 / (r1_3 * p.r1 * p.r1);
    const T b2 = T(3) * T(system.mu) / (r2_3 * p.r2 * p.r2);
    const std::array<T, 3> d1{p.dx1, p.y, p.z};
    const std::array<T, 3> d2{p.dx2, p.y, p.z};
    Eigen::Matrix<T, 3, 3> h;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            h(a, b) = b1 * d1[a] * d1[b] + b2 * d2[a] * d2[b];
        }
        h(a, a) -= a1 + a2;
    }
    h(0, 0) += T(1);
    h(1, 1) += T(1);
    return h;
}

template <typename T>
Mat6<T> jacobian_at(const T* s, const Cr3bpSystem& system) {
    Mat6<T> a = Mat6<T>::Zero();
    a.template block<3, 3>(0, 3).setIdentity();
    a.template block<3, 3>(3, 0) = potential_hessian(s, system);
    a(3, 4) = T(2);
    a(4, 3) = T(-2);
    return a;
}

template <typename T>
struct StateRhs {
    const Cr3bpSystem* system;
    void operator()(const std::array<T, 6>& x, std::array<T, 6>& dx, T) const {
        rate(x.data(), dx.data(), *system);
    }
};

// Layout: 6 state components followed by the STM in column-major order.
template <typename T>
struct StmRhs {
    const Cr3bpSystem* system;
    void operator()(const std::array<T, 42>& x, std::array<T, 42>& dx, T) const {
        rate(x.data(), dx.data(), *system);
        const Mat6<T> a = jacobian_at(x.data(), *system);
        Eigen::Map<const Mat6<T>> phi(x.data() + 6);
        Eigen::Map<Mat6<T>> dphi(dx.data() + 6);
        dphi.noalias() = a * phi;
    }
};

void check_tolerance(double tol) {
    if (!(tol >= 1e-14 && tol <= 1e-6)) throw DomainError("integration tolerance outside [1e-14, 1e-6]");
}

template <typename Flat, typename Rhs, typename T>
void integrate(Flat& x, T tof, Rhs rhs, T tol) {
    using std::abs;
    if (tof == T(0)) return;
    const T dt0 = std::copysign(std::min(T(1e-3), abs(tof)), tof);
    try {
        odeint::integrate_adaptive(
            odeint::make_controlled(tol, tol, odeint::runge_kutta_fehlberg78<Flat, T>()), rhs, x, T(0),
            tof, dt0);
    } catch (const odeint::odeint_error& e) {
        throw IntegrationFailure(e.what());
    }
    for (T v : x)
        if (!std::isfinite(v)) throw IntegrationFailure("non-finite state during integration");
}

template <typename T>
std::array<T, 6> to_flat(const State6& s) {
    std::array<T, 6> x{};
    for (int i = 0; i < 6; ++i) x[i] = s[i];
    return x;
}

template <typename T>
State6 from_flat(const T* x) {
    State6 s;
    for (int i = 0; i < 6; ++i) s[i] = static_cast<double>(x[i]);
    return s;
}

using Flat6 = std::array<double, 6>;

// Extended precision is used where closure must beat double-precision round-off amplified
// by close lunar passes.
using Extended = long double;
constexpr Extended kExtendedTolerance = 1e-17L;

struct ExtendedPropagation {
    std::array<Extended, 6> state;
    Mat6<Extended> stm;
};

ExtendedPropagation propagate_extended(const std::array<Extended, 6>& state0, Extended tof,
                                       const Cr3bpSystem& system) {
    std::array<Extended, 42> x{};
    for (int i = 0; i < 6; ++i) x[i] = state0[i];
    Eigen::Map<Mat6<Extended>>(x.data() + 6).setIdentity();
    integrate(x, tof, StmRhs<Extended>{&system}, kExtendedTolerance);
    ExtendedPropagation out;
    for (int i = 0; i < 6; ++i) out.state[i] = x[i];
    out.stm = Eigen::Map<const Mat6<Extended>>(x.data() + 6);
    return out;
}

}  // namespace

State6 cr3bp_derivative(const State6& state, const Cr3bpSystem& system) {
    State6 out;
    rate(state.data(), out.data(), system);
    return out;
}

Matrix6 cr3bp_jacobian(const State6& state, const Cr3bpSystem& system) {
    return jacobian_at(state.data(), system);
}

double jacobi_constant(const State6& s, const Cr3bpSystem& system) {
    const PrimaryTerms<double> p = primary_terms(s.data(), system);
    const double potential =
        0.5 * (s[0] * s[0] + s[1] * s[1]) + system.mu1() / p.r1 + system.mu / p.r2;
    return 2.0 * potential - s.tail<3>().squaredNorm();
}

Propagation propagate(const State6& state0, double tof, bool with_stm, const Cr3bpSystem& system,
                      double tol) {
    check_tolerance(tol);
    if (!std::isfinite(tof)) throw DomainError("time of flight must be finite");
    if (!state0.allFinite()) throw DomainError("initial state must be finite");
    if (!with_stm) {
        Flat6 x = to_flat<double>(state0);
        integrate(x, tof, StateRhs<double>{&system}, tol);
        return {from_flat(x.data()), std::nullopt};
    }
    std::array<double, 42> x{};
    for (int i = 0; i < 6; ++i) x[i] = state0[i];
    Eigen::Map<Matrix6>(x.data() + 6).setIdentity();
    integrate(x, tof, StmRhs<double>{&system}, tol);
    return {from_flat(x.data()), Matrix6(Eigen::Map<const Matrix6>(x.data() + 6))};
}

std::vector<State6> propagate_to_times(const State6& state0, std::span<const double> times,
                                       const Cr3bpSystem& system, double tol) {
    check_tolerance(tol);
    std::vector<State6> out;
    out.reserve(times.size());
    if (times.empty()) return out;
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw DomainError("sample times must be non-decreasing");
    Flat6 x = to_flat<double>(state0);
    double t = 0.0;
    // Walk sample to sample; each leg restarts the controller, which keeps every
    // sample an exact integration endpoint.
    for (double target : times) {
        integrate(x, target - t, StateRhs<double>{&system}, tol);
        t = target;
        out.push_back(from_flat(x.data()));
    }
    return out;
}

LibrationPoints find_libration_points(const Cr3bpSystem& system) {
    const double mu = system.mu;
    auto balance = [&](double x) {
        const double d1 = x + mu;
        const double d2 = x - 1.0 + mu;
        return x - system.mu1() * d1 / std::abs(d1 * d1 * d1) - mu * d2 / std::abs(d2 * d2 * d2);
    };
    auto solve = [&](double lo, double hi) {
        boost::math::tools::eps_tolerance<double> tolerance(std::numeric_limits<double>::digits - 1);
        std::uintmax_t iterations = 200;
        const auto [a, b] = boost::math::tools::toms748_solve(balance, lo, hi, tolerance, iterations);
        return 0.5 * (a + b);
    };
    const double gap = 1e-9;
    return {solve(-mu + gap, 1.0 - mu - gap), solve(1.0 - mu + gap, 2.0)};
}

double stability_index(const Matrix6& monodromy) {
    if (!monodromy.allFinite()) throw EigenFailure("monodromy matrix is not finite");
    Eigen::EigenSolver<Matrix6> solver(monodromy, false);
    if (solver.info() != Eigen::Success) throw EigenFailure("eigenvalue iteration did not converge");
    double nu = 1.0;
    for (const std::complex<double>& lambda : solver.eigenvalues()) {
        if (std::abs(lambda) == 0.0) continue;
        nu = std::max(nu, 0.5 * std::abs(lambda + 1.0 / lambda));
    }
    return nu;
}

namespace {

constexpr std::array<std::pair<Family, std::string_view>, 8> kFamilyNames{{
    {Family::DRO, "DRO"},
    {Family::DPO, "DPO"},
    {Family::L1Lyapunov, "L1Lyapunov"},
    {Family::L2Lyapunov, "L2Lyapunov"},
    {Family::L2HaloS, "L2HaloS"},
    {Family::L2HaloN, "L2HaloN"},
    {Family::ButterflyS, "ButterflyS"},
    {Family::ButterflyN, "ButterflyN"},
}};

struct TableRow {
    Family family;
    Resonance resonance;
    double x0, z0, ydot0, period, stability;
};

// clang-format off
constexpr std::array<TableRow, 30> kTable{{
    {Family::DRO, {9, 2}, 0.88976967,  0.0, 0.47183463, 1.47892343, 1.00},
    {Family::DRO, {4, 1}, 0.88060589,  0.0, 0.47011146, 1.66378885, 1.00},
    {Family::DRO, {3, 1}, 0.85378188,  0.0, 0.47696024, 2.21838514, 1.00},
    {Family::DRO, {9, 4}, 0.81807765,  0.0, 0.50559384, 2.95784685, 1.00},
    {Family::DRO, {2, 1}, 0.79946085,  0.0, 0.52703349, 3.32757771, 1.00},
    {Family::DRO, {3, 2}, 0.73370014,  0.0, 0.62889866, 4.43677028, 1.00},
    {Family::DRO, {5, 2}, 0.83249233,  0.0, 0.49184571, 2.66206217, 1.00},
    {Family::L2HaloS, {9, 2}, 1.01958272, -0.18036049, -0.09788185, 1.47892343, 1.00},
    {Family::L2HaloS, {4, 1}, 1.03352559, -0.18903385, -0.12699215, 1.66378885, 1.00},
    {Family::L2HaloS, {3, 1}, 1.07203837, -0.20182525, -0.18853332, 2.21838514, 1.00},
    {Family::L2HaloS, {9, 4}, 1.12518004, -0.18195085, -0.22544142, 2.95784685, 28.78},
    {Family::L2HaloS, {2, 1}, 1.16846916, -0.09994291, -0.19568201, 3.32757771, 282.87},
    {Family::L2HaloS, {5, 2}, 1.10193101, -0.19829817, -0.21702846, 2.66206217, 6.93},
    {Family::DPO, {4, 1}, 1.06189575, 0.0, 0.35989734, 1.66378885, 2.26},
    {Family::DPO, {3, 1}, 1.06335021, 0.0, 0.38222392, 2.21838514, 10.98},
    {Family::DPO, {9, 4}, 1.05547996, 0.0, 0.45941661, 2.95784685, 76.76},
    {Family::DPO, {2, 1}, 1.04880058, 0.0, 0.51457559, 3.32757771, 159.21},
    {Family::DPO, {3, 2}, 1.02851298, 0.0, 0.71048482, 4.43677028, 587.57},
    {Family::DPO, {5, 2}, 1.05978399, 0.0, 0.42240630, 2.66206217, 37.71},
    {Family::DPO, {1, 1}, 1.00515914, 0.0, 1.16888350, 6.65515541, 1399.19},
    {Family::L1Lyapunov, {9, 4}, 0.81109465, 0.0, 0.26078428, 2.95784685, 746.89},
    {Family::L1Lyapunov, {2, 1}, 0.79987674, 0.0, 0.35828602, 3.32757771, 407.88},
    {Family::L1Lyapunov, {3, 2}, 0.76511295, 0.0, 0.49115556, 4.43677028, 133.00},
    {Family::L1Lyapunov, {1, 1}, 0.63394833, 0.0, 0.79045684, 6.65515541, 53.98},
    {Family::ButterflyS, {9, 4}, 0.94130132, 0.16165899, -0.03565177, 2.95784685, 5.79},
    {Family::ButterflyS, {2, 1}, 0.91204757, 0.14952514, -0.02724245, 3.32757771, 12.45},
    {Family::ButterflyS, {3, 2}, 0.91414032, 0.14492270, -0.11588220, 4.43677028, 1.00},
    {Family::ButterflyS, {1, 1}, 0.99265217, 0.17814460, -0.26312433, 6.65515541, 1.00},
    {Family::L2Lyapunov, {3, 2}, 1.02557297, 0.0, 0.77068285, 4.43677028, 115.15},
    {Family::L2Lyapunov, {1, 1}, 0.99695262, 0.0, 1.64068576, 6.65515541, 49.78},
}};
// clang-format on

LpoRecord make_record(const TableRow& row, double dt_b_hours, const Cr3bpSystem& system) {
    return {row.family, row.resonance, row.x0, row.z0, row.ydot0, row.period, row.stability,
            slot_count(row.resonance, dt_b_hours, system)};
}

std::optional<Family> northern_mirror(Family family) {
    if (family == Family::L2HaloS) return Family::L2HaloN;
    if (family == Family::ButterflyS) return Family::ButterflyN;
    return std::nullopt;
}

}  // namespace

std::string_view family_name(Family family) {
    for (const auto& [f, name] : kFamilyNames)
        if (f == family) return name;
    return "?";
}

Family parse_family(std::string_view name) {
    for (const auto& [f, n] : kFamilyNames)
        if (n == name) return f;
    throw ConfigError("unknown orbit family '" + std::string(name) + "'");
}

Resonance parse_resonance(std::string_view text) {
    const auto colon = text.find(':');
    Resonance r{};
    try {
        if (colon == std::string_view::npos) throw std::invalid_argument("no colon");
        std::size_t used = 0;
        const std::string m(text.substr(0, colon));
        const std::string n(text.substr(colon + 1));
        r.m = std::stoi(m, &used);
        if (used != m.size()) throw std::invalid_argument("m");
        r.n = std::stoi(n, &used);
        if (used != n.size()) throw std::invalid_argument("n");
    } catch (const std::exception&) {
        throw ConfigError("malformed resonance '" + std::string(text) + "', expected M:N");
    }
    if (r.m <= 0 || r.n <= 0) throw ConfigError("resonance terms must be positive");
    return r;
}

State6 LpoRecord::initial_state() const {
    State6 s;
    s << x0, 0.0, z0, 0.0, ydot0, 0.0;
    return s;
}

std::string LpoRecord::label() const {
    return std::string(family_name(family)) + " " + resonance.str();
}

std::size_t slot_count(Resonance resonance, double dt_b_hours, const Cr3bpSystem& system) {
    if (!(dt_b_hours > 0.0)) throw DomainError("slot spacing must be positive");
    const double period_hours = system.tu_to_hours(resonance.period_ratio() * system.synodic_period);
    const double ratio = period_hours / dt_b_hours;
    // An exact multiple (e.g. 708 h / 12 h) must not round up because of unit conversion noise.
    const double slots = std::ceil(ratio * (1.0 - 1e-12));
    return static_cast<std::size_t>(std::max(1.0, slots));
}

std::vector<LpoRecord> tabulated_orbits(double dt_b_hours, const Cr3bpSystem& system) {
    std::vector<LpoRecord> out;
    out.reserve(kTable.size());
    for (const TableRow& row : kTable) out.push_back(make_record(row, dt_b_hours, system));
    return out;
}

std::vector<LpoRecord> build_catalog(double dt_b_hours, const Cr3bpSystem& system) {
    std::vector<LpoRecord> out;
    out.reserve(40);
    const std::vector<LpoRecord> rows = tabulated_orbits(dt_b_hours, system);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.push_back(rows[i]);
        const bool block_end = i + 1 == rows.size() || rows[i + 1].family != rows[i].family;
        if (!block_end) continue;
        const auto mirror = northern_mirror(rows[i].family);
        if (!mirror) continue;
        for (const LpoRecord& r : rows) {
            if (r.family != rows[i].family) continue;
            LpoRecord m = r;
            m.family = *mirror;
            m.z0 = -r.z0;
            out.push_back(m);
        }
    }
    return out;
}

std::vector<LpoRecord> load_catalog_table(const std::filesystem::path& path, double dt_b_hours,
                                          const Cr3bpSystem& system) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open catalog table " + path.string());
    std::vector<LpoRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string family, resonance;
        if (!(fields >> family)) continue;
        TableRow row{};
        try {
            row.family = parse_family(family);
            if (!(fields >> resonance)) throw ParseError("missing resonance", line_no);
            row.resonance = parse_resonance(resonance);
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), line_no);
        }
        if (!(fields >> row.x0 >> row.z0 >> row.ydot0 >> row.period >> row.stability))
            throw ParseError("expected x0 z0 ydot0 period stability", line_no);
        std::string extra;
        if (fields >> extra) throw ParseError("unexpected trailing field '" + extra + "'", line_no);
        out.push_back(make_record(row, dt_b_hours, system));
    }
    return out;
}

double closure_residual(const State6& state0, double period, const Cr3bpSystem& system, double tol) {
    const Propagation end = propagate(state0, period, false, system, tol);
    return (end.state - state0).cwiseAbs().maxCoeff();
}

double closure_residual_extended(const State6& state0, double period, const Cr3bpSystem& system) {
    std::array<Extended, 6> x{};
    for (int i = 0; i < 6; ++i) x[i] = state0[i];
    std::array<Extended, 6> end = x;
    integrate(end, static_cast<Extended>(period), StateRhs<Extended>{&system}, kExtendedTolerance);
    Extended worst = 0;
    for (int i = 0; i < 6; ++i) worst = std::max(worst, std::abs(end[i] - x[i]));
    return static_cast<double>(worst);
}

CorrectedOrbit correct_orbit(const LpoRecord& record, const Cr3bpSystem& system) {
    const Extended period =
        static_cast<Extended>(record.resonance.n) / record.resonance.m * system.synodic_period;
    const bool planar = record.z0 == 0.0;
    // Free variables x0, z0, ydot0; targets y, xdot, zdot at the half-period crossing.
    const int dim = planar ? 2 : 3;
    const std::array<int, 3> free_used = planar ? std::array<int, 3>{0, 4, -1} : std::array<int, 3>{0, 2, 4};
    const std::array<int, 3> target_used = planar ? std::array<int, 3>{1, 3, -1} : std::array<int, 3>{1, 3, 5};

    std::array<Extended, 6> state{record.x0, 0, record.z0, 0, record.ydot0, 0};
    int iterations = 0;
    Extended previous = std::numeric_limits<Extended>::infinity();
    for (; iterations < 30; ++iterations) {
        const ExtendedPropagation half = propagate_extended(state, period / 2, system);
        Eigen::Matrix<Extended, Eigen::Dynamic, 1> residual(dim);
        Eigen::Matrix<Extended, Eigen::Dynamic, Eigen::Dynamic> jac(dim, dim);
        for (int r = 0; r < dim; ++r) {
            residual[r] = half.state[target_used[r]];
            for (int c = 0; c < dim; ++c) jac(r, c) = half.stm(target_used[r], free_used[c]);
        }
        const Extended size = residual.cwiseAbs().maxCoeff();
        // Stop at convergence or once round-off prevents further progress.
        if (size < 1e-17L || (size < 1e-13L && size >= previous)) break;
        previous = size;
        const auto step = jac.colPivHouseholderQr().solve(-residual).eval();
        for (int c = 0; c < dim; ++c) state[free_used[c]] += step[c];
    }
    const ExtendedPropagation full = propagate_extended(state, period, system);
    CorrectedOrbit out;
    Extended closure = 0;
    for (int i = 0; i < 6; ++i) {
        out.state[i] = static_cast<double>(state[i]);
        closure = std::max(closure, std::abs(full.state[i] - state[i]));
    }
    out.period = static_cast<double>(period);
    out.monodromy = full.stm.cast<double>();
    out.closure = static_cast<double>(closure);
    out.iterations = iterations;
    return out;
}

std::vector<LpoRecord> refine_catalog(std::span<const LpoRecord> catalog, const Cr3bpSystem& system,
                                      unsigned threads) {
    std::vector<LpoRecord> out(catalog.begin(), catalog.end());
    parallel_for(out.size(), threads, [&](std::size_t i) {
        const CorrectedOrbit c = correct_orbit(catalog[i], system);
        out[i].x0 = c.state[0];
        out[i].z0 = c.state[2];
        out[i].ydot0 = c.state[4];
        out[i].period = c.period;
        out[i].stability = stability_index(c.monodromy);
    });
    return out;
}

TimeGrid TimeGrid::synodic(const Cr3bpSystem& system, std::size_t steps_per_month, std::size_t months) {
    if (steps_per_month == 0 || months == 0) throw ConfigError("time grid needs at least one step");
    return {steps_per_month * months, system.synodic_period / static_cast<double>(steps_per_month)};
}

std::vector<SlotEphemeris> slot_ephemeris(std::span<const LpoRecord> catalog, const TimeGrid& grid,
                                          const Cr3bpSystem& system, const EphemerisOptions& options) {
    if (grid.steps == 0) throw DomainError("ephemeris horizon must be at least one step");
    std::vector<std::vector<SlotEphemeris>> per_orbit(catalog.size());
    parallel_for(catalog.size(), options.threads, [&](std::size_t o) {
        const LpoRecord& orbit = catalog[o];
        const double period = orbit.period;
        const auto samples = static_cast<std::size_t>(std::ceil(period / (0.25 * grid.dt)));
        const double spacing = period / static_cast<double>(samples);
        std::vector<double> sample_times(samples + 1);
        for (std::size_t k = 0; k <= samples; ++k) sample_times[k] = spacing * static_cast<double>(k);
        const std::vector<State6> dense =
            propagate_to_times(orbit.initial_state(), sample_times, system, options.tol);

        auto& slots = per_orbit[o];
        slots.resize(orbit.slots);
        for (std::size_t s = 0; s < orbit.slots; ++s) {
            SlotEphemeris& e = slots[s];
            e.orbit = o;
            e.slot_in_orbit = s;
            e.orbit_slots = orbit.slots;
            e.phase_offset = static_cast<double>(s) / static_cast<double>(orbit.slots);
            e.positions.resize(grid.steps);
            for (std::size_t t = 0; t < grid.steps; ++t) {
                const double tau = std::fmod(grid.time(t) + e.phase_offset * period, period);
                const auto nearest = std::min<std::size_t>(
                    samples, static_cast<std::size_t>(std::llround(tau / spacing)));
                const double remainder = tau - sample_times[nearest];
                const State6 x = propagate(dense[nearest], remainder, false, system, options.tol).state;
                e.positions[t] = x.head<3>();
            }
        }
    });
    std::vector<SlotEphemeris> out;
    for (auto& slots : per_orbit)
        for (auto& e : slots) out.push_back(std::move(e));
    return out;
}

}  // namespace cssa
