#include "cssa/dynamics.hpp"
#include "cssa/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace cssa;

namespace {

const Cr3bpSystem kSys = Cr3bpSystem::earth_moon();

// Newton iteration on the collinear quintic in the distance gamma from the Moon.
long double quintic_root(bool l2) {
    const long double mu = kSys.mu;
    const long double s = l2 ? 1.0L : -1.0L;
    auto f = [&](long double g) {
        return g * g * g * g * g + s * (3 - mu) * g * g * g * g + (3 - 2 * mu) * g * g * g - mu * g * g -
               s * 2 * mu * g - mu;
    };
    auto df = [&](long double g) {
        return 5 * g * g * g * g + s * 4 * (3 - mu) * g * g * g + 3 * (3 - 2 * mu) * g * g - 2 * mu * g -
               s * 2 * mu;
    };
    long double g = 0.15L;
    for (int i = 0; i < 60; ++i) g -= f(g) / df(g);
    return g;
}

State6 at_rest(double x) {
    State6 s = State6::Zero();
    s[0] = x;
    return s;
}

}  // namespace

TEST_CASE("equations of motion") {
    State6 s;
    s << 0.5, 0.1, 0.0, 0.3, -0.2, 0.05;
    const State6 ds = cr3bp_derivative(s, kSys);
    CHECK(ds.head<3>() == s.tail<3>());

    SUBCASE("scratch evaluation at (0.5, 0.1, 0)") {
        const State6 rest = at_rest(0.5) + State6::Unit(1) * 0.1;
        const State6 r = cr3bp_derivative(rest, kSys);
        // Independent 40-digit evaluation of the two-body, centrifugal and Coriolis terms.
        CHECK(r[3] == doctest::Approx(-3.0125868932584480664).epsilon(1e-14));
        CHECK(r[4] == doctest::Approx(-0.60506051638224214237).epsilon(1e-14));
        CHECK(r[5] == 0.0);
    }
    SUBCASE("Coriolis term") {
        State6 v = at_rest(0.5);
        v[3] = 1.0;
        const State6 a = cr3bp_derivative(v, kSys) - cr3bp_derivative(at_rest(0.5), kSys);
        CHECK(a[3] == doctest::Approx(0.0));
        CHECK(a[4] == doctest::Approx(-2.0));
    }
    SUBCASE("singular at a primary") {
        CHECK_THROWS_AS(cr3bp_derivative(at_rest(-kSys.mu), kSys), SingularState);
        CHECK_THROWS_AS(cr3bp_derivative(at_rest(1.0 - kSys.mu), kSys), SingularState);
    }
}

TEST_CASE("jacobian matches finite differences of the vector field") {
    State6 s;
    s << 0.9, 0.05, 0.1, 0.01, 0.3, -0.02;
    const Matrix6 a = cr3bp_jacobian(s, kSys);
    for (int c = 0; c < 6; ++c) {
        const double h = 1e-6;
        const State6 col = (cr3bp_derivative(s + h * State6::Unit(c), kSys) -
                            cr3bp_derivative(s - h * State6::Unit(c), kSys)) /
                           (2 * h);
        CHECK((col - a.col(c)).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("libration points") {
    const LibrationPoints lp = find_libration_points(kSys);
    const double l1 = static_cast<double>(1.0L - kSys.mu - quintic_root(false));
    const double l2 = static_cast<double>(1.0L - kSys.mu + quintic_root(true));
    CHECK(lp.l1 == doctest::Approx(l1).epsilon(1e-13));
    CHECK(lp.l2 == doctest::Approx(l2).epsilon(1e-13));
    CHECK(lp.l1 == doctest::Approx(0.83691512577235715454).epsilon(1e-13));
    CHECK(lp.l2 == doctest::Approx(1.155682165444884122).epsilon(1e-13));
    CHECK(lp.l1 < 1.0 - kSys.mu);
    CHECK(1.0 - kSys.mu < lp.l2);
    for (double x : {lp.l1, lp.l2}) CHECK(cr3bp_derivative(at_rest(x), kSys).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("propagation basics") {
    const State6 s = tabulated_orbits(12.0)[23].initial_state();  // L1 Lyapunov 1:1

    SUBCASE("zero time of flight") {
        const Propagation p = propagate(s, 0.0, true, kSys);
        CHECK(p.state == s);
        CHECK(*p.stm == Matrix6::Identity());
    }
    SUBCASE("reversibility") {
        const double tol = 1e-12;
        const State6 fwd = propagate(s, 1.0, false, kSys, tol).state;
        const State6 back = propagate(fwd, -1.0, false, kSys, tol).state;
        CHECK((back - s).cwiseAbs().maxCoeff() < 10 * tol);
    }
    SUBCASE("tolerance domain") {
        CHECK_THROWS_AS(propagate(s, 1.0, false, kSys, 1e-16), DomainError);
        CHECK_THROWS_AS(propagate(s, 1.0, false, kSys, 1e-3), DomainError);
    }
    SUBCASE("published L1 Lyapunov 1:1 closes") {
        CHECK(closure_residual(s, 6.65515541, kSys) < 5e-5);
    }
    SUBCASE("Jacobi constant drift over one period") {
        for (const LpoRecord& r : tabulated_orbits(12.0)) {
            const double c0 = jacobi_constant(r.initial_state(), kSys);
            const double c1 = jacobi_constant(propagate(r.initial_state(), r.period, false, kSys).state, kSys);
            CHECK_MESSAGE(std::abs(c1 - c0) < 1e-9, r.label());
        }
    }
    SUBCASE("planar orbits stay planar") {
        for (const LpoRecord& r : tabulated_orbits(12.0)) {
            if (r.z0 != 0.0) continue;
            const State6 end = propagate(r.initial_state(), r.period, false, kSys).state;
            CHECK(std::abs(end[2]) < 1e-12);
            CHECK(std::abs(end[5]) < 1e-12);
        }
    }
}

TEST_CASE("state transition matrix agrees with finite differences") {
    const LpoRecord dro = tabulated_orbits(12.0)[5];  // DRO 3:2
    const double tof = 1.0;
    const State6 x0 = dro.initial_state();
    const Propagation nominal = propagate(x0, tof, true, kSys, 1e-14);
    for (int c = 0; c < 6; ++c) {
        const State6 dx = 1e-7 * State6::Unit(c);
        const State6 pert = propagate(x0 + dx, tof, false, kSys, 1e-14).state;
        const double err = ((*nominal.stm) * dx - (pert - nominal.state)).norm() / dx.norm();
        CHECK(err < 1e-4);
    }
}

TEST_CASE("stability index") {
    CHECK(stability_index(Matrix6::Identity()) == doctest::Approx(1.0));
    Matrix6 saddle = Matrix6::Identity();
    saddle(0, 0) = 4.0;
    saddle(1, 1) = 0.25;
    CHECK(stability_index(saddle) == doctest::Approx(0.5 * (4.0 + 0.25)));
    Matrix6 bad = Matrix6::Identity();
    bad(2, 2) = std::nan("");
    CHECK_THROWS_AS(stability_index(bad), EigenFailure);

    const auto rows = tabulated_orbits(12.0);
    const CorrectedOrbit l1 = correct_orbit(rows[23], kSys);
    CHECK(stability_index(l1.monodromy) == doctest::Approx(53.98).epsilon(0.02));
    const CorrectedOrbit dro = correct_orbit(rows[5], kSys);
    CHECK(stability_index(dro.monodromy) == doctest::Approx(1.00).epsilon(0.02));
}

TEST_CASE("catalog") {
    const auto catalog = build_catalog(12.0);
    REQUIRE(catalog.size() == 40);
    std::size_t total = 0;
    for (const LpoRecord& r : catalog) total += r.slots;
    CHECK(total == 1212);
    CHECK(catalog[0].label() == "DRO 9:2");
    CHECK(catalog[0].slots == 14);

    std::size_t north = 0;
    for (const LpoRecord& r : catalog) {
        CHECK(r.period == doctest::Approx(r.resonance.period_ratio() * kSys.synodic_period).epsilon(1e-6));
        CHECK(r.stability >= 1.0);
        if (r.family == Family::L2HaloN || r.family == Family::ButterflyN) {
            ++north;
            const auto twin = std::find_if(catalog.begin(), catalog.end(), [&](const LpoRecord& o) {
                return o.family != r.family && o.resonance == r.resonance && o.x0 == r.x0 && o.z0 == -r.z0;
            });
            CHECK(twin != catalog.end());
        }
    }
    CHECK(north == 10);

    SUBCASE("slot spacing longer than every period") {
        for (const LpoRecord& r : build_catalog(1e4)) CHECK(r.slots == 1);
    }
    SUBCASE("invalid spacing") { CHECK_THROWS_AS(build_catalog(0.0), DomainError); }
}

TEST_CASE("differential correction tightens closure") {
    const auto rows = tabulated_orbits(12.0);
    for (std::size_t i : {std::size_t{0}, std::size_t{10}, std::size_t{24}}) {
        const CorrectedOrbit c = correct_orbit(rows[i], kSys);
        CHECK(c.closure < 1e-9);
        CHECK(c.state[1] == 0.0);
        CHECK((c.state - rows[i].initial_state()).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("catalog table override") {
    const auto path = std::filesystem::temp_directory_path() / "cssa_catalog_test.txt";
    {
        std::ofstream out(path);
        out << "# family M:N x0 z0 ydot0 period stability\n";
        out << "DRO 9:2 0.88976967 0 0.47183463 1.47892343 1.00\n";
        out << "L2HaloS 2:1 1.16846916 -0.09994291 -0.19568201 3.32757771 282.87  # comment\n";
    }
    const auto rows = load_catalog_table(path, 12.0);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].family == Family::L2HaloS);
    CHECK(rows[1].slots == 30);
    {
        std::ofstream out(path);
        out << "DRO 9:2 0.88976967 0 0.47183463\n";
    }
    CHECK_THROWS_AS(load_catalog_table(path, 12.0), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("slot ephemeris") {
    const auto rows = tabulated_orbits(12.0);
    const std::vector<LpoRecord> subset{rows[0], rows[23]};  // DRO 9:2, L1 Lyapunov 1:1
    const TimeGrid grid{300, kSys.synodic_period / 60.0};
    const auto eph = slot_ephemeris(subset, grid, kSys);
    REQUIRE(eph.size() == subset[0].slots + subset[1].slots);

    CHECK((eph[0].positions[0] - subset[0].initial_state().head<3>()).norm() < 1e-14);
    for (const SlotEphemeris& e : eph) {
        CHECK(e.phase_offset == doctest::Approx(double(e.slot_in_orbit) / e.orbit_slots));
        for (std::size_t t = 0; t + 240 < grid.steps; t += 7)
            CHECK((e.positions[t] - e.positions[t + 240]).norm() < 1e-6);
    }

    // Neighboring slots are the same trajectory shifted by P/b, checked by direct propagation.
    const LpoRecord& orbit = subset[1];
    const SlotEphemeris& s1 = eph[subset[0].slots + 3];
    for (std::size_t t : {std::size_t{0}, std::size_t{17}, std::size_t{119}}) {
        const double tau = grid.time(t) + (s1.slot_in_orbit + 1.0) / orbit.slots * orbit.period;
        const Vec3 direct = propagate(orbit.initial_state(), std::fmod(tau, orbit.period), false, kSys).state.head<3>();
        CHECK((eph[subset[0].slots + 4].positions[t] - direct).norm() < 1e-6);
    }
    CHECK_THROWS_AS(slot_ephemeris(subset, TimeGrid{0, 0.1}, kSys), DomainError);
}

TEST_CASE("time grid") {
    const TimeGrid g = TimeGrid::synodic(kSys);
    CHECK(g.steps == 120);
    CHECK(g.dt * 60 == doctest::Approx(kSys.synodic_period));
    CHECK(kSys.synodic_period * kSys.time_unit_s == doctest::Approx(29.5 * 86400).epsilon(1e-12));
}
