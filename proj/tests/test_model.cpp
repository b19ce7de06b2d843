#include "cssa/errors.hpp"
#include "cssa/model.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

using namespace cssa;
using namespace cssa::testing;
using Entry = VisibilityTensor::Entry;

namespace {

const Cr3bpSystem kSys = Cr3bpSystem::earth_moon();

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

double solver_objective(const std::filesystem::path& solution) {
    std::ifstream in(solution);
    std::string hash, word;
    double z = std::numeric_limits<double>::quiet_NaN();
    in >> hash >> word >> z;
    return z;
}

// Small real scenario: three orbits, SOI grid demand, 120 steps.
struct Scenario {
    std::vector<LpoRecord> orbits;
    TimeGrid grid;
    std::vector<SlotEphemeris> eph;
    DemandSet demand;
    ObservationModel model;
};

const Scenario& scenario() {
    static const Scenario s = [] {
        Scenario out;
        const auto table = tabulated_orbits(96.0, kSys);
        out.orbits = {table[5], table[12], table[28]};
        out.grid = TimeGrid::synodic(kSys);
        out.eph = slot_ephemeris(out.orbits, out.grid, kSys, {kDefaultTolerance, 4});
        out.demand = soi_grid(kSys, out.grid.steps);
        out.model = {pointing_directions(), SensorParams{}, TargetOptics{}, SunModel::standard(kSys), kSys};
        return out;
    }();
    return s;
}

}  // namespace

TEST_CASE("tensor from entries: indexes agree with the entry set") {
    std::mt19937_64 rng(7);
    const TensorDims dims{5, 4, 6, 130};
    std::set<Entry> truth;
    std::uniform_int_distribution<std::size_t> di(0, 4), dj(0, 3), dt(0, 5), dk(0, 129);
    for (int e = 0; e < 600; ++e) truth.insert({di(rng), dj(rng), dt(rng), dk(rng)});
    const std::vector<Entry> list(truth.begin(), truth.end());
    const VisibilityTensor M = VisibilityTensor::from_entries(dims, list);

    CHECK(M.words() == 3);
    CHECK(M.nnz() == truth.size());
    CHECK(M.density() == doctest::Approx(static_cast<double>(truth.size()) / (5.0 * 4 * 6 * 130)));
    auto got = M.entries();
    std::sort(got.begin(), got.end());
    CHECK(got == list);

    std::size_t via_tk = 0;
    for (std::size_t t = 0; t < dims.steps; ++t)
        for (std::size_t k = 0; k < dims.q; ++k)
            for (const auto& o : M.observers(t, k)) {
                CHECK(truth.count({o.direction, o.slot, t, k}) == 1);
                ++via_tk;
            }
    CHECK(via_tk == truth.size());
    for (std::size_t i = 0; i < dims.m; ++i)
        for (std::size_t j = 0; j < dims.n; ++j)
            for (std::size_t t = 0; t < dims.steps; ++t) {
                std::size_t count = 0;
                for (std::size_t k = 0; k < dims.q; ++k) {
                    const bool in = truth.count({i, j, t, k}) == 1;
                    CHECK(M.contains(i, j, t, k) == in);
                    count += in;
                }
                CHECK(M.coverage_count(i, j, t) == count);
                CHECK((M.coverage(i, j, t) == nullptr) == (count == 0));
            }
    CHECK(VisibilityTensor::from_entries(dims, list) == M);
    CHECK_THROWS_AS(VisibilityTensor::from_entries(dims, std::vector<Entry>{{5, 0, 0, 0}}), DimensionMismatch);
}

TEST_CASE("tensor construction limits") {
    const Scenario& s = scenario();
    SUBCASE("m_crit = -inf gives an empty tensor") {
        ObservationModel model = s.model;
        model.sensor.m_crit = -std::numeric_limits<double>::infinity();
        const auto M = build_visibility_tensor(s.eph, s.demand, model, s.grid, 4);
        CHECK(M.nnz() == 0);
        CHECK(M.density() == 0.0);
    }
    SUBCASE("every test disabled reproduces the demand density") {
        ObservationModel model = s.model;
        model.sensor.fov_deg = 360.0;
        model.sensor.m_crit = std::numeric_limits<double>::infinity();
        model.sensor.moon_radius_km = 1e-9;
        // Sparse demand so the density is not trivially 1.
        DemandSet demand = synthesize_let_demand(let_window(kSys), s.grid.steps,
                                                 MonthlyPattern::random(60, 675, 0.1, 3));
        const auto M = build_visibility_tensor(s.eph, demand, model, s.grid, 4);
        const double demand_density = static_cast<double>(demand.demand.count()) / (120.0 * 675.0);
        CHECK(M.density() == doctest::Approx(demand_density).epsilon(1e-12));
        for (std::size_t i = 0; i < M.dims().m; i += 5)
            for (std::size_t j = 0; j < M.dims().n; j += 7) {
                std::size_t slice = 0;
                for (std::size_t t = 0; t < M.dims().steps; ++t) slice += M.coverage_count(i, j, t);
                CHECK(static_cast<double>(slice) / (120.0 * 675.0) == doctest::Approx(demand_density));
            }
    }
    SUBCASE("dimension checks") {
        CHECK_THROWS_AS(build_visibility_tensor(s.eph, s.demand, s.model, TimeGrid{60, s.grid.dt}), DimensionMismatch);
    }
}

TEST_CASE("tensor soundness against direct visibility on random samples") {
    const Scenario& s = scenario();
    const auto M = build_visibility_tensor(s.eph, s.demand, s.model, s.grid, 4);
    CHECK(M == build_visibility_tensor(s.eph, s.demand, s.model, s.grid, 1));
    CHECK(M.nnz() > 0);
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> di(0, M.dims().m - 1), dj(0, M.dims().n - 1),
        dt(0, M.dims().steps - 1), dk(0, M.dims().q - 1);
    std::size_t positives = 0;
    for (int sample = 0; sample < 1000; ++sample) {
        const std::size_t i = di(rng), j = dj(rng), t = dt(rng), k = dk(rng);
        const bool direct = s.demand.demand(t, k) &&
                            visibility(s.eph[j].positions[t], s.demand.position(k, t), s.model.pointing[i],
                                       sun_position(s.grid.time(t), s.model.sun), s.model.sensor, s.model.optics, kSys);
        CHECK(M.contains(i, j, t, k) == direct);
        positives += direct;
    }
    // Also sample from the entry set so that positives are exercised.
    const auto entries = M.entries();
    std::uniform_int_distribution<std::size_t> de(0, entries.size() - 1);
    for (int sample = 0; sample < 200; ++sample) {
        const Entry& e = entries[de(rng)];
        CHECK(visibility(s.eph[e.j].positions[e.t], s.demand.position(e.k, e.t), s.model.pointing[e.i],
                         sun_position(s.grid.time(e.t), s.model.sun), s.model.sensor, s.model.optics, kSys));
    }
    MESSAGE("random-sample positives: " << positives << ", density " << M.density());
}

TEST_CASE("facility costs") {
    CHECK(facility_cost(1.0) == doctest::Approx(10.0 / 11.0).epsilon(1e-15));
    CHECK(facility_cost(1.0) == doctest::Approx(0.90909).epsilon(1e-5));
    CHECK(facility_cost(53.98) == doctest::Approx(0.98437).epsilon(1e-5));
    double previous = 0.0;
    for (double nu = 1.0; nu < 2000.0; nu *= 1.3) {
        const double f = facility_cost(nu);
        CHECK(f > previous);
        CHECK(f > 0.0);
        CHECK(f < 1.0);
        previous = f;
    }
    CHECK_THROWS_AS(facility_cost(0.5), DomainError);

    const Scenario& s = scenario();
    const auto costs = facility_costs(s.orbits, s.eph);
    REQUIRE(costs.size() == s.eph.size());
    for (std::size_t j = 0; j < costs.size(); ++j)
        CHECK(costs[j] == facility_cost(s.orbits[s.eph[j].orbit].stability));
    const auto meta = slot_metadata(s.orbits, s.eph);
    CHECK(meta[0].orbit_label == s.orbits[0].label());
    CHECK(meta[1].phase() == doctest::Approx(1.0 / static_cast<double>(meta[1].count)));
}

TEST_CASE("theta from schedule") {
    const TensorDims dims{2, 2, 5, 8};
    const auto M = VisibilityTensor::from_entries(
        dims, std::vector<Entry>{{0, 0, 3, 2}, {0, 0, 3, 5}, {1, 1, 3, 5}, {1, 1, 0, 7}});
    SUBCASE("empty schedule") { CHECK(theta_from_schedule({}, M).count() == 0); }
    SUBCASE("single allocation") {
        const std::vector<Allocation> x{{0, 3, 0}};
        const BoolMatrix theta = theta_from_schedule(x, M);
        CHECK(theta.count() == 2);
        CHECK(theta(3, 2));
        CHECK(theta(3, 5));
    }
    SUBCASE("overlapping allocations saturate") {
        const std::vector<Allocation> x{{0, 3, 0}, {1, 3, 1}};
        const BoolMatrix theta = theta_from_schedule(x, M);
        CHECK(theta.count() == 2);
    }
}

TEST_CASE("objective and coverage") {
    SUBCASE("zero coverage, two slots of cost 0.9 over 120 steps") {
        const TensorDims dims{1, 3, 120, 1};
        const auto inst = instance_from_entries(dims, {{0, 0, 0, 0}}, {0.9, 0.9, 0.5}, 2, BoolMatrix(120, 1, true));
        const Solution s = make_solution({0, 1}, {}, inst);
        CHECK(evaluate_objective(s, inst) == doctest::Approx(-0.015).epsilon(1e-14));
        CHECK(s.objective == evaluate_objective(s, inst));
        CHECK(s.coverage == 0.0);
    }
    SUBCASE("full coverage of static demand") {
        std::vector<Entry> entries;
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t k = 0; k < 3; ++k) entries.push_back({0, 0, t, k});
        const auto inst = instance_from_entries({1, 2, 4, 3}, entries, {0.95, 0.92}, 1, BoolMatrix(4, 3, true));
        std::vector<Allocation> x;
        for (std::size_t t = 0; t < 4; ++t) x.push_back({0, t, 0});
        const Solution s = make_solution({0}, x, inst);
        CHECK(evaluate_objective(s, inst) == doctest::Approx(12.0 - 0.95 / 4.0));
        CHECK(s.coverage == 1.0);
    }
    SUBCASE("redundant observation leaves Z unchanged") {
        const auto inst = instance_from_entries({2, 2, 1, 2}, {{0, 0, 0, 0}, {0, 1, 0, 0}}, {0.9, 0.9}, 2,
                                                BoolMatrix(1, 2, true));
        const Solution one = make_solution({0, 1}, {{0, 0, 0}}, inst);
        const Solution two = make_solution({0, 1}, {{0, 0, 0}, {1, 0, 0}}, inst);
        CHECK(one.objective == two.objective);
        CHECK(one.coverage == 0.5);
    }
    SUBCASE("coverage fraction") {
        BoolMatrix d(2, 2, true);
        CHECK(coverage_fraction(d, d) == 1.0);
        CHECK(coverage_fraction(BoolMatrix(2, 2), d) == 0.0);
        BoolMatrix half(2, 2);
        half.set(0, 0, true);
        half.set(1, 1, true);
        CHECK(coverage_fraction(half, d) == 0.5);
        CHECK_THROWS_AS(coverage_fraction(half, BoolMatrix(2, 2)), EmptyDemand);
        CHECK_THROWS_AS(coverage_fraction(half, BoolMatrix(2, 3)), DimensionMismatch);
    }
}

TEST_CASE("solution validation") {
    const Instance inst = tiny_instance();
    auto kinds = [&](const Solution& s) {
        std::set<ViolationKind> out;
        for (const auto& v : validate_solution(s, inst)) out.insert(v.kind);
        return out;
    };
    const Solution good = make_solution({1}, {{1, 0, 0}}, inst);
    CHECK(validate_solution(good, inst).empty());
    CHECK(good.objective == doctest::Approx(2.0 - 12.0 / 13.0));

    SUBCASE("allocation on an unchosen slot") {
        Solution s = good;
        s.allocations.push_back({0, 0, 1});
        s.theta = theta_from_schedule(s.allocations, inst.tensor);
        CHECK(kinds(s) == std::set{ViolationKind::Existence});
        CHECK_THROWS_AS(evaluate_objective(s, inst), InfeasibleSolution);
    }
    SUBCASE("theta without a covering allocation") {
        Solution s = make_solution({1}, {}, inst);
        s.theta.set(0, 1, true);
        CHECK(kinds(s) == std::set{ViolationKind::Linking});
    }
    SUBCASE("cardinality, duplicates, ranges, shape") {
        Solution s = good;
        s.slots = {1, 1};
        CHECK(kinds(s) == std::set{ViolationKind::Cardinality, ViolationKind::DuplicateSlot});
        s = good;
        s.slots = {7};
        CHECK(kinds(s).count(ViolationKind::SlotRange) == 1);
        s = good;
        s.allocations.push_back({1, 0, 1});
        CHECK(kinds(s) == std::set{ViolationKind::MultipleDirections});
        s = good;
        s.allocations.push_back({1, 4, 0});
        CHECK(kinds(s) == std::set{ViolationKind::AllocationRange});
        s = good;
        s.theta = BoolMatrix(2, 2);
        CHECK(kinds(s) == std::set{ViolationKind::ThetaShape});
    }
    SUBCASE("theta from any feasible schedule passes the linking check") {
        std::mt19937_64 rng(11);
        const TensorDims dims{4, 6, 10, 20};
        std::vector<Entry> entries;
        std::bernoulli_distribution coin(0.15);
        for (std::size_t i = 0; i < dims.m; ++i)
            for (std::size_t j = 0; j < dims.n; ++j)
                for (std::size_t t = 0; t < dims.steps; ++t)
                    for (std::size_t k = 0; k < dims.q; ++k)
                        if (coin(rng)) entries.push_back({i, j, t, k});
        const auto big = instance_from_entries(dims, entries, std::vector<double>(6, 0.91), 3,
                                               BoolMatrix(10, 20, true));
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<std::size_t> y{0, 1, 2, 3, 4, 5};
            std::shuffle(y.begin(), y.end(), rng);
            y.resize(3);
            std::vector<Allocation> x;
            for (std::size_t j : y)
                for (std::size_t t = 0; t < dims.steps; ++t)
                    if (coin(rng) || coin(rng)) x.push_back({j, t, rng() % dims.m});
            const Solution s = make_solution(y, x, big);
            CHECK(validate_solution(s, big).empty());
        }
    }
}

TEST_CASE("instance validation") {
    Instance inst = tiny_instance();
    inst.p = 0;
    CHECK_THROWS_AS(inst.validate(), ConfigError);
    inst = tiny_instance();
    inst.costs[0] = 1.0;
    CHECK_THROWS_AS(inst.validate(), ConfigError);
    inst = tiny_instance();
    inst.demand.set(0, 1, false);
    CHECK_THROWS_AS(inst.validate(), ConfigError);
    inst = tiny_instance();
    inst.costs.pop_back();
    CHECK_THROWS_AS(inst.validate(), DimensionMismatch);
}

TEST_CASE("MPS export matches the golden files") {
    const Instance inst = tiny_instance();
    for (MpsVariant variant : {MpsVariant::Aggregate, MpsVariant::TimeRobust}) {
        const std::string name = "tiny_" + std::string(variant_name(variant)) + ".mps";
        const auto a = temp_path("a_" + name), b = temp_path("b_" + name);
        export_mps(inst, variant, a);
        export_mps(inst, variant, b);
        CHECK(slurp(a) == slurp(b));
        CHECK(slurp(a) == slurp(source_dir() / "tests" / "golden" / name));
    }
    CHECK(parse_variant("target_robust") == MpsVariant::TargetRobust);
    CHECK_THROWS_AS(parse_variant("robust"), ConfigError);
    CHECK_THROWS_AS(export_mps(inst, MpsVariant::Aggregate, "/nonexistent/dir/x.mps"), IoError);
}

TEST_CASE("MPS records fit the fixed-format fields") {
    const TensorDims dims{14, 300, 120, 675};
    CHECK(allocation_name(dims, 13, 299, 119).size() == 8);
    CHECK(slot_name(1211) == "Y00000XN");
    CHECK(theta_name(dims, 0, 36) == "T0000010");

    const Instance inst = tiny_instance();
    const auto path = temp_path("fields.mps");
    export_mps(inst, MpsVariant::TargetRobust, path);
    std::ifstream in(path);
    std::string line;
    bool in_body = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '*') continue;
        if (line[0] != ' ') {
            in_body = line != "NAME          CSSA" && line != "ENDATA";
            continue;
        }
        if (!in_body || line.find("MARKER") != std::string::npos) continue;
        CHECK(line.size() <= 36);
        if (line.size() > 24) CHECK(line.substr(24).size() <= 12);
    }
}

TEST_CASE("solution files") {
    const Instance inst = tiny_instance();
    const Solution good = make_solution({1}, {{1, 0, 0}}, inst);
    const auto path = temp_path("tiny.sol");

    SUBCASE("round trip") {
        write_solution(good, inst, path);
        const Solution back = import_solution(path, inst);
        CHECK(back.slots == good.slots);
        CHECK(back.allocations == good.allocations);
        CHECK(back.theta == good.theta);
        CHECK(back.objective == good.objective);
        CHECK(back.coverage == good.coverage);
    }
    SUBCASE("unknown variable") {
        write_text(path, "Y0000001 1\nQ1234 1\n");
        try {
            import_solution(path, inst);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("Q1234") != std::string::npos);
            CHECK(e.line() == 2);
        }
        write_text(path, "Y0000009 1\n");
        CHECK_THROWS_AS(import_solution(path, inst), ParseError);
    }
    SUBCASE("fractional binary") {
        write_text(path, "Y0000001 0.5\n");
        CHECK_THROWS_AS(import_solution(path, inst), ParseError);
    }
    SUBCASE("near-binary values are rounded") {
        write_text(path, "# from a solver\nY0000001 0.9999999\nX0000002 1.0000004\nT0000000 0.9999999\nY0000000 1e-9\n");
        const Solution s = import_solution(path, inst);
        CHECK(s.slots == std::vector<std::size_t>{1});
        CHECK(s.theta.count() == 2);
    }
    SUBCASE("infeasible imports") {
        write_text(path, "Y0000000 1\nY0000001 1\n");
        CHECK_THROWS_AS(import_solution(path, inst), InfeasibleSolution);
        write_text(path, "Y0000001 1\nT0000001 1\n");
        CHECK_THROWS_AS(import_solution(path, inst), InfeasibleSolution);
    }
    SUBCASE("malformed lines") {
        write_text(path, "Y0000001\n");
        CHECK_THROWS_AS(import_solution(path, inst), ParseError);
        write_text(path, "Y0000001 1 2\n");
        CHECK_THROWS_AS(import_solution(path, inst), ParseError);
        write_text(path, "Y0000001 abc\n");
        CHECK_THROWS_AS(import_solution(path, inst), ParseError);
        write_text(path, "Y0000001 1\nY0000001 1\n");
        CHECK_THROWS_AS(import_solution(path, inst), ParseError);
    }
}

TEST_CASE("external MILP solve of exported models") {
    if (!highs_available()) {
        MESSAGE("highspy not importable; external solver checks skipped");
        return;
    }
    SUBCASE("tiny aggregate optimum") {
        const Instance inst = tiny_instance();
        const auto mps = temp_path("tiny_solve.mps"), sol = temp_path("tiny_solve.sol");
        export_mps(inst, MpsVariant::Aggregate, mps);
        REQUIRE(solve_with_highs(mps, sol) == 0);
        const Solution s = import_solution(sol, inst);
        CHECK(s.objective == doctest::Approx(2.0 - 12.0 / 13.0).epsilon(1e-9));
        CHECK(solver_objective(sol) == doctest::Approx(s.objective).epsilon(1e-9));
    }
    SUBCASE("time-robust floor is zero when one step has no visibility") {
        const auto inst = instance_from_entries({1, 2, 2, 2}, {{0, 0, 0, 0}, {0, 0, 0, 1}, {0, 1, 0, 1}},
                                                {0.91, 0.92}, 1, BoolMatrix(2, 2, true));
        const auto mps = temp_path("zero_step.mps"), sol = temp_path("zero_step.sol");
        export_mps(inst, MpsVariant::TimeRobust, mps);
        REQUIRE(solve_with_highs(mps, sol) == 0);
        // Z = psi - min cost / steps with psi = 0.
        CHECK(solver_objective(sol) == doctest::Approx(-0.91 / 2.0).epsilon(1e-9));
        std::ifstream in(sol);
        std::string name;
        double value;
        while (in >> name >> value)
            if (name == "PSI") CHECK(value == doctest::Approx(0.0));
    }
    SUBCASE("target-robust floor") {
        const auto inst = instance_from_entries({1, 2, 2, 2}, {{0, 0, 0, 0}, {0, 0, 1, 1}, {0, 1, 0, 1}},
                                                {0.91, 0.92}, 1, BoolMatrix(2, 2, true));
        const auto mps = temp_path("target.mps"), sol = temp_path("target.sol");
        export_mps(inst, MpsVariant::TargetRobust, mps);
        REQUIRE(solve_with_highs(mps, sol) == 0);
        // Slot 0 sees each target once.
        CHECK(solver_objective(sol) == doctest::Approx(1.0 - 0.91 / 2.0).epsilon(1e-9));
    }
    SUBCASE("objective on fixed variables matches evaluate_objective") {
        std::mt19937_64 rng(5);
        const TensorDims dims{3, 5, 4, 9};
        std::vector<Entry> entries;
        std::bernoulli_distribution coin(0.2);
        BoolMatrix demand(4, 9);
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t k = 0; k < 9; ++k) demand.set(t, k, (t + k) % 4 != 0);
        for (std::size_t i = 0; i < dims.m; ++i)
            for (std::size_t j = 0; j < dims.n; ++j)
                for (std::size_t t = 0; t < dims.steps; ++t)
                    for (std::size_t k = 0; k < dims.q; ++k)
                        if (demand(t, k) && coin(rng)) entries.push_back({i, j, t, k});
        const auto inst = instance_from_entries(dims, entries, {0.91, 0.93, 0.95, 0.97, 0.985}, 2, demand);
        const auto mps = temp_path("fixed.mps");
        export_mps(inst, MpsVariant::Aggregate, mps);
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<std::size_t> y{0, 1, 2, 3, 4};
            std::shuffle(y.begin(), y.end(), rng);
            y.resize(2);
            std::vector<Allocation> x;
            for (std::size_t j : y)
                for (std::size_t t = 0; t < dims.steps; ++t)
                    for (std::uint16_t i : inst.tensor.directions(j, t))
                        if (coin(rng) || coin(rng)) {
                            x.push_back({j, t, i});
                            break;
                        }
            const Solution s = make_solution(y, x, inst);
            const auto fix = temp_path("fixed_in.sol"), sol = temp_path("fixed_out.sol");
            write_solution(s, inst, fix);
            REQUIRE(solve_with_highs(mps, sol, "--fix " + fix.string()) == 0);
            CHECK(std::abs(solver_objective(sol) - evaluate_objective(s, inst)) <= 1e-6);
        }
    }
}
