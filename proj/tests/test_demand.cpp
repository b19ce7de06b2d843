#include "cssa/demand.hpp"
#include "cssa/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <tuple>

using namespace cssa;

namespace {

const Cr3bpSystem kSys = Cr3bpSystem::earth_moon();

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

std::set<std::tuple<double, double, double>> as_set(const DemandSet& s) {
    std::set<std::tuple<double, double, double>> out;
    for (std::size_t k = 0; k < s.targets(); ++k) {
        const Vec3& p = s.position(k, 0);
        out.emplace(p.x(), p.y(), p.z());
    }
    return out;
}

}  // namespace

TEST_CASE("SOI grid") {
    const DemandSet soi = soi_grid(kSys, 120);
    CHECK(soi.targets() == 120);
    CHECK(soi.steps() == 120);
    CHECK(soi.demand.count() == 120 * 120);
    CHECK(soi.is_static_demand());
    const LibrationPoints lp = find_libration_points(kSys);
    const double half = 0.5 * 6.43e4 / kSys.length_unit_km;
    double xmin = 1e9, xmax = -1e9;
    for (std::size_t k = 0; k < soi.targets(); ++k) {
        const Vec3& p = soi.position(k, 0);
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        CHECK(std::abs(p.y()) <= half + 1e-15);
        CHECK(std::abs(p.z()) <= half + 1e-15);
    }
    CHECK(xmin == doctest::Approx(lp.l1));
    CHECK(xmax == doctest::Approx(lp.l2));

    const auto points = as_set(soi);
    for (const auto& [x, y, z] : points) {
        auto near = [&](double a, double b, double c) {
            for (const auto& [u, v, w] : points)
                if (std::abs(u - a) < 1e-14 && std::abs(v - b) < 1e-14 && std::abs(w - c) < 1e-14) return true;
            return false;
        };
        CHECK(near(x, -y, z));
        CHECK(near(x, y, -z));
    }

    const DemandSet one = soi_grid(kSys, 3, SoiParams{6.43e4, {1, 1, 1}});
    REQUIRE(one.targets() == 1);
    CHECK(one.position(0, 0).x() == doctest::Approx(0.5 * (lp.l1 + lp.l2)));
    CHECK(one.position(0, 0).y() == 0.0);
}

TEST_CASE("Cone of Shame") {
    const DemandSet cone = cone_of_shame(kSys, 120);
    CHECK(cone.targets() == 304);
    CHECK(cone.is_static_demand());
    const Vec3 earth = kSys.earth_position();
    const double tan_half = std::tan(15.0 * std::numbers::pi / 180.0);
    const LibrationPoints lp = find_libration_points(kSys);
    for (std::size_t k = 0; k < cone.targets(); ++k) {
        const Vec3 d = cone.position(k, 0) - earth;
        const double angle = std::atan2(std::hypot(d.y(), d.z()), d.x());
        CHECK(angle <= std::atan(tan_half) + 1e-9);
        CHECK(d.x() >= 2 * 42164.0 / kSys.length_unit_km - 1e-12);
        CHECK(d.x() <= lp.l2 - earth.x() + 1e-12);
    }

    ConeParams axis_only;
    axis_only.n_radial = 0;
    CHECK(cone_of_shame(kSys, 5, axis_only).targets() == axis_only.n_axial);

    ConeParams empty;
    empty.n_axial = 0;
    CHECK_THROWS_AS(cone_of_shame(kSys, 5, empty), ConfigError);
    ConeParams inverted;
    inverted.inner_radius_km = 1e6;
    CHECK_THROWS_AS(cone_of_shame(kSys, 5, inverted), ConfigError);
}

TEST_CASE("LET window") {
    const auto targets = let_window(kSys);
    CHECK(targets.size() == 675);
    const LibrationPoints lp = find_libration_points(kSys);
    Vec3 lo = targets[0], hi = targets[0];
    for (const Vec3& p : targets) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 spans = Vec3(2e4, 1e5, 1e5) / kSys.length_unit_km;
    CHECK(((hi - lo) - spans).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((0.5 * (hi + lo) - Vec3(lp.l2, 0, 0)).cwiseAbs().maxCoeff() < 1e-12);

    const auto single = let_window(kSys, LetParams{Vec3(2e4, 1e5, 1e5), {1, 1, 1}});
    REQUIRE(single.size() == 1);
    CHECK(single[0] == Vec3(lp.l2, 0, 0));
}

TEST_CASE("LET demand synthesis") {
    const auto targets = let_window(kSys);
    SUBCASE("all-ones pattern is static demand") {
        const DemandSet d = synthesize_let_demand(targets, 120, MonthlyPattern::all_ones(60, targets.size()));
        CHECK(d.is_static_demand());
    }
    SUBCASE("monthly repeat and density") {
        const MonthlyPattern p = MonthlyPattern::random(60, targets.size(), 0.3, 42);
        const DemandSet d = synthesize_let_demand(targets, 120, p);
        for (std::size_t t = 0; t + 60 < d.steps(); ++t)
            for (std::size_t k = 0; k < d.targets(); ++k) CHECK_EQ(d.demand(t, k), d.demand(t + 60, k));
        const double fraction = static_cast<double>(d.demand.count()) / (120.0 * targets.size());
        CHECK(std::abs(fraction - 0.3) <= 0.02);
        CHECK_NOTHROW(d.validate());
    }
    SUBCASE("seeded patterns are reproducible") {
        CHECK(MonthlyPattern::random(60, 10, 0.2, 5).mask == MonthlyPattern::random(60, 10, 0.2, 5).mask);
        CHECK_FALSE(MonthlyPattern::random(60, 10, 0.2, 5).mask == MonthlyPattern::random(60, 10, 0.2, 6).mask);
    }
    SUBCASE("sparse pattern still references every target") {
        const DemandSet d = synthesize_let_demand(targets, 60, MonthlyPattern::random(60, targets.size(), 0.0, 1));
        CHECK(d.demand.count() == targets.size());
    }
    SUBCASE("period mismatch") {
        CHECK_THROWS_AS(synthesize_let_demand(targets, 100, MonthlyPattern::all_ones(60, targets.size())), ConfigError);
    }
}

TEST_CASE("demand files") {
    const auto path = temp_file("cssa_demand_test.txt");

    SUBCASE("SOI round trip is bit exact") {
        const DemandSet soi = soi_grid(kSys, 120);
        save_demand(soi, path, kSys);
        CHECK(load_demand(path, kSys) == soi);
    }
    SUBCASE("random positions round trip bit exactly") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        DemandSet d;
        d.label = "random dynamic";
        d.demand = BoolMatrix(4, 50, true);
        for (int k = 0; k < 50; ++k) {
            std::vector<Vec3> track;
            for (int t = 0; t < 4; ++t) track.emplace_back(u(rng), u(rng) * 1e-3, u(rng) * 1e3);
            d.tracks.push_back(track);
        }
        save_demand(d, path, kSys);
        CHECK(load_demand(path, kSys) == d);
    }
    SUBCASE("truncated file") {
        save_demand(soi_grid(kSys, 10), path, kSys);
        std::string text;
        {
            std::ifstream in(path);
            text.assign(std::istreambuf_iterator<char>(in), {});
        }
        {
            std::ofstream out(path);
            out << text.substr(0, text.size() / 2);
        }
        CHECK_THROWS_AS(load_demand(path, kSys), ParseError);
    }
    SUBCASE("row count mismatch") {
        save_demand(soi_grid(kSys, 10, SoiParams{6.43e4, {2, 1, 1}}), path, kSys);
        std::string text;
        {
            std::ifstream in(path);
            text.assign(std::istreambuf_iterator<char>(in), {});
        }
        const auto pos = text.find("steps 10");
        text.replace(pos, 8, "steps 11");
        {
            std::ofstream out(path);
            out << text;
        }
        CHECK_THROWS_AS(load_demand(path, kSys), DimensionMismatch);
    }
    SUBCASE("bad character reports its column") {
        std::ofstream(path) << "cssa-demand 1\nlabel x\nsteps 1\ntargets 2\nlayout static\npositions km\n"
                               "1 2 3\n4 5 6\ndemand\n1x\nend\n";
        try {
            load_demand(path, kSys);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 10);
            CHECK(e.column() == 2);
        }
    }
    std::filesystem::remove(path);
}
