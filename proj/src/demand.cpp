#include "cssa/demand.hpp"

#include "cssa/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace cssa {

std::size_t BoolMatrix::count() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

void DemandSet::validate() const {
    if (demand.cols() != targets())
        throw DimensionMismatch(fmt::format("demand has {} columns for {} targets", demand.cols(), targets()));
    for (std::size_t k = 0; k < targets(); ++k) {
        if (tracks[k].size() != 1 && tracks[k].size() != steps())
            throw DimensionMismatch(fmt::format("target {} has {} positions, expected 1 or {}", k, tracks[k].size(), steps()));
        bool referenced = false;
        for (std::size_t t = 0; t < steps() && !referenced; ++t) referenced = demand(t, k);
        if (!referenced) throw ConfigError(fmt::format("target {} is never demanded", k));
    }
}

std::vector<Vec3> box_grid(const Vec3& center, const Vec3& spans, GridCounts counts) {
    if (counts.nx == 0 || counts.ny == 0 || counts.nz == 0) throw ConfigError("grid counts must be at least 1");
    const std::array<std::size_t, 3> n{counts.nx, counts.ny, counts.nz};
    std::array<std::vector<double>, 3> axis;
    for (int a = 0; a < 3; ++a) {
        if (n[a] == 1) {
            axis[a] = {center[a]};
            continue;
        }
        const double lo = center[a] - 0.5 * spans[a];
        for (std::size_t i = 0; i < n[a]; ++i)
            axis[a].push_back(lo + spans[a] * static_cast<double>(i) / static_cast<double>(n[a] - 1));
    }
    std::vector<Vec3> out;
    out.reserve(counts.total());
    for (double x : axis[0])
        for (double y : axis[1])
            for (double z : axis[2]) out.emplace_back(x, y, z);
    return out;
}

namespace {

DemandSet static_set(std::string label, const std::vector<Vec3>& points, std::size_t steps) {
    if (steps == 0) throw ConfigError("demand horizon must be at least one step");
    DemandSet set;
    set.label = std::move(label);
    for (const Vec3& p : points) set.tracks.push_back({p});
    set.demand = BoolMatrix(steps, points.size(), true);
    return set;
}

}  // namespace

DemandSet soi_grid(const Cr3bpSystem& system, std::size_t steps, const SoiParams& params) {
    const LibrationPoints lp = find_libration_points(system);
    const double width = params.width_km / system.length_unit_km;
    const Vec3 center(0.5 * (lp.l1 + lp.l2), 0.0, 0.0);
    const Vec3 spans(lp.l2 - lp.l1, width, width);
    return static_set("soi", box_grid(center, spans, params.counts), steps);
}

DemandSet cone_of_shame(const Cr3bpSystem& system, std::size_t steps, const ConeParams& params) {
    const LibrationPoints lp = find_libration_points(system);
    const double inner = params.inner_radius_km / system.length_unit_km;
    const double outer = lp.l2 - system.earth_position().x();
    if (params.n_axial == 0) throw ConfigError("cone needs at least one axial station");
    if (!(inner > 0.0 && inner < outer)) throw ConfigError("cone inner radius must lie between 0 and the L2 distance");
    if (!(params.half_angle_deg > 0.0 && params.half_angle_deg < 90.0))
        throw ConfigError("cone half-angle must lie in (0, 90) degrees");
    if (params.n_radial > 0 && params.n_azimuth == 0) throw ConfigError("cone rings need azimuthal points");

    const double tan_half = std::tan(params.half_angle_deg * std::numbers::pi / 180.0);
    std::vector<Vec3> points;
    for (std::size_t a = 0; a < params.n_axial; ++a) {
        const double axial = params.n_axial == 1
                                 ? 0.5 * (inner + outer)
                                 : inner + (outer - inner) * static_cast<double>(a) / static_cast<double>(params.n_axial - 1);
        const double x = system.earth_position().x() + axial;
        points.emplace_back(x, 0.0, 0.0);
        for (std::size_t ring = 1; ring <= params.n_radial; ++ring) {
            const double radius = axial * tan_half * static_cast<double>(ring) / static_cast<double>(params.n_radial);
            for (std::size_t k = 0; k < params.n_azimuth; ++k) {
                const double psi = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(params.n_azimuth);
                points.emplace_back(x, radius * std::cos(psi), radius * std::sin(psi));
            }
        }
    }
    return static_set("cone", points, steps);
}

std::vector<Vec3> let_window(const Cr3bpSystem& system, const LetParams& params) {
    const LibrationPoints lp = find_libration_points(system);
    return box_grid(Vec3(lp.l2, 0.0, 0.0), params.spans_km / system.length_unit_km, params.counts);
}

MonthlyPattern MonthlyPattern::all_ones(std::size_t period, std::size_t targets) {
    return {BoolMatrix(period, targets, true)};
}

MonthlyPattern MonthlyPattern::random(std::size_t period, std::size_t targets, double density, std::uint64_t seed) {
    if (!(density >= 0.0 && density <= 1.0)) throw ConfigError("pattern density must lie in [0, 1]");
    if (period == 0) throw ConfigError("pattern period must be positive");
    std::mt19937_64 rng(seed);
    auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    MonthlyPattern p{BoolMatrix(period, targets)};
    for (std::size_t t = 0; t < period; ++t)
        for (std::size_t k = 0; k < targets; ++k) p.mask.set(t, k, uniform() < density);
    for (std::size_t k = 0; k < targets; ++k) {
        bool any = false;
        for (std::size_t t = 0; t < period && !any; ++t) any = p.mask(t, k);
        if (!any) p.mask.set(rng() % period, k, true);
    }
    return p;
}

DemandSet synthesize_let_demand(const std::vector<Vec3>& targets, std::size_t steps, const MonthlyPattern& pattern,
                                std::string label) {
    if (pattern.period() == 0 || steps % pattern.period() != 0)
        throw ConfigError(fmt::format("pattern period {} does not divide the horizon {}", pattern.period(), steps));
    if (pattern.mask.cols() != targets.size())
        throw DimensionMismatch(fmt::format("pattern has {} columns for {} targets", pattern.mask.cols(), targets.size()));
    DemandSet set;
    set.label = std::move(label);
    for (const Vec3& p : targets) set.tracks.push_back({p});
    set.demand = BoolMatrix(steps, targets.size());
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t k = 0; k < targets.size(); ++k) set.demand.set(t, k, pattern.mask(t % pattern.period(), k));
    set.validate();
    return set;
}

// Positions are stored in km with 21 significant digits of an extended-precision product, which
// is enough for the conversion back to LU to reproduce every double exactly.
void save_demand(const DemandSet& set, const std::filesystem::path& path, const Cr3bpSystem& system) {
    set.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write demand file " + path.string());
    const bool dynamic = std::any_of(set.tracks.begin(), set.tracks.end(), [](const auto& tr) { return tr.size() != 1; });
    const long double km = system.length_unit_km;
    out << "cssa-demand 1\n";
    out << "label " << set.label << '\n';
    out << "steps " << set.steps() << '\n';
    out << "targets " << set.targets() << '\n';
    out << "layout " << (dynamic ? "dynamic" : "static") << '\n';
    out << "positions km\n";
    for (std::size_t k = 0; k < set.targets(); ++k) {
        const std::size_t rows = dynamic ? set.steps() : 1;
        for (std::size_t t = 0; t < rows; ++t) {
            const Vec3& p = set.position(k, t);
            out << fmt::format("{:.21g} {:.21g} {:.21g}\n", p.x() * km, p.y() * km, p.z() * km);
        }
    }
    out << "demand\n";
    std::string row(set.targets(), '0');
    for (std::size_t t = 0; t < set.steps(); ++t) {
        for (std::size_t k = 0; k < set.targets(); ++k) row[k] = set.demand(t, k) ? '1' : '0';
        out << row << '\n';
    }
    out << "end\n";
    if (!out) throw IoError("failed writing demand file " + path.string());
}

namespace {

class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path) : in_(path) {
        if (!in_) throw IoError("cannot open demand file " + path.string());
    }

    std::string next(const char* expecting) {
        std::string line;
        if (!std::getline(in_, line)) throw ParseError(std::string("unexpected end of file, expected ") + expecting, line_ + 1);
        ++line_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    }

    // "key value" line; returns value.
    std::string keyed(const std::string& key) {
        const std::string line = next(key.c_str());
        if (line.rfind(key, 0) != 0 || (line.size() > key.size() && line[key.size()] != ' '))
            throw ParseError("expected '" + key + "'", line_, 1);
        return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
    }

    std::size_t count(const std::string& key) {
        const std::string value = keyed(key);
        char* end = nullptr;
        const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
        if (value.empty() || *end != '\0' || value[0] == '-')
            throw ParseError("expected a non-negative integer after '" + key + "'", line_, key.size() + 2);
        return static_cast<std::size_t>(v);
    }

    std::size_t line() const { return line_; }

private:
    std::ifstream in_;
    std::size_t line_ = 0;
};

}  // namespace

DemandSet load_demand(const std::filesystem::path& path, const Cr3bpSystem& system) {
    LineReader reader(path);
    if (reader.next("header") != "cssa-demand 1") throw ParseError("missing 'cssa-demand 1' header", reader.line(), 1);
    DemandSet set;
    set.label = reader.keyed("label");
    const std::size_t steps = reader.count("steps");
    const std::size_t targets = reader.count("targets");
    const std::string layout = reader.keyed("layout");
    if (layout != "static" && layout != "dynamic") throw ParseError("layout must be 'static' or 'dynamic'", reader.line(), 8);
    if (reader.keyed("positions") != "km") throw ParseError("positions must be given in km", reader.line(), 11);

    const long double km = system.length_unit_km;
    const std::size_t rows = layout == "dynamic" ? steps : 1;
    set.tracks.assign(targets, {});
    for (std::size_t k = 0; k < targets; ++k) {
        set.tracks[k].resize(rows);
        for (std::size_t t = 0; t < rows; ++t) {
            const std::string line = reader.next("a position");
            const char* cursor = line.c_str();
            Vec3 p;
            for (int a = 0; a < 3; ++a) {
                char* end = nullptr;
                const long double v = std::strtold(cursor, &end);
                if (end == cursor) throw ParseError("expected three coordinates", reader.line(), static_cast<std::size_t>(cursor - line.c_str()) + 1);
                p[a] = static_cast<double>(v / km);
                cursor = end;
            }
            while (*cursor == ' ') ++cursor;
            if (*cursor != '\0') throw ParseError("trailing characters after coordinates", reader.line(), static_cast<std::size_t>(cursor - line.c_str()) + 1);
            set.tracks[k][t] = p;
        }
    }
    if (reader.next("'demand'") != "demand") throw ParseError("expected 'demand'", reader.line(), 1);
    set.demand = BoolMatrix(steps, targets);
    std::size_t t = 0;
    for (;;) {
        const std::string line = reader.next("a demand row or 'end'");
        if (line == "end") break;
        if (t >= steps) throw DimensionMismatch(fmt::format("more than the declared {} demand rows", steps));
        if (line.size() != targets)
            throw DimensionMismatch(fmt::format("line {}: demand row has {} entries, expected {}", reader.line(), line.size(), targets));
        for (std::size_t k = 0; k < targets; ++k) {
            if (line[k] != '0' && line[k] != '1') throw ParseError("demand entries must be 0 or 1", reader.line(), k + 1);
            set.demand.set(t, k, line[k] == '1');
        }
        ++t;
    }
    if (t != steps) throw DimensionMismatch(fmt::format("{} demand rows, expected {}", t, steps));
    set.validate();
    return set;
}

}  // namespace cssa
