#include "cssa/model.hpp"

#include "cssa/errors.hpp"
#include "cssa/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

namespace cssa {

// ---------------------------------------------------------------- tensor

VisibilityTensor::Builder::Builder(TensorDims dims) : dims_(dims), words_((dims.q + 63) / 64) {
    if (dims.m > 0xFFFF) throw ConfigError("too many pointing directions");
    block_offset_.reserve(dims.n * dims.steps + 1);
}

void VisibilityTensor::Builder::add(std::size_t i, const std::uint64_t* bits) {
    if (i >= dims_.m) throw DimensionMismatch("direction index out of range");
    if (!dir_.empty() && dir_.size() > block_offset_.back() && dir_.back() >= i)
        throw ConfigError("directions must be added in ascending order");
    if (std::none_of(bits, bits + words_, [](std::uint64_t w) { return w != 0; })) return;
    dir_.push_back(static_cast<std::uint16_t>(i));
    bits_.insert(bits_.end(), bits, bits + words_);
}

void VisibilityTensor::Builder::close_block() {
    if (block_offset_.size() > dims_.n * dims_.steps) throw DimensionMismatch("too many tensor blocks");
    block_offset_.push_back(dir_.size());
}

VisibilityTensor VisibilityTensor::Builder::finish() && {
    if (block_offset_.size() != dims_.n * dims_.steps + 1) throw DimensionMismatch("missing tensor blocks");
    VisibilityTensor tensor;
    tensor.dims_ = dims_;
    tensor.words_ = words_;
    tensor.block_offset_ = std::move(block_offset_);
    tensor.dir_ = std::move(dir_);
    tensor.bits_ = std::move(bits_);
    tensor.build_target_index();
    return tensor;
}

VisibilityTensor VisibilityTensor::from_entries(TensorDims dims, std::span<const Entry> entries) {
    std::vector<Entry> sorted(entries.begin(), entries.end());
    for (const Entry& e : sorted)
        if (e.i >= dims.m || e.j >= dims.n || e.t >= dims.steps || e.k >= dims.q)
            throw DimensionMismatch("tensor entry out of range");
    std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.j, a.t, a.i, a.k) < std::tie(b.j, b.t, b.i, b.k);
    });
    Builder builder(dims);
    std::vector<std::uint64_t> bits(builder.words());
    std::size_t pos = 0;
    for (std::size_t j = 0; j < dims.n; ++j) {
        for (std::size_t t = 0; t < dims.steps; ++t) {
            while (pos < sorted.size() && sorted[pos].j == j && sorted[pos].t == t) {
                const std::size_t i = sorted[pos].i;
                std::fill(bits.begin(), bits.end(), 0);
                for (; pos < sorted.size() && sorted[pos].j == j && sorted[pos].t == t && sorted[pos].i == i; ++pos)
                    set_bit(bits.data(), sorted[pos].k);
                builder.add(i, bits.data());
            }
            builder.close_block();
        }
    }
    return std::move(builder).finish();
}

void VisibilityTensor::build_target_index() {
    const std::size_t cells = dims_.steps * dims_.q;
    tk_offset_.assign(cells + 1, 0);
    auto for_each_entry = [&](auto&& visit) {
        for (std::size_t j = 0; j < dims_.n; ++j)
            for (std::size_t t = 0; t < dims_.steps; ++t) {
                const auto dirs = directions(j, t);
                for (std::size_t a = 0; a < dirs.size(); ++a) {
                    const std::uint64_t* bits = block_bits(j, t, a);
                    for (std::size_t w = 0; w < words_; ++w)
                        for (std::uint64_t word = bits[w]; word != 0; word &= word - 1)
                            visit(j, t, dirs[a], w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
                }
            }
    };
    for_each_entry([&](std::size_t, std::size_t t, std::size_t, std::size_t k) { ++tk_offset_[t * dims_.q + k + 1]; });
    for (std::size_t c = 0; c < cells; ++c) tk_offset_[c + 1] += tk_offset_[c];
    observers_.resize(tk_offset_[cells]);
    std::vector<std::size_t> fill(tk_offset_.begin(), tk_offset_.end() - 1);
    for_each_entry([&](std::size_t j, std::size_t t, std::size_t i, std::size_t k) {
        observers_[fill[t * dims_.q + k]++] = {static_cast<std::uint32_t>(j), static_cast<std::uint16_t>(i)};
    });
}

const std::uint64_t* VisibilityTensor::coverage(std::size_t i, std::size_t j, std::size_t t) const {
    const auto dirs = directions(j, t);
    const auto it = std::lower_bound(dirs.begin(), dirs.end(), i);
    if (it == dirs.end() || *it != i) return nullptr;
    return block_bits(j, t, static_cast<std::size_t>(it - dirs.begin()));
}

std::size_t VisibilityTensor::coverage_count(std::size_t i, std::size_t j, std::size_t t) const {
    const std::uint64_t* bits = coverage(i, j, t);
    if (!bits) return 0;
    std::size_t total = 0;
    for (std::size_t w = 0; w < words_; ++w) total += static_cast<std::size_t>(std::popcount(bits[w]));
    return total;
}

bool VisibilityTensor::contains(std::size_t i, std::size_t j, std::size_t t, std::size_t k) const {
    const std::uint64_t* bits = coverage(i, j, t);
    return bits && test_bit(bits, k);
}

double VisibilityTensor::density() const {
    const double total = static_cast<double>(dims_.m) * static_cast<double>(dims_.n) *
                         static_cast<double>(dims_.steps) * static_cast<double>(dims_.q);
    return total > 0.0 ? static_cast<double>(nnz()) / total : 0.0;
}

std::vector<VisibilityTensor::Entry> VisibilityTensor::entries() const {
    std::vector<Entry> out;
    out.reserve(nnz());
    for (std::size_t j = 0; j < dims_.n; ++j)
        for (std::size_t t = 0; t < dims_.steps; ++t) {
            const auto dirs = directions(j, t);
            for (std::size_t a = 0; a < dirs.size(); ++a) {
                const std::uint64_t* bits = block_bits(j, t, a);
                for (std::size_t k = 0; k < dims_.q; ++k)
                    if (test_bit(bits, k)) out.push_back({dirs[a], j, t, k});
            }
        }
    return out;
}

VisibilityTensor build_visibility_tensor(std::span<const SlotEphemeris> ephemeris, const DemandSet& demand,
                                         const ObservationModel& model, const TimeGrid& grid, unsigned threads) {
    demand.validate();
    model.sensor.validate();
    model.optics.validate();
    const TensorDims dims{model.pointing.size(), ephemeris.size(), demand.steps(), demand.targets()};
    if (grid.steps != dims.steps) throw DimensionMismatch("time grid and demand disagree on the number of steps");
    for (const SlotEphemeris& slot : ephemeris)
        if (slot.positions.size() != dims.steps) throw DimensionMismatch("ephemeris length differs from time grid");

    if (dims.m > 32) throw ConfigError("at most 32 pointing directions are supported");
    const bool fov_disabled = model.sensor.fov_deg >= 360.0;
    const double fov_cos = fov_half_angle_cosine(model.sensor.fov_deg);
    const double moon_radius = model.sensor.moon_radius_km / model.system.length_unit_km;
    const Vec3 moon = model.system.moon_position();
    const std::size_t words = (dims.q + 63) / 64;

    struct SlotBlocks {
        std::vector<std::size_t> counts;  // directions per t
        std::vector<std::uint16_t> dirs;
        std::vector<std::uint64_t> bits;
    };
    std::vector<SlotBlocks> per_slot(dims.n);

    parallel_for(dims.n, threads, [&](std::size_t j) {
        SlotBlocks& out = per_slot[j];
        out.counts.assign(dims.steps, 0);
        std::vector<std::uint64_t> block(dims.m * words);
        for (std::size_t t = 0; t < dims.steps; ++t) {
            std::fill(block.begin(), block.end(), 0);
            const Vec3& obs = ephemeris[j].positions[t];
            const Vec3 sun = sun_position(grid.time(t), model.sun);
            for (std::size_t k = 0; k < dims.q; ++k) {
                if (!demand.demand(t, k)) continue;
                const Vec3& tgt = demand.position(k, t);
                const Vec3 d = tgt - obs;
                const double range = d.norm();
                if (range < 1e-12) throw DegenerateGeometry("observer coincides with a target");
                const Vec3 l = d / range;
                // FOV pre-filter: the photometric tests are skipped when no direction sees the target.
                std::uint32_t hits = 0;
                for (std::size_t i = 0; i < dims.m; ++i)
                    if (fov_disabled || model.pointing[i].dot(l) >= fov_cos) hits |= 1u << i;
                if (hits == 0) continue;
                if (moon_occults(obs, tgt, moon, moon_radius)) continue;
                if (!(apparent_magnitude(obs, tgt, sun, model.optics, model.system.length_unit_km) <=
                      model.sensor.m_crit))
                    continue;
                for (std::size_t i = 0; i < dims.m; ++i)
                    if (hits & (1u << i)) set_bit(block.data() + i * words, k);
            }
            for (std::size_t i = 0; i < dims.m; ++i) {
                const std::uint64_t* bits = block.data() + i * words;
                if (std::none_of(bits, bits + words, [](std::uint64_t w) { return w != 0; })) continue;
                out.dirs.push_back(static_cast<std::uint16_t>(i));
                out.bits.insert(out.bits.end(), bits, bits + words);
                ++out.counts[t];
            }
        }
    });
    VisibilityTensor::Builder builder(dims);
    for (std::size_t j = 0; j < dims.n; ++j) {
        const SlotBlocks& blocks = per_slot[j];
        std::size_t a = 0;
        for (std::size_t t = 0; t < dims.steps; ++t) {
            for (std::size_t c = 0; c < blocks.counts[t]; ++c, ++a) builder.add(blocks.dirs[a], &blocks.bits[a * words]);
            builder.close_block();
        }
    }
    return std::move(builder).finish();
}

// ---------------------------------------------------------------- instance

double facility_cost(double stability) {
    if (!(stability >= 1.0)) throw DomainError("stability index must be at least 1");
    return 1.0 - 1.0 / (stability + 10.0);
}

std::vector<double> facility_costs(std::span<const LpoRecord> catalog, std::span<const SlotEphemeris> slots) {
    std::vector<double> costs;
    costs.reserve(slots.size());
    for (const SlotEphemeris& slot : slots) {
        if (slot.orbit >= catalog.size()) throw DimensionMismatch("slot refers to a missing orbit");
        costs.push_back(facility_cost(catalog[slot.orbit].stability));
    }
    return costs;
}

std::vector<SlotInfo> slot_metadata(std::span<const LpoRecord> catalog, std::span<const SlotEphemeris> slots) {
    std::vector<SlotInfo> info;
    info.reserve(slots.size());
    for (const SlotEphemeris& slot : slots) {
        if (slot.orbit >= catalog.size()) throw DimensionMismatch("slot refers to a missing orbit");
        if (slot.positions.empty()) throw DimensionMismatch("empty slot ephemeris");
        const LpoRecord& orbit = catalog[slot.orbit];
        info.push_back({slot.orbit, slot.slot_in_orbit, slot.orbit_slots, orbit.resonance, slot.positions.front(),
                        orbit.label()});
    }
    return info;
}

Vec3 mean_target_position(const DemandSet& demand) {
    if (demand.targets() == 0) throw EmptyDemand("no targets");
    Vec3 sum = Vec3::Zero();
    for (std::size_t t = 0; t < demand.steps(); ++t)
        for (std::size_t k = 0; k < demand.targets(); ++k) sum += demand.position(k, t);
    return sum / static_cast<double>(demand.targets() * demand.steps());
}

void Instance::validate() const {
    const TensorDims& d = dims();
    if (costs.size() != d.n) throw DimensionMismatch("cost vector length differs from slot count");
    if (slots.size() != d.n) throw DimensionMismatch("slot metadata length differs from slot count");
    if (p < 1 || p > d.n) throw ConfigError(fmt::format("p = {} outside [1, {}]", p, d.n));
    for (double f : costs)
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("facility costs must lie in (0, 1)");
    if (demand.rows() != d.steps || demand.cols() != d.q) throw DimensionMismatch("demand matrix shape");
    if (demand.count() == 0) throw EmptyDemand("demand matrix is all zero");
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k = 0; k < d.q; ++k)
            if (!demand(t, k) && !tensor.observers(t, k).empty())
                throw ConfigError(fmt::format("tensor entry at undemanded (t={}, k={})", t, k));
}

// ---------------------------------------------------------------- solutions

BoolMatrix theta_from_schedule(std::span<const Allocation> allocations, const VisibilityTensor& tensor) {
    const TensorDims& d = tensor.dims();
    BoolMatrix theta(d.steps, d.q);
    for (const Allocation& a : allocations) {
        if (a.slot >= d.n || a.t >= d.steps || a.direction >= d.m) continue;
        const std::uint64_t* bits = tensor.coverage(a.direction, a.slot, a.t);
        if (!bits) continue;
        for (std::size_t w = 0; w < tensor.words(); ++w)
            for (std::uint64_t word = bits[w]; word != 0; word &= word - 1)
                theta.set(a.t, w * 64 + static_cast<std::size_t>(std::countr_zero(word)), true);
    }
    return theta;
}

std::vector<Violation> validate_solution(const Solution& solution, const Instance& instance) {
    const TensorDims& d = instance.dims();
    std::vector<Violation> out;
    auto report = [&](ViolationKind kind, std::string message) { out.push_back({kind, std::move(message)}); };

    if (solution.slots.size() != instance.p)
        report(ViolationKind::Cardinality, fmt::format("{} slots chosen, expected {}", solution.slots.size(), instance.p));
    std::vector<bool> chosen(d.n, false);
    for (std::size_t j : solution.slots) {
        if (j >= d.n) {
            report(ViolationKind::SlotRange, fmt::format("slot {} out of range", j));
            continue;
        }
        if (chosen[j]) report(ViolationKind::DuplicateSlot, fmt::format("slot {} chosen twice", j));
        chosen[j] = true;
    }

    std::vector<Allocation> valid;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> used;
    for (const Allocation& a : solution.allocations) {
        if (a.slot >= d.n || a.t >= d.steps || a.direction >= d.m) {
            report(ViolationKind::AllocationRange,
                   fmt::format("allocation (i={}, j={}, t={}) out of range", a.direction, a.slot, a.t));
            continue;
        }
        if (!chosen[a.slot])
            report(ViolationKind::Existence, fmt::format("allocation on unchosen slot {} at t={}", a.slot, a.t));
        if (++used[{a.slot, a.t}] == 2)
            report(ViolationKind::MultipleDirections, fmt::format("slot {} points twice at t={}", a.slot, a.t));
        valid.push_back(a);
    }

    if (solution.theta.rows() != d.steps || solution.theta.cols() != d.q) {
        report(ViolationKind::ThetaShape, "theta shape differs from steps x targets");
        return out;
    }
    const BoolMatrix expected = theta_from_schedule(valid, instance.tensor);
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k = 0; k < d.q; ++k) {
            if (solution.theta(t, k) == expected(t, k)) continue;
            report(ViolationKind::Linking, solution.theta(t, k)
                                               ? fmt::format("theta({}, {}) set without a covering allocation", t, k)
                                               : fmt::format("theta({}, {}) clear although covered", t, k));
        }
    return out;
}

double objective_value(std::size_t covered, std::span<const std::size_t> slots, const Instance& instance) {
    double cost = 0.0;
    for (std::size_t j : slots) cost += instance.costs.at(j);
    return static_cast<double>(covered) - cost / static_cast<double>(instance.dims().steps);
}

double evaluate_objective(const Solution& solution, const Instance& instance) {
    const auto violations = validate_solution(solution, instance);
    if (!violations.empty())
        throw InfeasibleSolution(fmt::format("{} violation(s), first: {}", violations.size(), violations.front().message));
    return objective_value(solution.theta.count(), solution.slots, instance);
}

double coverage_fraction(const BoolMatrix& theta, const BoolMatrix& demand) {
    if (theta.rows() != demand.rows() || theta.cols() != demand.cols()) throw DimensionMismatch("theta/demand shape");
    const std::size_t total = demand.count();
    if (total == 0) throw EmptyDemand("demand matrix is all zero");
    return static_cast<double>(theta.count()) / static_cast<double>(total);
}

Solution make_solution(std::vector<std::size_t> slots, std::vector<Allocation> allocations, const Instance& instance) {
    std::sort(slots.begin(), slots.end());
    std::sort(allocations.begin(), allocations.end());
    Solution s;
    s.theta = theta_from_schedule(allocations, instance.tensor);
    s.slots = std::move(slots);
    s.allocations = std::move(allocations);
    s.objective = objective_value(s.theta.count(), s.slots, instance);
    s.coverage = coverage_fraction(s.theta, instance.demand);
    return s;
}

// ---------------------------------------------------------------- MPS

namespace {

constexpr std::size_t kCodeWidth = 7;

std::string base36(std::size_t value) {
    static constexpr char digits[] = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
    std::string out(kCodeWidth, '0');
    for (std::size_t pos = kCodeWidth; pos-- > 0; value /= 36) out[pos] = digits[value % 36];
    if (value != 0) throw ConfigError("index too large for an 8-character MPS name");
    return out;
}

std::optional<std::size_t> parse_base36(std::string_view code) {
    if (code.size() != kCodeWidth) return std::nullopt;
    std::size_t value = 0;
    for (char c : code) {
        std::size_t digit;
        if (c >= '0' && c <= '9') digit = static_cast<std::size_t>(c - '0');
        else if (c >= 'A' && c <= 'Z') digit = static_cast<std::size_t>(c - 'A') + 10;
        else return std::nullopt;
        value = value * 36 + digit;
    }
    return value;
}

// Shortest-loss rendering that fits the 12-character numeric field.
std::string mps_number(double value) {
    for (int precision = 17; precision > 0; --precision) {
        std::string s = fmt::format("{:.{}g}", value, precision);
        if (s.size() <= 12) return s;
    }
    throw ConfigError("value does not fit an MPS field");
}

// Fixed-format record: fields start at columns 2, 5, 15, 25.
std::string record(std::string_view type, std::string_view name, std::string_view row = {},
                   std::string_view value = {}) {
    std::string line = fmt::format(" {:<2} {:<8}  {:<8}  {}", type, name, row, value);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    return line;
}

std::string row_name(char prefix, std::size_t index) { return prefix + base36(index); }

}  // namespace

std::string allocation_name(const TensorDims& dims, std::size_t i, std::size_t j, std::size_t t) {
    return "X" + base36((j * dims.steps + t) * dims.m + i);
}
std::string slot_name(std::size_t j) { return "Y" + base36(j); }
std::string theta_name(const TensorDims& dims, std::size_t t, std::size_t k) { return "T" + base36(t * dims.q + k); }

std::string_view variant_name(MpsVariant variant) {
    switch (variant) {
        case MpsVariant::Aggregate: return "aggregate";
        case MpsVariant::TimeRobust: return "time_robust";
        case MpsVariant::TargetRobust: return "target_robust";
    }
    return "aggregate";
}

MpsVariant parse_variant(std::string_view name) {
    for (MpsVariant v : {MpsVariant::Aggregate, MpsVariant::TimeRobust, MpsVariant::TargetRobust})
        if (variant_name(v) == name) return v;
    throw ConfigError(fmt::format("unknown MPS variant '{}'", name));
}

void export_mps(const Instance& instance, MpsVariant variant, const std::filesystem::path& path) {
    instance.validate();
    const TensorDims& d = instance.dims();
    const VisibilityTensor& M = instance.tensor;
    const bool aggregate = variant == MpsVariant::Aggregate;
    const bool time_robust = variant == MpsVariant::TimeRobust;

    std::vector<std::string> lines;
    lines.push_back("* cssa observer placement model, variant " + std::string(variant_name(variant)));
    lines.push_back("* Objective sense: MIN. The objective row holds -Z; negate the optimal value to recover Z.");
    lines.push_back(fmt::format("* dims m={} n={} steps={} q={} p={}", d.m, d.n, d.steps, d.q, instance.p));
    lines.push_back("* X<base36((j*steps+t)*m+i)> pointing, Y<base36(j)> slot, T<base36(t*q+k)> coverage");
    lines.push_back("* Rows: S (sum_i X - Y <= 0 per j,t), L (theta - sum M X <= 0 per t,k), R robust floor");
    lines.push_back("NAME          CSSA");

    lines.push_back("ROWS");
    lines.push_back(record("N", "OBJ"));
    lines.push_back(record("E", "CARD"));
    for (std::size_t j = 0; j < d.n; ++j)
        for (std::size_t t = 0; t < d.steps; ++t)
            if (!M.directions(j, t).empty()) lines.push_back(record("L", row_name('S', j * d.steps + t)));
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k = 0; k < d.q; ++k)
            if (!M.observers(t, k).empty()) lines.push_back(record("L", row_name('L', t * d.q + k)));
    if (!aggregate) {
        const std::size_t robust_rows = time_robust ? d.steps : d.q;
        for (std::size_t r = 0; r < robust_rows; ++r) lines.push_back(record("G", row_name('R', r)));
    }

    lines.push_back("COLUMNS");
    lines.push_back("    MARKER                 'MARKER'                 'INTORG'");
    for (std::size_t j = 0; j < d.n; ++j)
        for (std::size_t t = 0; t < d.steps; ++t) {
            const auto dirs = M.directions(j, t);
            for (std::size_t a = 0; a < dirs.size(); ++a) {
                const std::string name = allocation_name(d, dirs[a], j, t);
                lines.push_back(record("", name, row_name('S', j * d.steps + t), "1"));
                const std::uint64_t* bits = M.block_bits(j, t, a);
                for (std::size_t k = 0; k < d.q; ++k)
                    if (test_bit(bits, k)) lines.push_back(record("", name, row_name('L', t * d.q + k), "-1"));
            }
        }
    for (std::size_t j = 0; j < d.n; ++j) {
        const std::string name = slot_name(j);
        lines.push_back(record("", name, "OBJ", mps_number(instance.costs[j] / static_cast<double>(d.steps))));
        lines.push_back(record("", name, "CARD", "1"));
        for (std::size_t t = 0; t < d.steps; ++t)
            if (!M.directions(j, t).empty()) lines.push_back(record("", name, row_name('S', j * d.steps + t), "-1"));
    }
    lines.push_back("    MARKER                 'MARKER'                 'INTEND'");
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k = 0; k < d.q; ++k) {
            if (M.observers(t, k).empty()) continue;
            const std::string name = theta_name(d, t, k);
            if (aggregate) lines.push_back(record("", name, "OBJ", "-1"));
            lines.push_back(record("", name, row_name('L', t * d.q + k), "1"));
            if (!aggregate) lines.push_back(record("", name, row_name('R', time_robust ? t : k), "1"));
        }
    if (!aggregate) {
        const std::string name = time_robust ? "PSI" : "PHI";
        lines.push_back(record("", name, "OBJ", "-1"));
        const std::size_t robust_rows = time_robust ? d.steps : d.q;
        for (std::size_t r = 0; r < robust_rows; ++r) lines.push_back(record("", name, row_name('R', r), "-1"));
    }

    lines.push_back("RHS");
    lines.push_back(record("", "RHS", "CARD", mps_number(static_cast<double>(instance.p))));

    lines.push_back("BOUNDS");
    for (std::size_t j = 0; j < d.n; ++j)
        for (std::size_t t = 0; t < d.steps; ++t)
            for (std::uint16_t i : M.directions(j, t)) lines.push_back(record("BV", "BND", allocation_name(d, i, j, t)));
    for (std::size_t j = 0; j < d.n; ++j) lines.push_back(record("BV", "BND", slot_name(j)));
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k = 0; k < d.q; ++k)
            if (!M.observers(t, k).empty()) lines.push_back(record("UP", "BND", theta_name(d, t, k), "1"));
    if (time_robust) lines.push_back(record("UP", "BND", "PSI", mps_number(static_cast<double>(d.q))));
    if (variant == MpsVariant::TargetRobust)
        lines.push_back(record("UP", "BND", "PHI", mps_number(static_cast<double>(d.steps))));
    lines.push_back("ENDATA");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const std::string& line : lines) out << line << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

void write_solution(const Solution& solution, const Instance& instance, const std::filesystem::path& path) {
    const TensorDims& d = instance.dims();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << fmt::format("# objective {:.17g}\n", solution.objective);
    for (std::size_t j : solution.slots) out << slot_name(j) << " 1\n";
    for (const Allocation& a : solution.allocations) out << allocation_name(d, a.direction, a.slot, a.t) << " 1\n";
    for (std::size_t t = 0; t < solution.theta.rows(); ++t)
        for (std::size_t k = 0; k < solution.theta.cols(); ++k)
            if (solution.theta(t, k)) out << theta_name(d, t, k) << " 1\n";
    if (!out) throw IoError("failed writing " + path.string());
}

Solution import_solution(const std::filesystem::path& path, const Instance& instance) {
    instance.validate();
    const TensorDims& d = instance.dims();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());

    constexpr double kBinaryTol = 1e-6;
    std::vector<std::size_t> slots;
    std::vector<Allocation> allocations;
    std::vector<std::pair<std::size_t, std::size_t>> claimed;  // theta near 1
    std::map<std::string, std::size_t> seen;

    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        std::string name, value_text, extra;
        if (!(fields >> name >> value_text) || (fields >> extra))
            throw ParseError("expected 'name value'", number);
        if (!seen.emplace(name, number).second) throw ParseError("duplicate variable " + name, number);
        char* end = nullptr;
        const double value = std::strtod(value_text.c_str(), &end);
        if (end != value_text.c_str() + value_text.size() || !std::isfinite(value))
            throw ParseError("bad value '" + value_text + "' for " + name, number);

        const std::string_view code = std::string_view(name).substr(1);
        auto binary = [&]() -> bool {
            if (std::abs(value) <= kBinaryTol) return false;
            if (std::abs(value - 1.0) <= kBinaryTol) return true;
            throw ParseError(fmt::format("fractional value {} for binary {}", value_text, name), number);
        };
        if (name == "PSI" || name == "PHI") continue;
        const auto index = parse_base36(code);
        if (name[0] == 'X' && index && *index < d.m * d.n * d.steps) {
            if (binary())
                allocations.push_back({*index / d.m / d.steps, (*index / d.m) % d.steps, *index % d.m});
        } else if (name[0] == 'Y' && index && *index < d.n) {
            if (binary()) slots.push_back(*index);
        } else if (name[0] == 'T' && index && *index < d.steps * d.q) {
            if (value < -kBinaryTol || value > 1.0 + kBinaryTol)
                throw ParseError(fmt::format("coverage {} outside [0, 1]", name), number);
            if (value > 0.5) claimed.emplace_back(*index / d.q, *index % d.q);
        } else {
            throw ParseError("unknown variable " + name, number);
        }
    }
    if (in.bad()) throw IoError("failed reading " + path.string());

    std::sort(slots.begin(), slots.end());
    std::sort(allocations.begin(), allocations.end());
    Solution s;
    s.theta = theta_from_schedule(allocations, instance.tensor);
    for (const auto& [t, k] : claimed)
        if (!s.theta(t, k))
            throw InfeasibleSolution(fmt::format("{} is set without a covering allocation", theta_name(d, t, k)));
    s.slots = std::move(slots);
    s.allocations = std::move(allocations);
    const auto violations = validate_solution(s, instance);
    if (!violations.empty())
        throw InfeasibleSolution(fmt::format("{} violation(s), first: {}", violations.size(), violations.front().message));
    s.objective = objective_value(s.theta.count(), s.slots, instance);
    s.coverage = coverage_fraction(s.theta, instance.demand);
    return s;
}

}  // namespace cssa
