#include "cssa/oracle.hpp"

#include "cssa/errors.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <numbers>
#include <random>

namespace cssa {

namespace {

double unit_open(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53; }

// Advances a sorted p-subset of [0, n) to its lexicographic successor.
bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
    const std::size_t p = c.size();
    for (std::size_t r = p; r-- > 0;) {
        if (c[r] < n - p + r) {
            ++c[r];
            for (std::size_t s = r + 1; s < p; ++s) c[s] = c[s - 1] + 1;
            return true;
        }
    }
    return false;
}

}  // namespace

double enumeration_size(std::size_t m, std::size_t n, std::size_t steps, std::size_t p) {
    if (p > n) return 0.0;
    double subsets = 1.0;
    for (std::size_t r = 0; r < p; ++r) subsets = subsets * static_cast<double>(n - r) / static_cast<double>(r + 1);
    return std::round(subsets) * std::pow(static_cast<double>(m + 1), static_cast<double>(p * steps));
}

MicroInstance random_instance(std::uint64_t seed, MicroDims dims, double density) {
    if (!(density >= 0.0 && density <= 1.0)) throw ConfigError("density must lie in [0, 1]");
    if (dims.m < 1 || dims.m > 4 || dims.n < 1 || dims.n > 8 || dims.steps < 1 || dims.steps > 3 || dims.q < 1 ||
        dims.q > 6)
        throw ConfigError("micro instance dimensions outside m <= 4, n <= 8, steps <= 3, q <= 6");
    if (dims.p < 1 || dims.p > dims.n) throw ConfigError("p must lie in [1, n]");
    if (enumeration_size(dims.m, dims.n, dims.steps, dims.p) > kEnumerationLimit)
        throw TooLarge("micro instance exceeds the enumeration bound");

    std::mt19937_64 rng(seed);
    MicroInstance out;
    out.dims = dims;
    out.tensor.resize(dims.m * dims.n * dims.steps * dims.q);
    for (auto& cell : out.tensor) cell = static_cast<double>(rng() >> 11) * 0x1p-53 < density ? 1 : 0;
    out.costs.resize(dims.n);
    for (double& f : out.costs) f = 0.9 + 0.09 * unit_open(rng);
    return out;
}

Instance MicroInstance::to_instance() const {
    const TensorDims td{dims.m, dims.n, dims.steps, dims.q};
    std::vector<VisibilityTensor::Entry> entries;
    for (std::size_t i = 0; i < dims.m; ++i)
        for (std::size_t j = 0; j < dims.n; ++j)
            for (std::size_t t = 0; t < dims.steps; ++t)
                for (std::size_t k = 0; k < dims.q; ++k)
                    if (at(i, j, t, k)) entries.push_back({i, j, t, k});
    Instance inst;
    inst.tensor = VisibilityTensor::from_entries(td, entries);
    inst.costs = costs;
    inst.p = dims.p;
    inst.demand = BoolMatrix(dims.steps, dims.q, true);
    const std::size_t first = (dims.n + 1) / 2;
    for (std::size_t j = 0; j < dims.n; ++j) {
        SlotInfo s;
        s.orbit = j < first ? 0 : 1;
        s.index = j < first ? j : j - first;
        s.count = j < first ? first : dims.n - first;
        s.resonance = {3, 2};
        s.orbit_label = s.orbit == 0 ? "micro A" : "micro B";
        const double angle = 2.0 * std::numbers::pi * s.phase() + 0.3 * static_cast<double>(s.orbit);
        const double radius = 0.05 + 0.03 * static_cast<double>(s.orbit);
        s.reference_position = Vec3(1.1 + radius * std::cos(angle), radius * std::sin(angle), 0.0);
        inst.slots.push_back(s);
    }
    inst.reference_target = Vec3(1.0, 0.0, 0.0);
    inst.reference_sun = Vec3(400.0, 0.0, 0.0);
    inst.validate();
    return inst;
}

OracleResult brute_force_optimum(const Instance& instance) {
    instance.validate();
    const TensorDims& d = instance.dims();
    const std::size_t p = instance.p;
    if (enumeration_size(d.m, d.n, d.steps, p) > kEnumerationLimit)
        throw TooLarge(fmt::format("enumeration of C({}, {}) * {}^({}*{}) exceeds {}", d.n, p, d.m + 1, p, d.steps,
                                   kEnumerationLimit));
    const VisibilityTensor& M = instance.tensor;
    const std::size_t words = M.words();

    std::vector<std::size_t> combo(p);
    for (std::size_t r = 0; r < p; ++r) combo[r] = r;

    bool have = false;
    double best_z = 0.0;
    std::vector<std::size_t> best_slots;
    std::vector<Allocation> best_alloc;

    std::vector<std::size_t> choice(p);  // direction per chosen slot; m means idle
    std::vector<std::uint64_t> covered(words);
    do {
        std::size_t total = 0;
        std::vector<Allocation> alloc;
        for (std::size_t t = 0; t < d.steps; ++t) {
            std::fill(choice.begin(), choice.end(), 0);
            std::size_t best_t = 0;
            std::vector<std::size_t> best_choice(p, d.m);
            bool first = true;
            for (;;) {
                std::fill(covered.begin(), covered.end(), 0);
                for (std::size_t r = 0; r < p; ++r) {
                    if (choice[r] == d.m) continue;
                    if (const std::uint64_t* bits = M.coverage(choice[r], combo[r], t))
                        for (std::size_t w = 0; w < words; ++w) covered[w] |= bits[w];
                }
                std::size_t count = 0;
                for (std::uint64_t w : covered) count += static_cast<std::size_t>(std::popcount(w));
                if (first || count > best_t) best_t = count, best_choice = choice, first = false;
                // Odometer over (m + 1)^p, last slot fastest.
                bool wrapped = true;
                for (std::size_t r = p; r > 0 && wrapped;) {
                    --r;
                    if (++choice[r] <= d.m) wrapped = false;
                    else choice[r] = 0;
                }
                if (wrapped) break;
            }
            total += best_t;
            for (std::size_t r = 0; r < p; ++r)
                if (best_choice[r] != d.m) alloc.push_back({combo[r], t, best_choice[r]});
        }
        const double z = objective_value(total, combo, instance);
        if (!have || z > best_z) {
            have = true;
            best_z = z;
            best_slots = combo;
            best_alloc = std::move(alloc);
        }
    } while (next_combination(combo, d.n));

    Solution solution = make_solution(best_slots, best_alloc, instance);
    return {solution.objective, std::move(solution)};
}

}  // namespace cssa
