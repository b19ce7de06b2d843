#include "cssa/lagrangean.hpp"

#include "cssa/errors.hpp"
#include "cssa/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

namespace cssa {

namespace {

std::size_t popcount_and(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    std::size_t n = 0;
    for (std::size_t w = 0; w < words; ++w) n += static_cast<std::size_t>(std::popcount(a[w] & b[w]));
    return n;
}

std::size_t popcount(const std::vector<std::uint64_t>& bits) {
    std::size_t n = 0;
    for (std::uint64_t w : bits) n += static_cast<std::size_t>(std::popcount(w));
    return n;
}

void clear_bits(std::vector<std::uint64_t>& target, const std::uint64_t* bits) {
    for (std::size_t w = 0; w < target.size(); ++w) target[w] &= ~bits[w];
}

bool any_bit(const std::vector<std::uint64_t>& bits) {
    return std::any_of(bits.begin(), bits.end(), [](std::uint64_t w) { return w != 0; });
}

// Direction of largest total coverage at (j, t), lowest index on ties; 0 when nothing is seen.
std::size_t fallback_direction(const VisibilityTensor& tensor, std::size_t j, std::size_t t) {
    const auto dirs = tensor.directions(j, t);
    std::size_t best = 0, best_count = 0;
    for (std::uint16_t i : dirs) {
        const std::size_t c = tensor.coverage_count(i, j, t);
        if (c > best_count) best = i, best_count = c;
    }
    return best;
}

struct Pick {
    std::size_t direction = 0;
    std::size_t gain = 0;
};

Pick best_direction(const VisibilityTensor& tensor, std::size_t j, std::size_t t,
                    const std::vector<std::uint64_t>& uncovered) {
    const auto dirs = tensor.directions(j, t);
    Pick pick;
    for (std::size_t a = 0; a < dirs.size(); ++a) {
        const std::size_t gain = popcount_and(tensor.block_bits(j, t, a), uncovered.data(), tensor.words());
        if (gain > pick.gain) pick = {dirs[a], gain};
    }
    return pick;
}

void fill_leftovers(const VisibilityTensor& tensor, std::size_t t, std::span<const std::size_t> pending,
                    std::vector<StepAssignment>& out) {
    for (std::size_t j : pending) {
        const bool done = std::any_of(out.begin(), out.end(), [&](const StepAssignment& a) { return a.slot == j; });
        if (!done) out.push_back({j, fallback_direction(tensor, j, t)});
    }
    std::sort(out.begin(), out.end(), [](const StepAssignment& a, const StepAssignment& b) { return a.slot < b.slot; });
}

}  // namespace

// ---------------------------------------------------------------- relaxation

Multipliers Multipliers::initial(const TensorDims& dims) {
    return {std::vector<double>(dims.n * dims.steps, 0.0), std::vector<double>(dims.steps * dims.q, 1.0)};
}

SubproblemResult subproblem(std::size_t j, const Multipliers& multipliers, const Instance& instance) {
    const TensorDims& d = instance.dims();
    const VisibilityTensor& M = instance.tensor;
    SubproblemResult out;
    double selected = 0.0, lambda_sum = 0.0;
    for (std::size_t t = 0; t < d.steps; ++t) {
        const double lambda = multipliers.lambda[j * d.steps + t];
        lambda_sum += lambda;
        const double* eta = multipliers.eta.data() + t * d.q;
        const auto dirs = M.directions(j, t);
        for (std::size_t a = 0; a < dirs.size(); ++a) {
            const std::uint64_t* bits = M.block_bits(j, t, a);
            double coefficient = 0.0;
            for (std::size_t w = 0; w < M.words(); ++w)
                for (std::uint64_t word = bits[w]; word != 0; word &= word - 1)
                    coefficient += eta[w * 64 + static_cast<std::size_t>(std::countr_zero(word))];
            coefficient -= lambda;
            if (coefficient > 0.0) {
                selected += coefficient;
                out.selection.push_back({j, t, dirs[a]});
            }
        }
    }
    out.value = selected - instance.costs[j] / static_cast<double>(d.steps) + lambda_sum;
    return out;
}

RelaxedSolution solve_relaxed(const Multipliers& multipliers, const Instance& instance, unsigned threads) {
    const TensorDims& d = instance.dims();
    std::vector<SubproblemResult> sub(d.n);
    parallel_for(d.n, threads, [&](std::size_t j) { sub[j] = subproblem(j, multipliers, instance); });

    std::vector<std::size_t> order(d.n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (sub[a].value != sub[b].value) return sub[a].value > sub[b].value;
        if (instance.costs[a] != instance.costs[b]) return instance.costs[a] < instance.costs[b];
        return a < b;
    });

    RelaxedSolution out;
    out.theta = BoolMatrix(d.steps, d.q);
    double value = 0.0;
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k = 0; k < d.q; ++k) {
            const double eta = multipliers.eta[t * d.q + k];
            if (instance.tensor.observers(t, k).empty() || !(1.0 - eta > 0.0)) continue;
            out.theta.set(t, k, true);
            value += 1.0 - eta;
        }
    for (std::size_t s = 0; s < instance.p; ++s) {
        const std::size_t j = order[s];
        value += sub[j].value;
        out.slots.push_back(j);
        out.allocations.insert(out.allocations.end(), sub[j].selection.begin(), sub[j].selection.end());
    }
    std::sort(out.slots.begin(), out.slots.end());
    std::sort(out.allocations.begin(), out.allocations.end());
    out.value = value;
    return out;
}

// ---------------------------------------------------------------- repair

std::string_view strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::Greedy: return "greedy";
        case Strategy::FullFactorial: return "full_factorial";
        case Strategy::FullFactorialGreedy: return "full_factorial_greedy";
    }
    return "greedy";
}

Strategy parse_strategy(std::string_view name) {
    for (Strategy s : {Strategy::Greedy, Strategy::FullFactorial, Strategy::FullFactorialGreedy})
        if (strategy_name(s) == name) return s;
    throw ConfigError(fmt::format("unknown relocation strategy '{}'", name));
}

std::vector<StepAssignment> greedy_allocation(const VisibilityTensor& tensor, std::size_t t,
                                              std::span<const std::size_t> pending,
                                              std::vector<std::uint64_t>& uncovered) {
    std::vector<std::size_t> remaining(pending.begin(), pending.end());
    std::sort(remaining.begin(), remaining.end());
    std::vector<StepAssignment> out;
    while (!remaining.empty() && any_bit(uncovered)) {
        std::size_t best_slot = 0;
        Pick best;
        for (std::size_t r = 0; r < remaining.size(); ++r) {
            const Pick pick = best_direction(tensor, remaining[r], t, uncovered);
            if (pick.gain > best.gain) best = pick, best_slot = r;
        }
        if (best.gain == 0) break;
        const std::size_t j = remaining[best_slot];
        out.push_back({j, best.direction});
        clear_bits(uncovered, tensor.coverage(best.direction, j, t));
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_slot));
    }
    fill_leftovers(tensor, t, pending, out);
    return out;
}

std::vector<StepAssignment> full_factorial_allocation(const VisibilityTensor& tensor, std::size_t t,
                                                      std::span<const std::size_t> pending,
                                                      std::vector<std::uint64_t>& uncovered, std::size_t cap) {
    if (pending.size() > cap)
        throw PermutationCap(fmt::format("{} slots to reallocate exceed the permutation cap {}", pending.size(), cap));
    std::vector<std::size_t> perm(pending.begin(), pending.end());
    std::sort(perm.begin(), perm.end());

    // Union of everything the pending slots can still see bounds the best possible gain.
    std::vector<std::uint64_t> reach(uncovered.size(), 0);
    for (std::size_t j : perm)
        for (std::size_t a = 0; a < tensor.directions(j, t).size(); ++a) {
            const std::uint64_t* bits = tensor.block_bits(j, t, a);
            for (std::size_t w = 0; w < reach.size(); ++w) reach[w] |= bits[w] & uncovered[w];
        }
    const std::size_t reachable = popcount(reach);
    const std::size_t before = popcount(uncovered);

    std::vector<StepAssignment> best, trial;
    std::vector<std::uint64_t> best_left = uncovered, left;
    std::size_t best_delta = 0;
    bool first = true;
    do {
        left = uncovered;
        trial.clear();
        for (std::size_t j : perm) {
            if (!any_bit(left)) break;
            const Pick pick = best_direction(tensor, j, t, left);
            if (pick.gain == 0) continue;
            trial.push_back({j, pick.direction});
            clear_bits(left, tensor.coverage(pick.direction, j, t));
        }
        const std::size_t delta = before - popcount(left);
        if (first || delta > best_delta) {
            best = trial;
            best_left = left;
            best_delta = delta;
            first = false;
        }
        if (best_delta == reachable) break;
    } while (std::next_permutation(perm.begin(), perm.end()));

    uncovered = best_left;
    fill_leftovers(tensor, t, pending, best);
    return best;
}

Solution heuristic_feasible_allocation(std::span<const Allocation> relaxed, std::span<const std::size_t> active,
                                       const Instance& instance, const AllocationOptions& options) {
    const TensorDims& d = instance.dims();
    const VisibilityTensor& M = instance.tensor;
    if (active.empty()) throw ConfigError("no active slots");
    std::vector<std::size_t> slots(active.begin(), active.end());
    std::sort(slots.begin(), slots.end());

    std::vector<std::size_t> position(d.n, d.n);  // slot -> rank within `slots`
    for (std::size_t r = 0; r < slots.size(); ++r) position[slots[r]] = r;

    // Per time step, the relaxed directions of each active slot.
    std::vector<std::vector<Allocation>> by_step(d.steps);
    for (const Allocation& a : relaxed)
        if (a.slot < d.n && a.t < d.steps && position[a.slot] != d.n) by_step[a.t].push_back(a);

    std::vector<std::vector<Allocation>> chosen(d.steps);
    parallel_for(d.steps, options.threads, [&](std::size_t t) {
        std::vector<std::size_t> count(slots.size(), 0), direction(slots.size(), 0);
        for (const Allocation& a : by_step[t]) {
            ++count[position[a.slot]];
            direction[position[a.slot]] = a.direction;
        }
        std::vector<std::uint64_t> uncovered(M.words(), 0);
        for (std::size_t k = 0; k < d.q; ++k)
            if (instance.demand(t, k)) set_bit(uncovered.data(), k);

        std::vector<std::size_t> pending;
        auto& out = chosen[t];
        for (std::size_t r = 0; r < slots.size(); ++r) {
            if (count[r] != 1) {
                pending.push_back(slots[r]);
                continue;
            }
            out.push_back({slots[r], t, direction[r]});
            if (const std::uint64_t* bits = M.coverage(direction[r], slots[r], t)) clear_bits(uncovered, bits);
        }
        if (pending.empty()) return;

        std::vector<StepAssignment> assigned;
        switch (options.strategy) {
            case Strategy::Greedy: assigned = greedy_allocation(M, t, pending, uncovered); break;
            case Strategy::FullFactorial:
                assigned = full_factorial_allocation(M, t, pending, uncovered, options.permutation_cap);
                break;
            case Strategy::FullFactorialGreedy:
                assigned = pending.size() <= options.permutation_cap
                               ? full_factorial_allocation(M, t, pending, uncovered, options.permutation_cap)
                               : greedy_allocation(M, t, pending, uncovered);
                break;
        }
        for (const StepAssignment& a : assigned) out.push_back({a.slot, t, a.direction});
    });

    std::vector<Allocation> allocations;
    for (auto& step : chosen) allocations.insert(allocations.end(), step.begin(), step.end());
    return make_solution(std::move(slots), std::move(allocations), instance);
}

// ---------------------------------------------------------------- neighborhoods

NeighborhoodIndex build_neighborhoods(const Instance& instance, std::size_t c_alpha) {
    if (c_alpha < 2 || c_alpha % 2 != 0) throw ConfigError("c_alpha must be even and at least 2");
    const std::size_t n = instance.dims().n;
    const auto& info = instance.slots;
    if (info.size() != n) throw DimensionMismatch("slot metadata length differs from slot count");

    std::map<std::size_t, std::vector<std::size_t>> by_orbit;
    for (std::size_t j = 0; j < n; ++j) by_orbit[info[j].orbit].push_back(j);

    const Vec3 target = instance.reference_target;
    const Vec3 l_sun = (target - instance.reference_sun).normalized();
    std::vector<double> alignment(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Vec3 d = target - info[j].reference_position;
        const double r = d.norm();
        if (r < 1e-12) throw DegenerateGeometry("slot coincides with the reference target");
        alignment[j] = (d / r).dot(l_sun);
    }

    NeighborhoodIndex index;
    index.intra.resize(n);
    index.inter.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const auto& same = by_orbit[info[j].orbit];
        std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (phase distance in slots, index)
        for (std::size_t xi : same) {
            if (xi == j) continue;
            const std::size_t b = std::max(info[j].count, std::size_t{1});
            const std::size_t diff = (info[xi].index + b - info[j].index % b) % b;
            ranked.emplace_back(std::min(diff, b - diff), xi);
        }
        std::sort(ranked.begin(), ranked.end());
        for (std::size_t r = 0; r < std::min(c_alpha, ranked.size()); ++r) index.intra[j].push_back(ranked[r].second);

        for (const auto& [orbit, members] : by_orbit) {
            if (orbit == info[j].orbit || !(info[members.front()].resonance == info[j].resonance)) continue;
            std::size_t best = members.front();
            double best_diff = std::abs(alignment[best] - alignment[j]);
            for (std::size_t xi : members) {
                const double diff = std::abs(alignment[xi] - alignment[j]);
                if (diff < best_diff) best = xi, best_diff = diff;
            }
            index.inter[j].push_back(best);
        }
    }
    return index;
}

Solution AllocationCache::evaluate(std::vector<std::size_t> slots) {
    std::sort(slots.begin(), slots.end());
    if (enabled_) {
        std::lock_guard lock(mutex_);
        if (auto it = memo_.find(slots); it != memo_.end()) {
            ++hits_;
            return it->second;
        }
    }
    ++evaluations_;
    Solution s = heuristic_feasible_allocation({}, slots, instance_, options_);
    if (enabled_) {
        std::lock_guard lock(mutex_);
        memo_.insert_or_assign(slots, s);
    }
    return s;
}

Solution neighborhood_swap(const Solution& best, std::span<const std::vector<std::size_t>> neighbors,
                           AllocationCache& cache) {
    Solution result = best;
    for (std::size_t j_out : best.slots) {
        if (j_out >= neighbors.size()) continue;
        for (std::size_t j_in : neighbors[j_out]) {
            if (std::find(best.slots.begin(), best.slots.end(), j_in) != best.slots.end()) continue;
            std::vector<std::size_t> trial = best.slots;
            std::replace(trial.begin(), trial.end(), j_out, j_in);
            Solution candidate = cache.evaluate(std::move(trial));
            if (candidate.objective > result.objective) result = std::move(candidate);
        }
    }
    return result;
}

// ---------------------------------------------------------------- subgradient

double update_multipliers(Multipliers& multipliers, const RelaxedSolution& relaxed, const Instance& instance,
                          double z_upper, double z_lower, double step_scale) {
    const TensorDims& d = instance.dims();
    const VisibilityTensor& M = instance.tensor;
    std::vector<int> directions(d.n * d.steps, 0), covering(d.steps * d.q, 0);
    for (const Allocation& a : relaxed.allocations) {
        ++directions[a.slot * d.steps + a.t];
        if (const std::uint64_t* bits = M.coverage(a.direction, a.slot, a.t))
            for (std::size_t w = 0; w < M.words(); ++w)
                for (std::uint64_t word = bits[w]; word != 0; word &= word - 1)
                    ++covering[a.t * d.q + w * 64 + static_cast<std::size_t>(std::countr_zero(word))];
    }

    std::vector<double> g_lambda(directions.size()), g_eta(covering.size(), 0.0);
    double norm2 = 0.0;
    for (std::size_t c = 0; c < directions.size(); ++c) {
        g_lambda[c] = static_cast<double>(directions[c]) - 1.0;
        if (g_lambda[c] > 0.0) norm2 += g_lambda[c] * g_lambda[c];
    }
    for (std::size_t t = 0; t < d.steps; ++t)
        for (std::size_t k = 0; k < d.q; ++k) {
            if (M.observers(t, k).empty()) continue;  // theta is fixed at 0 there, nothing is relaxed
            const std::size_t c = t * d.q + k;
            g_eta[c] = (relaxed.theta(t, k) ? 1.0 : 0.0) - static_cast<double>(covering[c]);
            if (g_eta[c] > 0.0) norm2 += g_eta[c] * g_eta[c];
        }

    const double s = std::max(0.0, step_scale * (z_upper - z_lower) / (norm2 + kStepEpsilon));
    if (s == 0.0) return 0.0;
    for (std::size_t c = 0; c < g_lambda.size(); ++c)
        multipliers.lambda[c] = std::max(0.0, multipliers.lambda[c] + s * g_lambda[c]);
    for (std::size_t c = 0; c < g_eta.size(); ++c) multipliers.eta[c] = std::max(0.0, multipliers.eta[c] + s * g_eta[c]);
    return s;
}

// ---------------------------------------------------------------- driver

void LmConfig::validate() const {
    if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
    if (!(gap_tolerance >= 0.0)) throw ConfigError("gap tolerance must be non-negative");
    if (max_stagnant < 1 || stagnant_to_reduce_step < 1) throw ConfigError("stagnation limits must be positive");
    if (c_alpha < 2 || c_alpha % 2 != 0) throw ConfigError("c_alpha must be even and at least 2");
    if (!(initial_step_scale > 0.0)) throw ConfigError("initial step scale must be positive");
    if (!(step_reduction > 0.0 && step_reduction <= 1.0)) throw ConfigError("step reduction must lie in (0, 1]");
    if (!(time_limit_s >= 0.0)) throw ConfigError("time limit must be non-negative");
    if (permutation_cap < 1) throw ConfigError("permutation cap must be at least 1");
}

std::string_view stop_reason_name(StopReason reason) {
    switch (reason) {
        case StopReason::Gap: return "gap";
        case StopReason::MaxIterations: return "max_iterations";
        case StopReason::Stagnation: return "stagnation";
        case StopReason::TimeLimit: return "time_limit";
    }
    return "max_iterations";
}

LmResult run_lagrangean(const Instance& instance, const LmConfig& config) {
    config.validate();
    if (instance.p > instance.dims().n) throw NoFeasibleSolution("p exceeds the number of slots");
    instance.validate();

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    const AllocationOptions options{config.strategy, config.permutation_cap, config.threads};
    AllocationCache cache(instance, options, config.memoize);
    const NeighborhoodIndex neighbors = build_neighborhoods(instance, config.c_alpha);
    Multipliers multipliers = Multipliers::initial(instance.dims());

    LmResult result;
    bool have_best = false;
    std::size_t stagnant = 0;
    double step_scale = config.initial_step_scale;

    for (std::size_t h = 1;; ++h) {
        const RelaxedSolution relaxed = solve_relaxed(multipliers, instance, config.threads);
        const double upper_tol = 1e-9 * std::max(1.0, std::abs(relaxed.value));
        const bool upper_improved = relaxed.value < result.best_upper - upper_tol;
        result.best_upper = std::min(result.best_upper, relaxed.value);

        Solution candidate = heuristic_feasible_allocation(relaxed.allocations, relaxed.slots, instance, options);
        const double z_heuristic = candidate.objective;
        bool lower_improved = false;
        auto offer = [&](Solution&& s) {
            if (have_best && !(s.objective > result.best.objective)) return;
            result.best = std::move(s);
            have_best = true;
            lower_improved = true;
        };
        offer(std::move(candidate));

        bool time_up = elapsed() >= config.time_limit_s;
        if (!time_up) {
            offer(neighborhood_swap(result.best, neighbors.intra, cache));
            if (stagnant >= config.stagnant_to_inter_swap)
                offer(neighborhood_swap(result.best, neighbors.inter, cache));
        }
        stagnant = (lower_improved || upper_improved) ? 0 : stagnant + 1;
        result.history.push_back({h, relaxed.value, z_heuristic, result.best_upper, result.best.objective, step_scale});

        const double gap =
            (result.best_upper - result.best.objective) / std::max(1.0, std::abs(result.best_upper));
        time_up = time_up || elapsed() >= config.time_limit_s;
        if (gap <= config.gap_tolerance) {
            result.reason = StopReason::Gap;
            break;
        }
        if (time_up) {
            result.reason = StopReason::TimeLimit;
            break;
        }
        if (h >= config.max_iterations) {
            result.reason = StopReason::MaxIterations;
            break;
        }
        if (stagnant >= config.max_stagnant) {
            result.reason = StopReason::Stagnation;
            break;
        }
        if (stagnant > 0 && stagnant % config.stagnant_to_reduce_step == 0) step_scale *= config.step_reduction;
        update_multipliers(multipliers, relaxed, instance, relaxed.value, result.best.objective, step_scale);
    }
    result.cache_evaluations = cache.evaluations();
    result.cache_hits = cache.hits();
    return result;
}

}  // namespace cssa
