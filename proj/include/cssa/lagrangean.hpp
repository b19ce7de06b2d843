#pragma once

#include "cssa/model.hpp"

#include <atomic>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace cssa {

// lambda: one per (j, t), index j * steps + t. eta: one per (t, k), index t * q + k.
struct Multipliers {
    std::vector<double> lambda;
    std::vector<double> eta;

    // lambda = 0, eta = 1.
    static Multipliers initial(const TensorDims& dims);
    double& lambda_at(const TensorDims& d, std::size_t j, std::size_t t) { return lambda[j * d.steps + t]; }
    double& eta_at(const TensorDims& d, std::size_t t, std::size_t k) { return eta[t * d.q + k]; }
};

struct SubproblemResult {
    double value = 0.0;                  // Z_LR^j with Y_j = 1
    std::vector<Allocation> selection;   // may hold several directions per t
};

SubproblemResult subproblem(std::size_t j, const Multipliers& multipliers, const Instance& instance);

struct RelaxedSolution {
    std::vector<std::size_t> slots;      // chosen slots, ascending
    std::vector<Allocation> allocations; // union of the chosen subproblem selections, sorted
    BoolMatrix theta;                    // 1 where eta < 1 on cells that have an observer
    double value = 0.0;                  // Z_LR
};

RelaxedSolution solve_relaxed(const Multipliers& multipliers, const Instance& instance, unsigned threads = 1);

enum class Strategy { Greedy, FullFactorial, FullFactorialGreedy };

std::string_view strategy_name(Strategy strategy);
Strategy parse_strategy(std::string_view name);

inline constexpr std::size_t kDefaultPermutationCap = 8;

struct StepAssignment {
    std::size_t slot;
    std::size_t direction;
    friend bool operator==(const StepAssignment&, const StepAssignment&) = default;
};

// Allocates every slot in `pending` at step t. `uncovered` is the bitset of still-unobserved
// demanded targets and is updated in place. Slots with no positive gain get the direction with the
// largest total coverage, or direction 0 when they see nothing.
std::vector<StepAssignment> greedy_allocation(const VisibilityTensor& tensor, std::size_t t,
                                              std::span<const std::size_t> pending,
                                              std::vector<std::uint64_t>& uncovered);

// Tries every ordering of `pending`; throws PermutationCap when pending.size() > cap.
std::vector<StepAssignment> full_factorial_allocation(const VisibilityTensor& tensor, std::size_t t,
                                                      std::span<const std::size_t> pending,
                                                      std::vector<std::uint64_t>& uncovered,
                                                      std::size_t cap = kDefaultPermutationCap);

struct AllocationOptions {
    Strategy strategy = Strategy::FullFactorialGreedy;
    std::size_t permutation_cap = kDefaultPermutationCap;
    unsigned threads = 1;
};

// Keeps relaxed choices of active slots that pick exactly one direction at a step and reallocates
// the rest with the strategy. Returns a feasible solution for Y = active.
Solution heuristic_feasible_allocation(std::span<const Allocation> relaxed, std::span<const std::size_t> active,
                                       const Instance& instance, const AllocationOptions& options);

struct NeighborhoodIndex {
    std::vector<std::vector<std::size_t>> intra;  // same orbit, nearest phase first
    std::vector<std::vector<std::size_t>> inter;  // one slot per other orbit of equal resonance
};

NeighborhoodIndex build_neighborhoods(const Instance& instance, std::size_t c_alpha);

// Memoized pure-strategy allocation keyed on the sorted slot set.
class AllocationCache {
public:
    AllocationCache(const Instance& instance, AllocationOptions options, bool enabled = true)
        : instance_(instance), options_(options), enabled_(enabled) {}

    Solution evaluate(std::vector<std::size_t> slots);
    std::size_t evaluations() const { return evaluations_; }
    std::size_t hits() const { return hits_; }

private:
    const Instance& instance_;
    AllocationOptions options_;
    bool enabled_;
    std::mutex mutex_;
    std::map<std::vector<std::size_t>, Solution> memo_;
    std::atomic<std::size_t> evaluations_{0};
    std::atomic<std::size_t> hits_{0};
};

// Swaps each active slot for each of its neighbors; keeps the best strict improvement.
Solution neighborhood_swap(const Solution& best, std::span<const std::vector<std::size_t>> neighbors,
                           AllocationCache& cache);

inline constexpr double kStepEpsilon = 1e-12;

// Projected subgradient step; returns the step size s.
double update_multipliers(Multipliers& multipliers, const RelaxedSolution& relaxed, const Instance& instance,
                          double z_upper, double z_lower, double step_scale);

struct LmConfig {
    std::size_t max_iterations = 30;
    double gap_tolerance = 0.01;
    std::size_t max_stagnant = 10;
    std::size_t stagnant_to_reduce_step = 5;
    std::size_t stagnant_to_inter_swap = 4;
    std::size_t c_alpha = 4;
    double initial_step_scale = 2.0;
    double step_reduction = 0.5;
    Strategy strategy = Strategy::FullFactorialGreedy;
    std::size_t permutation_cap = kDefaultPermutationCap;
    double time_limit_s = std::numeric_limits<double>::infinity();
    unsigned threads = 1;
    bool memoize = true;

    void validate() const;
};

struct IterationRecord {
    std::size_t iteration;  // 1-based
    double z_relaxed;       // Z_LR of this iteration
    double z_heuristic;     // heuristic value of this iteration before swaps
    double best_upper;      // Z_LR*
    double best_lower;      // Z_LH*
    double step_scale;
};

enum class StopReason { Gap, MaxIterations, Stagnation, TimeLimit };
std::string_view stop_reason_name(StopReason reason);

struct LmResult {
    Solution best;
    double best_upper = std::numeric_limits<double>::infinity();
    std::vector<IterationRecord> history;
    StopReason reason = StopReason::MaxIterations;
    std::size_t cache_evaluations = 0;
    std::size_t cache_hits = 0;
};

LmResult run_lagrangean(const Instance& instance, const LmConfig& config = {});

}  // namespace cssa
