#pragma once

#include "cssa/model.hpp"

#include <cstdint>
#include <vector>

namespace cssa {

struct MicroDims {
    std::size_t m = 2;
    std::size_t n = 4;
    std::size_t steps = 2;
    std::size_t q = 4;
    std::size_t p = 2;
};

inline constexpr double kEnumerationLimit = 1e7;

// C(n, p) * ((m + 1)^p)^steps.
double enumeration_size(std::size_t m, std::size_t n, std::size_t steps, std::size_t p);

// Dense random tensor with all-ones demand.
struct MicroInstance {
    MicroDims dims;
    std::vector<std::uint8_t> tensor;  // ((i * n + j) * steps + t) * q + k
    std::vector<double> costs;

    bool at(std::size_t i, std::size_t j, std::size_t t, std::size_t k) const {
        return tensor[((i * dims.n + j) * dims.steps + t) * dims.q + k] != 0;
    }
    // Slots are split over two synthetic orbits of equal resonance so neighborhoods are non-trivial.
    Instance to_instance() const;
};

// Limits m <= 4, n <= 8, steps <= 3, q <= 6 and the enumeration bound; f uniform in (0.9, 0.99).
MicroInstance random_instance(std::uint64_t seed, MicroDims dims, double density);

struct OracleResult {
    double z;
    Solution solution;
};

// Exhaustive search over slot sets and per-step direction choices (idle included).
// Throws TooLarge when enumeration_size exceeds kEnumerationLimit.
OracleResult brute_force_optimum(const Instance& instance);

}  // namespace cssa
