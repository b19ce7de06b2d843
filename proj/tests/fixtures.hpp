#pragma once

#include "cssa/model.hpp"

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace cssa::testing {

inline Instance instance_from_entries(TensorDims dims, const std::vector<VisibilityTensor::Entry>& entries,
                                      std::vector<double> costs, std::size_t p, BoolMatrix demand) {
    Instance inst;
    inst.tensor = VisibilityTensor::from_entries(dims, entries);
    inst.costs = std::move(costs);
    inst.p = p;
    inst.demand = std::move(demand);
    for (std::size_t j = 0; j < dims.n; ++j) {
        SlotInfo s;
        s.orbit = j;
        s.orbit_label = "synthetic";
        s.reference_position = Vec3(1.0 + 0.01 * static_cast<double>(j), 0.0, 0.0);
        inst.slots.push_back(s);
    }
    inst.validate();
    return inst;
}

// n = 2, p = 1, steps = 1, m = 2, q = 2. Slot 1 with direction 0 sees both targets.
inline Instance tiny_instance() {
    return instance_from_entries({2, 2, 1, 2}, {{0, 0, 0, 0}, {1, 0, 0, 1}, {0, 1, 0, 0}, {0, 1, 0, 1}},
                                 {facility_cost(1.0), facility_cost(3.0)}, 1, BoolMatrix(1, 2, true));
}

inline std::filesystem::path source_dir() { return CSSA_SOURCE_DIR; }

inline std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

inline bool highs_available() {
    static const bool ok = std::system(CSSA_PYTHON " -c \"import highspy\" > /dev/null 2>&1") == 0;
    return ok;
}

// Runs the HiGHS helper; returns the exit status.
inline int solve_with_highs(const std::filesystem::path& mps, const std::filesystem::path& solution,
                            const std::string& extra = {}) {
    const std::string cmd = std::string(CSSA_PYTHON) + " " + (source_dir() / "tools" / "solve_mps.py").string() +
                            " " + mps.string() + " --solution " + solution.string() + " " + extra + " > " +
                            solution.string() + ".log 2>&1";
    return std::system(cmd.c_str());
}

}  // namespace cssa::testing
