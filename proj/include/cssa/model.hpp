#pragma once

#include "cssa/demand.hpp"
#include "cssa/dynamics.hpp"
#include "cssa/illumination.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cssa {

struct TensorDims {
    std::size_t m = 0;      // pointing directions
    std::size_t n = 0;      // slots
    std::size_t steps = 0;  // time steps
    std::size_t q = 0;      // targets

    friend bool operator==(const TensorDims&, const TensorDims&) = default;
};

// Sparse boolean M(i, j, t, k). Each (j, t) block lists the directions that see at least one
// target, with the covered targets as a bitset of `words()` 64-bit words. A second index maps
// (t, k) to the observing (i, j) pairs.
class VisibilityTensor {
public:
    struct Entry {
        std::size_t i, j, t, k;
        friend auto operator<=>(const Entry&, const Entry&) = default;
    };

    // Appends (j, t) blocks in order j-major, t-minor.
    class Builder {
    public:
        explicit Builder(TensorDims dims);
        std::size_t words() const { return words_; }
        // `bits` holds words() words; empty bitsets are dropped.
        void add(std::size_t i, const std::uint64_t* bits);
        void close_block();
        VisibilityTensor finish() &&;

    private:
        TensorDims dims_;
        std::size_t words_;
        std::vector<std::size_t> block_offset_{0};
        std::vector<std::uint16_t> dir_;
        std::vector<std::uint64_t> bits_;
    };

    VisibilityTensor() = default;
    static VisibilityTensor from_entries(TensorDims dims, std::span<const Entry> entries);

    const TensorDims& dims() const { return dims_; }
    std::size_t words() const { return words_; }

    // Directions with coverage at (j, t), ascending.
    std::span<const std::uint16_t> directions(std::size_t j, std::size_t t) const {
        const std::size_t b = j * dims_.steps + t;
        return {dir_.data() + block_offset_[b], block_offset_[b + 1] - block_offset_[b]};
    }
    // Bitset of the a-th direction listed for (j, t).
    const std::uint64_t* block_bits(std::size_t j, std::size_t t, std::size_t a) const {
        return bits_.data() + (block_offset_[j * dims_.steps + t] + a) * words_;
    }
    // Bitset for (i, j, t) or nullptr when direction i sees nothing.
    const std::uint64_t* coverage(std::size_t i, std::size_t j, std::size_t t) const;
    std::size_t coverage_count(std::size_t i, std::size_t j, std::size_t t) const;

    struct Observer {
        std::uint32_t slot;
        std::uint16_t direction;
    };
    std::span<const Observer> observers(std::size_t t, std::size_t k) const {
        const std::size_t b = t * dims_.q + k;
        return {observers_.data() + tk_offset_[b], tk_offset_[b + 1] - tk_offset_[b]};
    }

    bool contains(std::size_t i, std::size_t j, std::size_t t, std::size_t k) const;
    std::size_t nnz() const { return observers_.size(); }
    double density() const;
    std::vector<Entry> entries() const;

    friend bool operator==(const VisibilityTensor& a, const VisibilityTensor& b) {
        return a.dims_ == b.dims_ && a.block_offset_ == b.block_offset_ && a.dir_ == b.dir_ && a.bits_ == b.bits_;
    }

private:
    TensorDims dims_;
    std::size_t words_ = 0;
    std::vector<std::size_t> block_offset_;
    std::vector<std::uint16_t> dir_;
    std::vector<std::uint64_t> bits_;
    std::vector<std::size_t> tk_offset_;
    std::vector<Observer> observers_;

    void build_target_index();
};

inline bool test_bit(const std::uint64_t* bits, std::size_t k) { return (bits[k >> 6] >> (k & 63)) & 1u; }
inline void set_bit(std::uint64_t* bits, std::size_t k) { bits[k >> 6] |= std::uint64_t{1} << (k & 63); }

struct ObservationModel {
    PointingSet pointing;
    SensorParams sensor;
    TargetOptics optics;
    SunModel sun;
    Cr3bpSystem system;
};

VisibilityTensor build_visibility_tensor(std::span<const SlotEphemeris> ephemeris, const DemandSet& demand,
                                         const ObservationModel& model, const TimeGrid& grid, unsigned threads = 1);

struct SlotInfo {
    std::size_t orbit = 0;
    std::size_t index = 0;  // position along the orbit
    std::size_t count = 1;  // slots on the orbit
    Resonance resonance{};
    Vec3 reference_position = Vec3::Zero();
    std::string orbit_label;

    double phase() const { return static_cast<double>(index) / static_cast<double>(count); }
};

struct Instance {
    VisibilityTensor tensor;
    std::vector<double> costs;  // f_j
    std::size_t p = 1;
    BoolMatrix demand;           // steps x q
    std::vector<SlotInfo> slots; // neighborhood metadata, one per slot
    Vec3 reference_target = Vec3::Zero();
    Vec3 reference_sun = Vec3::UnitX();

    const TensorDims& dims() const { return tensor.dims(); }
    // Throws ConfigError or DimensionMismatch.
    void validate() const;
};

std::vector<double> facility_costs(std::span<const LpoRecord> catalog, std::span<const SlotEphemeris> slots);
double facility_cost(double stability);

std::vector<SlotInfo> slot_metadata(std::span<const LpoRecord> catalog, std::span<const SlotEphemeris> slots);
// Mean over all targets and time steps.
Vec3 mean_target_position(const DemandSet& demand);

struct Allocation {
    std::size_t slot;
    std::size_t t;
    std::size_t direction;
    friend auto operator<=>(const Allocation&, const Allocation&) = default;
};

struct Solution {
    std::vector<std::size_t> slots;      // Y, ascending
    std::vector<Allocation> allocations; // X, sorted
    BoolMatrix theta;                    // steps x q
    double objective = 0.0;              // Z
    double coverage = 0.0;               // Theta
};

BoolMatrix theta_from_schedule(std::span<const Allocation> allocations, const VisibilityTensor& tensor);

enum class ViolationKind {
    Cardinality,
    SlotRange,
    DuplicateSlot,
    Existence,
    MultipleDirections,
    AllocationRange,
    ThetaShape,
    Linking,
};

struct Violation {
    ViolationKind kind;
    std::string message;
};

std::vector<Violation> validate_solution(const Solution& solution, const Instance& instance);

// Z = sum(theta) - sum_{j in Y} f_j / steps. Throws InfeasibleSolution.
double evaluate_objective(const Solution& solution, const Instance& instance);
double objective_value(std::size_t covered, std::span<const std::size_t> slots, const Instance& instance);

double coverage_fraction(const BoolMatrix& theta, const BoolMatrix& demand);

// Fills theta, objective and coverage from slots and allocations (which are sorted in place).
Solution make_solution(std::vector<std::size_t> slots, std::vector<Allocation> allocations, const Instance& instance);

enum class MpsVariant { Aggregate, TimeRobust, TargetRobust };

std::string_view variant_name(MpsVariant variant);
MpsVariant parse_variant(std::string_view name);

// Fixed-format MPS, objective negated (the file minimizes -Z).
void export_mps(const Instance& instance, MpsVariant variant, const std::filesystem::path& path);

// MPS column names.
std::string allocation_name(const TensorDims& dims, std::size_t i, std::size_t j, std::size_t t);
std::string slot_name(std::size_t j);
std::string theta_name(const TensorDims& dims, std::size_t t, std::size_t k);

// "name value" lines; variables at zero may be omitted. Lines starting with '#' are comments.
void write_solution(const Solution& solution, const Instance& instance, const std::filesystem::path& path);
Solution import_solution(const std::filesystem::path& path, const Instance& instance);

}  // namespace cssa
