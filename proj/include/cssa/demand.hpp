#pragma once

#include "cssa/dynamics.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cssa {

// Dense row-major boolean matrix.
class BoolMatrix {
public:
    BoolMatrix() = default;
    BoolMatrix(std::size_t rows, std::size_t cols, bool value = false)
        : rows_(rows), cols_(cols), data_(rows * cols, value ? 1 : 0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool value) { data_[r * cols_ + c] = value ? 1 : 0; }
    std::size_t count() const;

    friend bool operator==(const BoolMatrix&, const BoolMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

struct DemandSet {
    std::string label;
    // One entry per target: a single position for static targets, otherwise one per time step (LU).
    std::vector<std::vector<Vec3>> tracks;
    BoolMatrix demand;  // steps x targets

    std::size_t steps() const { return demand.rows(); }
    std::size_t targets() const { return tracks.size(); }
    const Vec3& position(std::size_t k, std::size_t t) const {
        return tracks[k].size() == 1 ? tracks[k][0] : tracks[k][t];
    }
    bool is_static_demand() const { return demand.count() == steps() * targets(); }
    // Throws DimensionMismatch or ConfigError when an invariant is broken.
    void validate() const;

    friend bool operator==(const DemandSet&, const DemandSet&) = default;
};

struct GridCounts {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nz = 1;

    std::size_t total() const { return nx * ny * nz; }
};

// Equidistant grid over center +/- spans/2 (LU); a single point along an axis sits at the center.
std::vector<Vec3> box_grid(const Vec3& center, const Vec3& spans, GridCounts counts);

struct SoiParams {
    double width_km = 6.43e4;  // full extent in y and z
    GridCounts counts{6, 4, 5};
};

// Grid from L1 to L2 along x, static demand over `steps` time steps.
DemandSet soi_grid(const Cr3bpSystem& system, std::size_t steps, const SoiParams& params = {});

struct ConeParams {
    double inner_radius_km = 2.0 * 42164.0;
    double half_angle_deg = 15.0;
    std::size_t n_axial = 16;
    std::size_t n_radial = 3;
    std::size_t n_azimuth = 6;
};

// Discs normal to the Earth->Moon axis, from inner_radius to the L2 distance. Each disc holds
// its axis point plus n_radial rings of n_azimuth points, the outer ring on the cone surface.
DemandSet cone_of_shame(const Cr3bpSystem& system, std::size_t steps, const ConeParams& params = {});

struct LetParams {
    Vec3 spans_km{2e4, 1e5, 1e5};
    GridCounts counts{3, 15, 15};
};

std::vector<Vec3> let_window(const Cr3bpSystem& system, const LetParams& params = {});

// Activation mask over one synodic month (period rows x targets columns).
struct MonthlyPattern {
    BoolMatrix mask;

    std::size_t period() const { return mask.rows(); }
    static MonthlyPattern all_ones(std::size_t period, std::size_t targets);
    // Bernoulli(density) entries; a target left with no activation gets one at a random row.
    static MonthlyPattern random(std::size_t period, std::size_t targets, double density, std::uint64_t seed);
};

DemandSet synthesize_let_demand(const std::vector<Vec3>& targets, std::size_t steps, const MonthlyPattern& pattern,
                                std::string label = "let");

// Text format: header, positions in km, then one 0/1 row per time step.
void save_demand(const DemandSet& set, const std::filesystem::path& path, const Cr3bpSystem& system);
DemandSet load_demand(const std::filesystem::path& path, const Cr3bpSystem& system);

}  // namespace cssa
