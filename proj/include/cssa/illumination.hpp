#pragma once

#include "cssa/dynamics.hpp"

#include <vector>

namespace cssa {

// Sun on a circle in the x-y plane of the rotating frame, moving clockwise once per synodic month.
struct SunModel {
    double theta0 = 0.0;   // rad
    double rate = 0.0;     // rad/TU
    double distance = 0.0; // LU

    static SunModel standard(const Cr3bpSystem& system, double theta0 = 0.0);
};

inline constexpr double kSunDistanceKm = 1.496e8;
inline constexpr double kMoonRadiusKm = 1737.4;

Vec3 sun_position(double t, const SunModel& model);

struct TargetOptics {
    double diameter_km = 1e-3;
    double spec_reflectance = 0.0;
    double diff_reflectance = 0.2;
    double m_sun = -26.74;

    void validate() const;
};

struct SensorParams {
    double fov_deg = 60.0;  // full cone angle; 360 disables the field-of-view test
    double m_crit = 18.0;
    double moon_radius_km = kMoonRadiusKm;

    void validate() const;
};

struct Direction {
    Vec3 vector;
    double azimuth_deg;
    double elevation_deg;
};

struct PointingSet {
    std::vector<Direction> directions;

    std::size_t size() const { return directions.size(); }
    const Vec3& operator[](std::size_t i) const { return directions[i].vector; }
};

// +x, -x, +y, -y, +z, -z, then (sx, sy, sz)/sqrt(3) with signs enumerated +,- per axis, x slowest.
PointingSet pointing_directions();

double diffuse_phase_function(double phi);

// Angle between observer->target and Sun->target; 0 when the observer sees the fully lit face.
double solar_phase_angle(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& r_sun);

// Positions in LU; km_per_lu converts the range to the unit of the target diameter.
// Returns +infinity when the target reflects no light toward the observer.
double apparent_magnitude(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& r_sun, const TargetOptics& optics,
                          double km_per_lu);

// cos of the half cone angle; in_fov compares direction . unit(r_tgt - r_obs) against it.
double fov_half_angle_cosine(double fov_deg);

bool in_fov(const Vec3& r_obs, const Vec3& direction, const Vec3& r_tgt, double fov_deg);

// moon_radius in LU.
bool moon_occults(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& moon_center, double moon_radius);

bool visibility(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& direction, const Vec3& r_sun,
                const SensorParams& sensor, const TargetOptics& optics, const Cr3bpSystem& system);

}  // namespace cssa
