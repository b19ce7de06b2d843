#include "cssa/illumination.hpp"

#include "cssa/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cssa {

namespace {

constexpr double kMinSeparation = 1e-12;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

Vec3 unit_between(const Vec3& from, const Vec3& to) {
    const Vec3 d = to - from;
    const double n = d.norm();
    if (n < kMinSeparation) throw DegenerateGeometry("coincident points");
    return d / n;
}

}  // namespace

SunModel SunModel::standard(const Cr3bpSystem& system, double theta0) {
    return {theta0, 2.0 * std::numbers::pi / system.synodic_period, kSunDistanceKm / system.length_unit_km};
}

Vec3 sun_position(double t, const SunModel& model) {
    const double theta = model.theta0 - model.rate * t;
    return {model.distance * std::cos(theta), model.distance * std::sin(theta), 0.0};
}

void TargetOptics::validate() const {
    if (!(diameter_km > 0.0)) throw ConfigError("target diameter must be positive");
    if (!(spec_reflectance >= 0.0 && spec_reflectance <= 1.0) || !(diff_reflectance >= 0.0 && diff_reflectance <= 1.0))
        throw ConfigError("reflectances must lie in [0, 1]");
    if (!std::isfinite(m_sun)) throw ConfigError("solar magnitude must be finite");
}

void SensorParams::validate() const {
    if (!(fov_deg > 0.0 && fov_deg <= 360.0)) throw ConfigError("field of view must lie in (0, 360] degrees");
    if (std::isnan(m_crit)) throw ConfigError("m_crit must be a number");
    if (!(moon_radius_km > 0.0)) throw ConfigError("Moon radius must be positive");
}

PointingSet pointing_directions() {
    PointingSet set;
    auto add = [&](Vec3 v) {
        v.normalize();
        const double az = std::atan2(v.y(), v.x()) * 180.0 / std::numbers::pi;
        const double el = std::asin(std::clamp(v.z(), -1.0, 1.0)) * 180.0 / std::numbers::pi;
        set.directions.push_back({v, az, el});
    };
    for (int axis = 0; axis < 3; ++axis)
        for (double sign : {1.0, -1.0}) add(sign * Vec3::Unit(axis));
    for (double sx : {1.0, -1.0})
        for (double sy : {1.0, -1.0})
            for (double sz : {1.0, -1.0}) add(Vec3(sx, sy, sz));
    return set;
}

double diffuse_phase_function(double phi) {
    if (!(phi >= 0.0 && phi <= std::numbers::pi)) throw DomainError("phase angle outside [0, pi]");
    const double supplement = std::numbers::pi - phi;  // sin(pi - phi) is exactly zero at phi = pi
    return 2.0 / (3.0 * std::numbers::pi) * (std::sin(supplement) + supplement * std::cos(phi));
}

double solar_phase_angle(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& r_sun) {
    const Vec3 l_obs = unit_between(r_obs, r_tgt);
    const Vec3 l_sun = unit_between(r_sun, r_tgt);
    return std::acos(std::clamp(l_obs.dot(l_sun), -1.0, 1.0));
}

double apparent_magnitude(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& r_sun, const TargetOptics& optics,
                          double km_per_lu) {
    const double phi = solar_phase_angle(r_obs, r_tgt, r_sun);
    const double reflect = optics.spec_reflectance / 4.0 + optics.diff_reflectance * diffuse_phase_function(phi);
    if (!(reflect > 0.0)) return std::numeric_limits<double>::infinity();
    const double range_km = (r_tgt - r_obs).norm() * km_per_lu;
    const double ratio = optics.diameter_km / range_km;
    return optics.m_sun - 2.5 * std::log10(ratio * ratio * reflect);
}

double fov_half_angle_cosine(double fov_deg) { return std::cos(deg2rad(0.5 * fov_deg)); }

bool in_fov(const Vec3& r_obs, const Vec3& direction, const Vec3& r_tgt, double fov_deg) {
    const Vec3 l = unit_between(r_obs, r_tgt);
    if (fov_deg >= 360.0) return true;
    return direction.dot(l) >= fov_half_angle_cosine(fov_deg);
}

bool moon_occults(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& moon_center, double moon_radius) {
    const Vec3 to_moon = moon_center - r_obs;
    const double moon_range = to_moon.norm();
    if (moon_range <= moon_radius) throw ObserverInsideBody("observer inside the Moon");
    const Vec3 to_tgt = r_tgt - r_obs;
    const double tgt_range = to_tgt.norm();
    if (tgt_range < kMinSeparation) throw DegenerateGeometry("coincident observer and target");
    if (tgt_range <= moon_range) return false;
    const double separation = std::acos(std::clamp(to_moon.dot(to_tgt) / (moon_range * tgt_range), -1.0, 1.0));
    return separation < std::asin(moon_radius / moon_range);
}

bool visibility(const Vec3& r_obs, const Vec3& r_tgt, const Vec3& direction, const Vec3& r_sun,
                const SensorParams& sensor, const TargetOptics& optics, const Cr3bpSystem& system) {
    if (moon_occults(r_obs, r_tgt, system.moon_position(), sensor.moon_radius_km / system.length_unit_km))
        return false;
    if (!in_fov(r_obs, direction, r_tgt, sensor.fov_deg)) return false;
    return apparent_magnitude(r_obs, r_tgt, r_sun, optics, system.length_unit_km) <= sensor.m_crit;
}

}  // namespace cssa
