#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>

// Circular-orbit constellation geometry: satellite and ground-station
// positions in an Earth-centered inertial frame aligned with the
// Earth-fixed frame at t=0. Spherical Earth, no perturbations.

namespace leosim {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kMuEarth = 398600.4418;          // km^3/s^2
constexpr double kEarthRotationRad = 7.2921159e-5; // rad/s
constexpr double kLightSpeedKmS = 299792.458;
constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

struct ConstellationConfig {
    int num_planes = 18;          // P
    int sats_per_plane = 36;      // Q
    double altitude_km = 1200.0;
    double inclination_deg = 86.4;
    double raan_spread_deg = 180.0;  // Walker star: planes span a half circle
    double phase_offset_frac = 0.0;  // inter-plane phasing, fraction of a slot

    int total_sats() const { return num_planes * sats_per_plane; }
    double semi_major_axis_km() const { return kEarthRadiusKm + altitude_km; }

    void validate() const {
        if (num_planes < 1) throw std::invalid_argument("num_planes must be >= 1");
        if (sats_per_plane < 3) throw std::invalid_argument("sats_per_plane must be >= 3");
        if (altitude_km <= 0) throw std::invalid_argument("altitude_km must be > 0");
        if (inclination_deg <= 0 || inclination_deg > 90)
            throw std::invalid_argument("inclination_deg must be in (0, 90]");
        if (phase_offset_frac < 0 || phase_offset_frac >= 1)
            throw std::invalid_argument("phase_offset_frac must be in [0, 1)");
    }
};

// Plane-major ordering: (plane, slot) < (plane', slot') iff plane < plane'
// or plane == plane' and slot < slot'.
struct SatelliteId {
    int plane = 0;
    int slot = 0;

    auto operator<=>(const SatelliteId&) const = default;

    int flat_index(const ConstellationConfig& cfg) const {
        return plane * cfg.sats_per_plane + slot;
    }
    static SatelliteId from_flat(int idx, const ConstellationConfig& cfg) {
        return {idx / cfg.sats_per_plane, idx % cfg.sats_per_plane};
    }
};

struct GeoCoordinate {
    double latitude_deg = 0;   // [-90, 90]
    double longitude_deg = 0;  // [-180, 180]
    double altitude_km = 0;    // 0 for ground stations
};

struct PositionKm {
    double x = 0, y = 0, z = 0;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    PositionKm operator-(const PositionKm& o) const { return {x - o.x, y - o.y, z - o.z}; }
    double dot(const PositionKm& o) const { return x * o.x + y * o.y + z * o.z; }
};

inline double orbital_period_s(const ConstellationConfig& cfg) {
    const double a = cfg.semi_major_axis_km();
    return 2.0 * kPi * std::sqrt(a * a * a / kMuEarth);
}

inline double orbital_speed_km_s(const ConstellationConfig& cfg) {
    return std::sqrt(kMuEarth / cfg.semi_major_axis_km());
}

// Position of one satellite at time t. RAAN spaces planes evenly over
// raan_spread_deg; the in-plane argument of latitude advances at the mean
// motion, offset per slot and per plane by the phasing fraction.
inline PositionKm satellite_position(const ConstellationConfig& cfg, SatelliteId sat, double t) {
    const double a = cfg.semi_major_axis_km();
    const double raan = deg2rad(cfg.raan_spread_deg) * sat.plane / cfg.num_planes;
    const double incl = deg2rad(cfg.inclination_deg);
    const double u = 2.0 * kPi * (static_cast<double>(sat.slot) / cfg.sats_per_plane +
                                  cfg.phase_offset_frac * sat.plane / cfg.sats_per_plane) +
                     2.0 * kPi * t / orbital_period_s(cfg);

    // in-plane -> rotate by inclination about x -> rotate by RAAN about z
    const double xo = a * std::cos(u);
    const double yo = a * std::sin(u);
    const double yi = yo * std::cos(incl);
    const double zi = yo * std::sin(incl);
    return {xo * std::cos(raan) - yi * std::sin(raan),
            xo * std::sin(raan) + yi * std::cos(raan),
            zi};
}

// Earth-fixed point rotated into the inertial frame (frames coincide at t=0).
inline PositionKm ground_position(const GeoCoordinate& geo, double t) {
    const double r = kEarthRadiusKm + geo.altitude_km;
    const double lat = deg2rad(geo.latitude_deg);
    const double lon = deg2rad(geo.longitude_deg) + kEarthRotationRad * t;
    return {r * std::cos(lat) * std::cos(lon),
            r * std::cos(lat) * std::sin(lon),
            r * std::sin(lat)};
}

inline double euclidean_distance_km(const PositionKm& a, const PositionKm& b) {
    return (a - b).norm();
}

// Angle of (sat - gs) above the local horizontal plane at gs, in degrees.
inline double elevation_angle_deg(const PositionKm& gs, const PositionKm& sat) {
    const PositionKm d = sat - gs;
    const double gn = gs.norm();
    const double dn = d.norm();
    if (gn <= 0) throw std::invalid_argument("ground position at Earth center");
    if (dn == 0) return 90.0;
    double s = d.dot(gs) / (dn * gn);
    if (s > 1.0) s = 1.0;
    if (s < -1.0) s = -1.0;
    return rad2deg(std::asin(s));
}

} // namespace leosim
