#pragma once

// Spherical-Earth kinematics for a polar Walker-star constellation.
//
// Frame: Earth-centred inertial, z along the rotation axis, x through
// longitude 0 at t = 0. Orbital planes are fixed in this frame; the Earth
// rotates underneath them with the configured (sidereal) period.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "satnet/constants.hpp"
#include "satnet/error.hpp"

namespace satnet {

struct CartesianPosition {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend CartesianPosition operator-(const CartesianPosition& a, const CartesianPosition& b) {
        return {a.x - b.x, a.y - b.y, a.z - b.z};
    }
    friend bool operator==(const CartesianPosition&, const CartesianPosition&) = default;
};

inline double dot(const CartesianPosition& a, const CartesianPosition& b) {
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline double norm(const CartesianPosition& a) { return std::sqrt(dot(a, a)); }

struct EarthModel {
    double radius_km = constants::earth_radius_km;
    double rotation_period_s = constants::sidereal_day_s;
    double mu_km3_s2 = constants::earth_mu_km3_s2;

    void validate() const {
        if (!(radius_km > 0.0) || !(rotation_period_s > 0.0) || !(mu_km3_s2 > 0.0))
            throw ConfigError("earth model parameters must be strictly positive");
    }
};

// Latitude/longitude in degrees, altitude in km above the sphere.
struct GeodeticCoordinate {
    double latitude_deg = 0.0;
    double longitude_deg = 0.0;
    double altitude_km = 0.0;

    // Wraps longitude into [-180, 180). Latitude is not wrapped; out of range throws.
    [[nodiscard]] GeodeticCoordinate normalized() const {
        if (!(latitude_deg >= -90.0 && latitude_deg <= 90.0))
            throw ConfigError("latitude out of [-90, 90]: " + std::to_string(latitude_deg));
        if (!(altitude_km >= 0.0))
            throw ConfigError("altitude above surface must be >= 0");
        double lon = std::fmod(longitude_deg + 180.0, 360.0);
        if (lon < 0.0) lon += 360.0;
        return {latitude_deg, lon - 180.0, altitude_km};
    }
};

struct ConstellationConfig {
    int num_rings = 1;
    int sats_per_ring = 1;
    double altitude_km = 500.0;
    double ring_node_offset_deg = 0.0;
    double inter_ring_phase_deg = 0.0;

    [[nodiscard]] int total() const { return num_rings * sats_per_ring; }

    void validate() const {
        if (num_rings < 1 || sats_per_ring < 1)
            throw ConfigError("constellation needs N_R >= 1 and N_S >= 1");
        if (!(altitude_km > 0.0)) throw ConfigError("constellation altitude must be > 0");
    }
};

inline double orbital_radius(const ConstellationConfig& c, const EarthModel& e) {
    return e.radius_km + c.altitude_km;
}

// Mean motion of a circular orbit, rad/s.
inline double angular_rate(double altitude_km, const EarthModel& e) {
    const double a = e.radius_km + altitude_km;
    return std::sqrt(e.mu_km3_s2 / (a * a * a));
}

inline double orbital_period(double altitude_km, const EarthModel& e) {
    return constants::two_pi / angular_rate(altitude_km, e);
}

inline double ascending_node_rad(const ConstellationConfig& c, int ring) {
    return (ring * 180.0 / c.num_rings + c.ring_node_offset_deg) * constants::deg;
}

inline double initial_phase_rad(const ConstellationConfig& c, int ring, int sat) {
    return (sat * 360.0 / c.sats_per_ring + ring * c.inter_ring_phase_deg) * constants::deg;
}

inline CartesianPosition satellite_position(const ConstellationConfig& config, const EarthModel& earth,
                                            int ring_index, int sat_index, double t) {
    config.validate();
    if (ring_index < 0 || ring_index >= config.num_rings)
        throw ConfigError("ring index " + std::to_string(ring_index) + " out of bounds");
    if (sat_index < 0 || sat_index >= config.sats_per_ring)
        throw ConfigError("satellite index " + std::to_string(sat_index) + " out of bounds");
    const double radius = orbital_radius(config, earth);
    const double node = ascending_node_rad(config, ring_index);
    const double u = initial_phase_rad(config, ring_index, sat_index) +
                     angular_rate(config.altitude_km, earth) * t;
    // Inclination 90 deg: in-plane basis is the node direction and the pole.
    return {radius * std::cos(u) * std::cos(node), radius * std::cos(u) * std::sin(node),
            radius * std::sin(u)};
}

inline CartesianPosition ground_station_position(const GeodeticCoordinate& station, const EarthModel& earth,
                                                 double t) {
    const double lat = station.latitude_deg * constants::deg;
    const double lon = station.longitude_deg * constants::deg + constants::two_pi * t / earth.rotation_period_s;
    const double r = earth.radius_km + station.altitude_km;
    return {r * std::cos(lat) * std::cos(lon), r * std::cos(lat) * std::sin(lon), r * std::sin(lat)};
}

inline double slant_range(const CartesianPosition& sat, const CartesianPosition& gs) {
    return norm(sat - gs);
}

// Haversine distance on the sphere.
inline double great_circle_distance(const GeodeticCoordinate& a, const GeodeticCoordinate& b,
                                    const EarthModel& earth) {
    const double lat1 = a.latitude_deg * constants::deg;
    const double lat2 = b.latitude_deg * constants::deg;
    const double dlat = lat2 - lat1;
    const double dlon = (b.longitude_deg - a.longitude_deg) * constants::deg;
    const double s = std::sin(dlat / 2.0);
    const double t = std::sin(dlon / 2.0);
    const double hav = std::min(1.0, s * s + std::cos(lat1) * std::cos(lat2) * t * t);
    return 2.0 * earth.radius_km * std::asin(std::sqrt(hav));
}

// Slant range from a ground station to a satellite at altitude h whose
// sub-satellite point lies a ground distance s away.
inline double slant_range_at_ground_offset(double ground_offset_km, double altitude_km,
                                           const EarthModel& earth) {
    const double re = earth.radius_km;
    const double rs = re + altitude_km;
    const double theta = ground_offset_km / re;
    return std::sqrt(std::max(0.0, re * re + rs * rs - 2.0 * re * rs * std::cos(theta)));
}

// Longest ground separation at which one satellite at altitude h can be
// above the horizon of both stations.
inline double dual_visibility_chord(double altitude_km, const EarthModel& earth) {
    return 2.0 * earth.radius_km * std::acos(earth.radius_km / (earth.radius_km + altitude_km));
}

// Precomputed constellation for repeated propagation. Satellite k (0-based)
// lives in ring k / N_S at slot k % N_S; external ids are k + 1.
class Constellation {
public:
    Constellation(const ConstellationConfig& config, const EarthModel& earth)
        : config_(config), radius_(0.0), rate_(0.0) {
        config.validate();
        earth.validate();
        radius_ = orbital_radius(config, earth);
        rate_ = angular_rate(config.altitude_km, earth);
        const auto n = static_cast<std::size_t>(config.total());
        node_cos_.reserve(n);
        node_sin_.reserve(n);
        phase_cos_.reserve(n);
        phase_sin_.reserve(n);
        for (int ring = 0; ring < config.num_rings; ++ring) {
            const double node = ascending_node_rad(config, ring);
            for (int slot = 0; slot < config.sats_per_ring; ++slot) {
                const double u0 = initial_phase_rad(config, ring, slot);
                node_cos_.push_back(std::cos(node));
                node_sin_.push_back(std::sin(node));
                phase_cos_.push_back(std::cos(u0));
                phase_sin_.push_back(std::sin(u0));
            }
        }
    }

    [[nodiscard]] const ConstellationConfig& config() const { return config_; }
    [[nodiscard]] std::size_t size() const { return node_cos_.size(); }
    [[nodiscard]] double radius() const { return radius_; }

    // Writes all satellite positions at time t into out (resized to size()).
    void positions(double t, std::vector<CartesianPosition>& out) const {
        const double c = std::cos(rate_ * t);
        const double s = std::sin(rate_ * t);
        out.resize(size());
        for (std::size_t k = 0; k < size(); ++k) {
            const double cu = phase_cos_[k] * c - phase_sin_[k] * s;
            const double su = phase_sin_[k] * c + phase_cos_[k] * s;
            out[k] = {radius_ * cu * node_cos_[k], radius_ * cu * node_sin_[k], radius_ * su};
        }
    }

private:
    ConstellationConfig config_;
    double radius_;
    double rate_;
    std::vector<double> node_cos_, node_sin_, phase_cos_, phase_sin_;
};

}  // namespace satnet
