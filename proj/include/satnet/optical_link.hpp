#pragma once

// Satellite-to-ground optical downlink budget: Gaussian-beam diffraction
// into a circular aperture, times a Beer-Lambert atmosphere that scales
// with sec(zenith).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "satnet/constants.hpp"
#include "satnet/error.hpp"
#include "satnet/geometry.hpp"

namespace satnet {

struct OpticalLinkParams {
    double receiver_radius_m = 0.75;
    double beam_waist_m = 0.025;
    double wavelength_m = 810e-9;
    double zenith_transmittance = 0.5;

    void validate() const {
        if (!(receiver_radius_m > 0.0) || !(beam_waist_m > 0.0) || !(wavelength_m > 0.0))
            throw ConfigError("optical link: radius, waist and wavelength must be > 0");
        if (!(zenith_transmittance > 0.0 && zenith_transmittance <= 1.0))
            throw ConfigError("optical link: zenith transmittance must be in (0, 1]");
    }
};

inline constexpr double infinite_loss_db = std::numeric_limits<double>::infinity();

// -10 log10(eta); zero transmittance maps to +inf.
inline double to_loss_db(double eta) {
    return eta > 0.0 ? -10.0 * std::log10(eta) : infinite_loss_db;
}

inline double from_loss_db(double db) { return std::pow(10.0, -db / 10.0); }

inline double rayleigh_range(const OpticalLinkParams& p) {
    return constants::pi * p.beam_waist_m * p.beam_waist_m / p.wavelength_m;
}

inline double beam_waist(double distance_m, const OpticalLinkParams& p) {
    const double ratio = distance_m / rayleigh_range(p);
    return p.beam_waist_m * std::sqrt(1.0 + ratio * ratio);
}

inline double free_space_transmittance(double distance_m, const OpticalLinkParams& p) {
    const double w = beam_waist(distance_m, p);
    return -std::expm1(-2.0 * p.receiver_radius_m * p.receiver_radius_m / (w * w));
}

// cos of the zenith angle seen from the ground for a satellite at slant
// range L and altitude h, unclamped.
inline double cos_zenith(double slant_km, double altitude_km, const EarthModel& earth) {
    return altitude_km / slant_km -
           (slant_km * slant_km - altitude_km * altitude_km) / (2.0 * earth.radius_km * slant_km);
}

inline double zenith_angle(double slant_km, double altitude_km, const EarthModel& earth) {
    // A few ulps below h are rounding noise from the vector geometry.
    if (slant_km < altitude_km * (1.0 - 1e-12) - 1e-9)
        throw GeometryError("slant range " + std::to_string(slant_km) + " km is shorter than altitude " +
                            std::to_string(altitude_km) + " km");
    if (slant_km <= altitude_km) return 0.0;
    return std::acos(std::clamp(cos_zenith(slant_km, altitude_km, earth), -1.0, 1.0));
}

inline double atmospheric_transmittance_at_zenith_angle(double zenith_rad, const OpticalLinkParams& p) {
    if (std::abs(zenith_rad) >= constants::pi / 2.0) return 0.0;
    return std::pow(p.zenith_transmittance, 1.0 / std::cos(zenith_rad));
}

inline double atmospheric_transmittance(double slant_km, double altitude_km, const OpticalLinkParams& p,
                                        const EarthModel& earth) {
    return atmospheric_transmittance_at_zenith_angle(zenith_angle(slant_km, altitude_km, earth), p);
}

inline double link_transmittance(double slant_km, double altitude_km, const OpticalLinkParams& p,
                                 const EarthModel& earth) {
    const double atm = atmospheric_transmittance(slant_km, altitude_km, p, earth);
    if (atm == 0.0) return 0.0;
    return free_space_transmittance(slant_km * 1000.0, p) * atm;
}

inline double pair_transmittance(double slant1_km, double slant2_km, double altitude_km,
                                 const OpticalLinkParams& p, const EarthModel& earth) {
    return link_transmittance(slant1_km, altitude_km, p, earth) *
           link_transmittance(slant2_km, altitude_km, p, earth);
}

// Two-station geometry with the satellite directly above the midpoint of
// a ground separation d. Both arms have the same slant range.
inline double midpoint_slant_range(double separation_km, double altitude_km, const EarthModel& earth) {
    return slant_range_at_ground_offset(separation_km / 2.0, altitude_km, earth);
}

inline double midpoint_link_transmittance(double separation_km, double altitude_km, const OpticalLinkParams& p,
                                          const EarthModel& earth) {
    return link_transmittance(midpoint_slant_range(separation_km, altitude_km, earth), altitude_km, p, earth);
}

inline double midpoint_pair_transmittance(double separation_km, double altitude_km, const OpticalLinkParams& p,
                                          const EarthModel& earth) {
    const double eta = midpoint_link_transmittance(separation_km, altitude_km, p, earth);
    return eta * eta;
}

// Dual-rail photon through a pure-loss channel: it either arrives intact
// or is replaced by vacuum.
struct ErasureOutcome {
    double delivered = 1.0;
    [[nodiscard]] double erased() const { return 1.0 - delivered; }
};

inline ErasureOutcome erasure_channel_apply(double eta, ErasureOutcome input = {}) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("transmittance must be in [0, 1]");
    if (!(input.delivered >= 0.0 && input.delivered <= 1.0))
        throw DomainError("input presence probability must be in [0, 1]");
    return {eta * input.delivered};
}

// Both photons of a pair survive their independent channels.
inline ErasureOutcome erasure_pair_apply(double eta1, double eta2) {
    return {erasure_channel_apply(eta1).delivered * erasure_channel_apply(eta2).delivered};
}

// Evaluates eta_sg for a fixed altitude with the constant parts hoisted.
class LinkBudget {
public:
    LinkBudget(double altitude_km, const OpticalLinkParams& p, const EarthModel& earth)
        : altitude_km_(altitude_km), params_(p), earth_(earth) {
        p.validate();
        earth.validate();
        const double lr = rayleigh_range(p);
        inv_rayleigh_sq_ = 1.0 / (lr * lr);
        log_zenith_ = std::log(p.zenith_transmittance);
    }

    [[nodiscard]] double altitude_km() const { return altitude_km_; }

    [[nodiscard]] double transmittance(double slant_km) const {
        const double c = std::clamp(slant_km <= altitude_km_ ? 1.0 : cos_zenith(slant_km, altitude_km_, earth_),
                                    -1.0, 1.0);
        if (c <= 0.0) return 0.0;
        const double l_m = slant_km * 1000.0;
        const double w_sq = params_.beam_waist_m * params_.beam_waist_m * (1.0 + l_m * l_m * inv_rayleigh_sq_);
        const double fs = -std::expm1(-2.0 * params_.receiver_radius_m * params_.receiver_radius_m / w_sq);
        return fs * std::exp(log_zenith_ / c);
    }

private:
    double altitude_km_;
    OpticalLinkParams params_;
    EarthModel earth_;
    double inv_rayleigh_sq_ = 0.0;
    double log_zenith_ = 0.0;
};

}  // namespace satnet
