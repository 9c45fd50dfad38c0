#pragma once

// Fidelity of a distributed polarization Bell pair when each receiver also
// collects thermal background light, post-selected on one photon per site.
//
// Each arm is a beamsplitter of transmittance eta mixing the signal with a
// first-order thermal state (1 - n) |vac><vac| + n/2 (|H><H| + |V><V|).
// Projected onto the single-photon subspace the arm acts on a qubit as
//   |H><H| -> x |H><H| + y |V><V|,   |H><V| -> z |H><V|
// (and symmetrically for V), so everything downstream needs only (x, y, z).

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "satnet/constants.hpp"
#include "satnet/error.hpp"
#include "satnet/geometry.hpp"
#include "satnet/optical_link.hpp"

namespace satnet {

// Above this the first-order thermal expansion is no longer trustworthy.
inline constexpr double background_validity_limit = 0.1;

struct NoiseParams {
    double mean_photons_arm1 = 0.0;
    double mean_photons_arm2 = 0.0;
    double coincidence_window_s = 1e-9;
    double filter_bandwidth_m = 1e-9;
    double field_of_view_sr = 100e-6;
    double receiver_radius_m = 0.5;
    double wavelength_m = 810e-9;
    double spectral_irradiance = 0.0;  // W m^-2 um^-1 sr^-1

    void validate() const {
        if (!(mean_photons_arm1 >= 0.0) || !(mean_photons_arm2 >= 0.0))
            throw ConfigError("noise: mean background photon numbers must be >= 0");
        if (!(coincidence_window_s >= 0.0)) throw ConfigError("noise: coincidence window must be >= 0");
        if (!(filter_bandwidth_m >= 0.0)) throw ConfigError("noise: filter bandwidth must be >= 0");
        if (!(field_of_view_sr >= 0.0)) throw ConfigError("noise: field of view must be >= 0");
        if (!(receiver_radius_m >= 0.0)) throw ConfigError("noise: receiver radius must be >= 0");
        if (!(wavelength_m > 0.0)) throw ConfigError("noise: wavelength must be > 0");
        if (!(spectral_irradiance >= 0.0)) throw ConfigError("noise: spectral irradiance must be >= 0");
    }
};

inline bool in_validity_regime(double mean_photons) { return mean_photons <= background_validity_limit; }

// Weights on the four Bell projectors; not necessarily normalized.
struct BellMixture {
    double phi_plus = 0.0;
    double phi_minus = 0.0;
    double psi_plus = 0.0;
    double psi_minus = 0.0;

    [[nodiscard]] double total() const { return phi_plus + phi_minus + psi_plus + psi_minus; }
    [[nodiscard]] double fidelity() const { return phi_plus / total(); }

    static BellMixture werner(double f0) {
        const double rest = (1.0 - f0) / 3.0;
        return {f0, rest, rest, rest};
    }
};

struct ArmCoefficients {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline ArmCoefficients arm_coefficients(double eta, double mean_photons) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("arm transmittance must be in [0, 1]");
    if (!(mean_photons >= 0.0 && mean_photons <= 1.0))
        throw DomainError("mean background photon number must be in [0, 1]");
    const double n = mean_photons;
    const double a = 1.0 - 2.0 * eta;
    return {
        (1.0 - n) * eta + 0.5 * n * (a * a + eta * eta),
        0.5 * n * (1.0 - eta) * (1.0 - eta),
        (1.0 - n) * eta - n * eta * a,
    };
}

// Unnormalized two-photon coincidence state, Bell-diagonal in, Bell-diagonal out.
inline BellMixture postselected_mixture(const BellMixture& source, const ArmCoefficients& a1,
                                        const ArmCoefficients& a2) {
    const double same = 0.5 * (a1.x * a2.x + a1.y * a2.y);
    const double coh = 0.5 * a1.z * a2.z;
    const double flip = 0.5 * (a1.x * a2.y + a1.y * a2.x);

    const double phi = source.phi_plus + source.phi_minus;
    const double psi = source.psi_plus + source.psi_minus;
    BellMixture out;
    out.phi_plus = source.phi_plus * (same + coh) + source.phi_minus * (same - coh) + psi * flip;
    out.phi_minus = source.phi_plus * (same - coh) + source.phi_minus * (same + coh) + psi * flip;
    out.psi_plus = source.psi_plus * (same + coh) + source.psi_minus * (same - coh) + phi * flip;
    out.psi_minus = source.psi_plus * (same - coh) + source.psi_minus * (same + coh) + phi * flip;
    return out;
}

// Phi+ fidelity of a Phi+ source conditioned on one photon at each site,
// written directly in the arm coefficients.
inline double coincidence_fidelity(const ArmCoefficients& a1, const ArmCoefficients& a2) {
    return 0.5 * (a1.x * a2.x + a1.y * a2.y + a1.z * a2.z) / ((a1.x + a1.y) * (a2.x + a2.y));
}

// Symmetric arms in the high-loss, low-noise limit.
inline double fidelity_ideal(double eta, double mean_photons) {
    if (mean_photons == 0.0) return 1.0;
    if (eta == 0.0) return 0.25;
    const double d = 1.0 + mean_photons / eta;
    return 0.25 * (1.0 + 3.0 / (d * d));
}

inline double fidelity_nonideal(double f0, double eta, double mean_photons) {
    if (!(f0 >= 0.25 && f0 <= 1.0)) throw DomainError("source fidelity must be in [1/4, 1]");
    if (mean_photons == 0.0) return f0;
    if (eta == 0.0) return 0.25;
    const double d = 1.0 + mean_photons / eta;
    return 0.25 * (1.0 + (4.0 * f0 - 1.0) / (d * d));
}

// Smallest local SNR eta/n that keeps fidelity_ideal >= target.
inline double required_snr(double target_fidelity) {
    if (!(target_fidelity > 0.25)) throw DomainError("no finite SNR reaches a fidelity <= 1/4");
    if (target_fidelity >= 1.0) return std::numeric_limits<double>::infinity();
    return 1.0 / (std::sqrt(3.0 / (4.0 * target_fidelity - 1.0)) - 1.0);
}

// First order in (1 - F).
inline double required_snr_approx(double target_fidelity) {
    if (!(target_fidelity > 0.25)) throw DomainError("no finite SNR reaches a fidelity <= 1/4");
    if (target_fidelity >= 1.0) return std::numeric_limits<double>::infinity();
    return 1.5 / (1.0 - target_fidelity);
}

// Background photons per second reaching one receiver. H is per micrometre
// of bandwidth, so the filter width is converted from metres to um.
inline double background_photon_rate(const NoiseParams& p) {
    p.validate();
    const double bandwidth_um = p.filter_bandwidth_m * 1e6;
    const double area = constants::pi * p.receiver_radius_m * p.receiver_radius_m;
    const double photon_energy = constants::planck * constants::speed_of_light / p.wavelength_m;
    return p.spectral_irradiance * p.field_of_view_sr * area * bandwidth_um / photon_energy;
}

inline double mean_background_photons(double rate_per_s, double window_s) { return rate_per_s * window_s; }

struct FidelityPoint {
    double irradiance = 0.0;
    double mean_photons = 0.0;
    double eta_sg = 0.0;
    double fidelity = 0.0;
    bool valid = true;  // mean_photons inside the first-order regime
};

// Satellite above the midpoint of a ground separation d at altitude h;
// fidelity of the symmetric pair as the sky brightness varies.
inline std::vector<FidelityPoint> fidelity_vs_irradiance_curve(double separation_km, double altitude_km,
                                                               std::span<const double> irradiance_grid,
                                                               const OpticalLinkParams& link, NoiseParams noise,
                                                               const EarthModel& earth) {
    const double eta = midpoint_link_transmittance(separation_km, altitude_km, link, earth);
    std::vector<FidelityPoint> out;
    out.reserve(irradiance_grid.size());
    for (double h_irr : irradiance_grid) {
        noise.spectral_irradiance = h_irr;
        const double n = mean_background_photons(background_photon_rate(noise), noise.coincidence_window_s);
        out.push_back({h_irr, n, eta, fidelity_ideal(eta, n), in_validity_regime(n)});
    }
    return out;
}

}  // namespace satnet
