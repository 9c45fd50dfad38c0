#pragma once

// Ground-based repeater chain baseline: N_mem independent parallel chains of
// M elementary links, each link heralded with probability p per round.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>

#include "satnet/constants.hpp"
#include "satnet/error.hpp"
#include "satnet/rng.hpp"

namespace satnet {

struct RepeaterChainConfig {
    double distance_km = 1000.0;
    int links = 1;      // M
    int memories = 1;   // N_mem per half-node
    double attenuation_per_km = constants::fiber_attenuation_per_km;
    double signal_speed_km_s = constants::fiber_light_speed_km_s;

    [[nodiscard]] double link_length_km() const { return distance_km / links; }
    [[nodiscard]] double link_success_probability() const {
        return std::exp(-attenuation_per_km * link_length_km());
    }

    void validate() const {
        if (links < 1) throw ConfigError("repeater: M must be >= 1");
        if (memories < 1) throw ConfigError("repeater: N_mem must be >= 1");
        if (!(distance_km > 0.0)) throw ConfigError("repeater: distance must be > 0");
        if (!(attenuation_per_km >= 0.0)) throw ConfigError("repeater: attenuation must be >= 0");
        if (!(signal_speed_km_s > 0.0)) throw ConfigError("repeater: signal speed must be > 0");
    }
};

struct WaitingTime {
    double value = 0.0;
    std::uint64_t terms = 0;
    double tail_bound = 0.0;  // bound on the discarded part of the series
};

// W = sum_{n>=1} (1 - (1 - q^{n-1})^M)^N_mem with q = 1 - p, i.e. the
// expected number of rounds until some chain has all M links.
//
// The series is cut once the tail is provably below `tolerance`. With
// x = q^n, each remaining term is at most (M x)^N_mem (when M x <= 1),
// giving a geometric tail (M q^n)^N / (1 - q^N); otherwise the looser
// M N q^n / p applies.
inline WaitingTime waiting_time_detailed(int links, int memories, double p, double tolerance = 1e-12,
                                         std::uint64_t max_terms = 400'000'000ULL) {
    if (links < 1 || memories < 1) throw ConfigError("waiting time needs M >= 1 and N_mem >= 1");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("waiting time diverges unless 0 < p <= 1");
    if (p == 1.0) return {1.0, 1, 0.0};

    const double m = links;
    const double nm = memories;
    const double log_q = std::log1p(-p);
    const double tail_ratio = -std::expm1(nm * log_q);  // 1 - q^N

    auto tail_after = [&](double n) {
        const double qn = std::exp(n * log_q);
        if (m * qn <= 1.0) return std::pow(m * qn, nm) / tail_ratio;
        return m * nm * qn / p;
    };

    double sum = 0.0;
    double comp = 0.0;  // Neumaier compensation
    std::uint64_t n = 1;
    double bound = std::numeric_limits<double>::infinity();
    for (; n <= max_terms; ++n) {
        const double x = std::exp(static_cast<double>(n - 1) * log_q);
        const double chain_pending = -std::expm1(m * std::log1p(-x));
        const double term = n == 1 ? 1.0 : std::exp(nm * std::log(chain_pending));
        const double t = sum + term;
        comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
        bound = tail_after(static_cast<double>(n));
        if (bound <= tolerance) break;
    }
    if (bound > tolerance) {
        if (links == 1) {
            // Single-link chains are geometric with success 1 - q^N.
            return {1.0 / tail_ratio, n, 0.0};
        }
        throw DomainError("waiting-time series needs more than the term budget at p = " + std::to_string(p));
    }
    return {sum + comp, n, bound};
}

inline double waiting_time(int links, int memories, double p) {
    return waiting_time_detailed(links, memories, p).value;
}

// Var of the round count, from E[X^2] = sum_n (2n - 1) P(X >= n). Meant for
// error bars on moderate p; the loop stops once terms vanish.
inline double waiting_time_variance(int links, int memories, double p, std::uint64_t max_terms = 100'000'000ULL) {
    const double w = waiting_time(links, memories, p);
    if (p == 1.0) return 0.0;
    const double log_q = std::log1p(-p);
    double second = 0.0;
    for (std::uint64_t n = 1; n <= max_terms; ++n) {
        const double x = std::exp(static_cast<double>(n - 1) * log_q);
        const double tail = n == 1 ? 1.0 : std::pow(-std::expm1(links * std::log1p(-x)), memories);
        const double term = (2.0 * static_cast<double>(n) - 1.0) * tail;
        second += term;
        if (n > 1 && term < 1e-17 * second) break;
    }
    return std::max(0.0, second - w * w);
}

// End-to-end ebits/s: N_mem parallel chains each run at the heralding rate
// c / (2 d/M), divided by the expected number of rounds.
inline double repeater_rate(const RepeaterChainConfig& cfg) {
    cfg.validate();
    const double repetition = cfg.signal_speed_km_s * cfg.memories / (2.0 * cfg.link_length_km());
    return repetition / waiting_time(cfg.links, cfg.memories, cfg.link_success_probability());
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::uint64_t trials = 0;
};

// Direct simulation: every link retries independently each round until it
// succeeds; a chain finishes with its slowest link and the first finished
// chain ends the trial. Trials are drawn in seeded blocks.
inline MonteCarloEstimate waiting_time_monte_carlo(int links, int memories, double p, std::uint64_t trials,
                                                   std::uint64_t seed) {
    if (links < 1 || memories < 1) throw ConfigError("waiting time needs M >= 1 and N_mem >= 1");
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("waiting time diverges unless 0 < p <= 1");
    if (trials < 1) throw ConfigError("Monte Carlo needs at least one trial");
    if (p == 1.0) return {1.0, 0.0, trials};

    constexpr std::uint64_t block = 1024;
    std::geometric_distribution<long long> failures(p);
    double mean = 0.0;
    double m2 = 0.0;
    std::mt19937_64 rng;
    for (std::uint64_t k = 0; k < trials; ++k) {
        if (k % block == 0) rng = substream(seed, k / block);
        long long first_chain = std::numeric_limits<long long>::max();
        for (int c = 0; c < memories; ++c) {
            long long slowest = 0;
            for (int l = 0; l < links; ++l) slowest = std::max(slowest, 1 + failures(rng));
            first_chain = std::min(first_chain, slowest);
        }
        const double x = static_cast<double>(first_chain);
        const double delta = x - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (x - mean);
    }
    const double var = trials > 1 ? m2 / static_cast<double>(trials - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(trials)), trials};
}

}  // namespace satnet
