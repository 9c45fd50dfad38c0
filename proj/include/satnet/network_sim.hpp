#pragma once

// Discrete-time entanglement distribution over a satellite constellation.
//
// Each step: propagate satellites and stations, evaluate every
// (satellite, station pair) link, give each satellite to at most one pair,
// and accumulate the served pair's transmittance and received pair count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "satnet/constants.hpp"
#include "satnet/error.hpp"
#include "satnet/geometry.hpp"
#include "satnet/optical_link.hpp"
#include "satnet/rng.hpp"

namespace satnet {

struct GroundStation {
    std::string id;
    std::string name;
    GeodeticCoordinate position;
};

struct StationEdge {
    std::size_t a = 0;
    std::size_t b = 0;
    double distance_km = 0.0;
};

class StationGraph {
public:
    std::vector<GroundStation> stations;
    std::vector<StationEdge> edges;

    std::size_t add_station(GroundStation s) {
        s.position = s.position.normalized();
        stations.push_back(std::move(s));
        return stations.size() - 1;
    }

    // Adds an edge whose weight is the great-circle distance.
    void connect(std::size_t a, std::size_t b, const EarthModel& earth = {}) {
        if (a >= stations.size() || b >= stations.size()) throw ConfigError("edge endpoint does not exist");
        edges.push_back({a, b, great_circle_distance(stations[a].position, stations[b].position, earth)});
    }

    // Endpoints must exist and be distinct; a stated distance must agree
    // with the great-circle distance to within 1%.
    void validate(const EarthModel& earth) const {
        for (const auto& s : stations) (void)s.position.normalized();
        for (std::size_t k = 0; k < edges.size(); ++k) {
            const auto& e = edges[k];
            const std::string where = "edge " + std::to_string(k);
            if (e.a >= stations.size() || e.b >= stations.size())
                throw ConfigError(where + ": endpoint does not exist");
            if (e.a == e.b) throw ConfigError(where + ": endpoints must differ");
            const double gc = great_circle_distance(stations[e.a].position, stations[e.b].position, earth);
            if (std::abs(e.distance_km - gc) > 0.01 * gc)
                throw ConfigError(where + ": stated distance " + std::to_string(e.distance_km) +
                                  " km disagrees with great-circle distance " + std::to_string(gc) + " km");
        }
    }

    // Two stations on the equator, symmetric about longitude 0, a ground distance d apart.
    static StationGraph equator_pair(double separation_km, const EarthModel& earth = {}) {
        const double half_deg = separation_km / earth.radius_km / constants::deg / 2.0;
        StationGraph g;
        g.add_station({"west", "west", {0.0, -half_deg, 0.0}});
        g.add_station({"east", "east", {0.0, half_deg, 0.0}});
        g.connect(0, 1, earth);
        return g;
    }
};

struct SimulationClock {
    double duration_s = 86400.0;
    double timestep_s = 1.0;

    [[nodiscard]] std::size_t steps() const {
        return static_cast<std::size_t>(std::llround(duration_s / timestep_s));
    }

    void validate() const {
        if (!(timestep_s > 0.0) || !(duration_s > 0.0)) throw ConfigError("clock: duration and timestep must be > 0");
        const double n = duration_s / timestep_s;
        if (std::abs(n - std::round(n)) > 1e-9 * n)
            throw ConfigError("clock: duration must be a whole multiple of the timestep");
    }
};

// One (satellite, station pair) link evaluation at one instant.
struct LinkSample {
    double t = 0.0;
    int satellite = 0;  // 1-based
    std::size_t station1 = 0;
    std::size_t station2 = 0;
    double slant1_km = 0.0;
    double slant2_km = 0.0;
    double zenith1_rad = 0.0;
    double zenith2_rad = 0.0;
    double eta1 = 0.0;
    double eta2 = 0.0;
    double eta_tot = 0.0;
    double loss_db = infinite_loss_db;
};

inline LinkSample make_link_sample(double t, int satellite, const CartesianPosition& sat, std::size_t j1,
                                   const CartesianPosition& g1, std::size_t j2, const CartesianPosition& g2,
                                   double altitude_km, const OpticalLinkParams& params, const EarthModel& earth) {
    LinkSample s;
    s.t = t;
    s.satellite = satellite;
    s.station1 = j1;
    s.station2 = j2;
    s.slant1_km = slant_range(sat, g1);
    s.slant2_km = slant_range(sat, g2);
    s.zenith1_rad = zenith_angle(s.slant1_km, altitude_km, earth);
    s.zenith2_rad = zenith_angle(s.slant2_km, altitude_km, earth);
    s.eta1 = link_transmittance(s.slant1_km, altitude_km, params, earth);
    s.eta2 = link_transmittance(s.slant2_km, altitude_km, params, earth);
    s.eta_tot = s.eta1 * s.eta2;
    s.loss_db = to_loss_db(s.eta_tot);
    return s;
}

// Both stations see the satellite above the horizon and the two-arm loss
// is under the threshold.
inline bool in_range(const LinkSample& s, double threshold_db = constants::loss_threshold_db) {
    return s.eta1 > 0.0 && s.eta2 > 0.0 && s.loss_db < threshold_db;
}

// An in-range (satellite, pair) option at one timestep.
struct Candidate {
    int satellite = 0;  // 1-based
    std::size_t pair = 0;
    double loss_db = 0.0;
};

struct AssignmentRecord {
    double t = 0.0;
    std::vector<int> satellite_for_pair;  // 0 = unassigned
};

// Unique satellite-to-pair assignment.
//
//  1. A pair with exactly one in-range satellite ("lone" pair) gets it.
//     Lone pairs competing for the same satellite are ordered by loss,
//     then pair index.
//  2. Remaining options are taken greedily in ascending
//     (loss, satellite, pair) order, skipping used satellites and pairs.
inline std::vector<int> assign_satellites(std::span<const Candidate> candidates, std::size_t num_pairs,
                                          std::size_t num_satellites) {
    std::vector<int> assigned(num_pairs, 0);
    std::vector<char> sat_used(num_satellites + 1, 0);

    std::vector<int> options(num_pairs, 0);
    std::vector<std::size_t> only(num_pairs, 0);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        const auto& c = candidates[k];
        if (c.pair >= num_pairs || c.satellite < 1 || static_cast<std::size_t>(c.satellite) > num_satellites)
            throw ConfigError("assignment candidate out of bounds");
        ++options[c.pair];
        only[c.pair] = k;
    }

    std::vector<std::size_t> lone;
    for (std::size_t p = 0; p < num_pairs; ++p)
        if (options[p] == 1) lone.push_back(only[p]);
    std::sort(lone.begin(), lone.end(), [&](std::size_t i, std::size_t j) {
        const auto& a = candidates[i];
        const auto& b = candidates[j];
        if (a.loss_db != b.loss_db) return a.loss_db < b.loss_db;
        return a.pair < b.pair;
    });
    for (std::size_t k : lone) {
        const auto& c = candidates[k];
        if (!sat_used[c.satellite]) {
            sat_used[c.satellite] = 1;
            assigned[c.pair] = c.satellite;
        }
    }

    std::vector<std::size_t> order;
    order.reserve(candidates.size());
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (options[candidates[k].pair] > 1) order.push_back(k);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        const auto& a = candidates[i];
        const auto& b = candidates[j];
        if (a.loss_db != b.loss_db) return a.loss_db < b.loss_db;
        if (a.satellite != b.satellite) return a.satellite < b.satellite;
        return a.pair < b.pair;
    });
    for (std::size_t k : order) {
        const auto& c = candidates[k];
        if (sat_used[c.satellite] || assigned[c.pair] != 0) continue;
        sat_used[c.satellite] = 1;
        assigned[c.pair] = c.satellite;
    }
    return assigned;
}

// Pair count arriving in one step: n = R_source * dt trials with success
// probability eta. Without an engine, returns round(n * eta).
inline std::uint64_t sample_pair_count(double eta, double source_rate, double dt, std::mt19937_64* rng = nullptr) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw DomainError("pair transmittance must be in [0, 1]");
    const auto n = static_cast<long long>(std::llround(source_rate * dt));
    if (eta == 0.0 || n == 0) return 0;
    if (eta == 1.0) return static_cast<std::uint64_t>(n);
    if (rng == nullptr) return static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * eta));
    std::binomial_distribution<long long> bin(n, eta);
    return static_cast<std::uint64_t>(bin(*rng));
}

// -10 log10 of the mean transmittance; unassigned steps contribute 0.
inline double average_loss_db(std::span<const double> eta_tot) {
    if (eta_tot.empty()) return infinite_loss_db;
    const double sum = std::accumulate(eta_tot.begin(), eta_tot.end(), 0.0);
    return to_loss_db(sum / static_cast<double>(eta_tot.size()));
}

// Mean received pairs per second.
inline double average_rate(std::span<const double> pairs_per_step, double dt) {
    if (pairs_per_step.empty()) return 0.0;
    const double sum = std::accumulate(pairs_per_step.begin(), pairs_per_step.end(), 0.0);
    return sum / (static_cast<double>(pairs_per_step.size()) * dt);
}

enum class CountMode { deterministic, stochastic };

struct CoverageGap {
    double start_s = 0.0;
    double end_s = 0.0;  // exclusive
    [[nodiscard]] double duration_s() const { return end_s - start_s; }
};

// Per-step record of the served link for one pair (only when requested).
struct EdgeSeries {
    std::vector<int> satellite;
    std::vector<double> slant1_km, slant2_km, zenith1_rad, zenith2_rad;
    std::vector<double> eta_tot, loss_db, pairs;
};

struct TimeSeriesResult {
    double timestep_s = 1.0;
    std::size_t steps = 0;
    std::size_t assigned_steps = 0;
    double eta_sum = 0.0;
    double pair_sum = 0.0;
    std::vector<CoverageGap> gaps;
    std::optional<EdgeSeries> series;

    [[nodiscard]] double average_loss_db() const {
        return steps == 0 ? infinite_loss_db : to_loss_db(eta_sum / static_cast<double>(steps));
    }
    [[nodiscard]] double average_rate() const {
        return steps == 0 ? 0.0 : pair_sum / (static_cast<double>(steps) * timestep_s);
    }
    [[nodiscard]] double gap_seconds() const {
        double s = 0.0;
        for (const auto& g : gaps) s += g.duration_s();
        return s;
    }
};

struct SimulationOptions {
    double source_rate = constants::default_source_rate;
    double loss_threshold_db = constants::loss_threshold_db;
    CountMode mode = CountMode::deterministic;
    std::uint64_t seed = 0;
    bool record_series = false;
    bool record_assignments = false;
    // Abort the run at the first step where some pair is unserved. Coverage is
    // then known to fail and the aggregates cover only the steps run.
    bool stop_at_first_gap = false;
};

struct SimulationResult {
    std::vector<TimeSeriesResult> edges;
    std::vector<AssignmentRecord> assignments;
    std::size_t steps_planned = 0;
    std::size_t steps_run = 0;

    [[nodiscard]] bool completed() const { return steps_run == steps_planned; }
    [[nodiscard]] bool all_covered() const {
        return completed() && std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.gaps.empty(); });
    }
    // Graph-level loss: transmittance averaged over edges and time.
    [[nodiscard]] double average_loss_db() const {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& e : edges) {
            s += e.eta_sum;
            n += e.steps;
        }
        return n == 0 ? infinite_loss_db : to_loss_db(s / static_cast<double>(n));
    }
    [[nodiscard]] double average_rate() const {
        if (edges.empty()) return 0.0;
        double s = 0.0;
        for (const auto& e : edges) s += e.average_rate();
        return s / static_cast<double>(edges.size());
    }
};

namespace detail {

struct Visible {
    int sat = 0;  // 0-based
    double slant_km = 0.0;
    double eta = 0.0;
};

inline void close_gap(TimeSeriesResult& r, std::optional<double>& open, double end) {
    if (open) {
        r.gaps.push_back({*open, end});
        open.reset();
    }
}

}  // namespace detail

inline SimulationResult run_simulation(const ConstellationConfig& config, const StationGraph& graph,
                                       const SimulationClock& clock, const OpticalLinkParams& params,
                                       const EarthModel& earth, const SimulationOptions& options) {
    config.validate();
    clock.validate();
    params.validate();
    earth.validate();
    graph.validate(earth);
    if (graph.edges.empty()) throw ConfigError("station graph has no edges");
    if (!(options.source_rate >= 0.0)) throw ConfigError("source rate must be >= 0");

    const Constellation constellation(config, earth);
    const LinkBudget budget(config.altitude_km, params, earth);
    const std::size_t n_sat = constellation.size();
    const std::size_t n_sta = graph.stations.size();
    const std::size_t n_edge = graph.edges.size();
    const std::size_t n_steps = clock.steps();
    const double dt = clock.timestep_s;
    const double re_sq = earth.radius_km * earth.radius_km;
    const double trials = options.source_rate * dt;

    SimulationResult result;
    result.steps_planned = n_steps;
    result.edges.resize(n_edge);
    for (auto& e : result.edges) {
        e.timestep_s = dt;
        if (options.record_series) e.series.emplace();
    }
    std::vector<std::optional<double>> open_gap(n_edge);

    std::vector<CartesianPosition> sats;
    std::vector<CartesianPosition> ground(n_sta);
    std::vector<std::vector<detail::Visible>> visible(n_sta);
    std::vector<double> eta_by_sat(n_sta * n_sat, 0.0);
    std::vector<double> slant_by_sat(n_sta * n_sat, 0.0);
    std::vector<Candidate> candidates;

    std::size_t step = 0;
    for (; step < n_steps; ++step) {
        const double t = static_cast<double>(step) * dt;
        constellation.positions(t, sats);
        for (std::size_t j = 0; j < n_sta; ++j) ground[j] = ground_station_position(graph.stations[j].position, earth, t);

        for (std::size_t j = 0; j < n_sta; ++j) {
            for (const auto& v : visible[j]) eta_by_sat[j * n_sat + static_cast<std::size_t>(v.sat)] = 0.0;
            visible[j].clear();
            for (std::size_t i = 0; i < n_sat; ++i) {
                // Below the horizon iff r.g <= R_E^2; the exact cut is left to the budget.
                if (dot(sats[i], ground[j]) <= re_sq * (1.0 - 1e-12)) continue;
                const double slant = slant_range(sats[i], ground[j]);
                const double eta = budget.transmittance(slant);
                if (eta <= 0.0) continue;
                visible[j].push_back({static_cast<int>(i), slant, eta});
                eta_by_sat[j * n_sat + i] = eta;
                slant_by_sat[j * n_sat + i] = slant;
            }
        }

        candidates.clear();
        for (std::size_t k = 0; k < n_edge; ++k) {
            const auto& e = graph.edges[k];
            for (const auto& v : visible[e.b]) {
                const double eta_a = eta_by_sat[e.a * n_sat + static_cast<std::size_t>(v.sat)];
                if (eta_a <= 0.0) continue;
                const double loss = to_loss_db(eta_a * v.eta);
                if (loss < options.loss_threshold_db) candidates.push_back({v.sat + 1, k, loss});
            }
        }

        const auto assigned = assign_satellites(candidates, n_edge, n_sat);
        std::mt19937_64 rng;
        if (options.mode == CountMode::stochastic) rng = substream(options.seed, step);

        bool gap_now = false;
        for (std::size_t k = 0; k < n_edge; ++k) {
            auto& r = result.edges[k];
            const auto& e = graph.edges[k];
            ++r.steps;
            const int s = assigned[k];
            double eta = 0.0;
            double pairs = 0.0;
            if (s != 0) {
                const auto i = static_cast<std::size_t>(s - 1);
                eta = eta_by_sat[e.a * n_sat + i] * eta_by_sat[e.b * n_sat + i];
                pairs = options.mode == CountMode::stochastic
                            ? static_cast<double>(sample_pair_count(eta, options.source_rate, dt, &rng))
                            : trials * eta;
                ++r.assigned_steps;
                detail::close_gap(r, open_gap[k], t);
            } else {
                if (!open_gap[k]) open_gap[k] = t;
                gap_now = true;
            }
            r.eta_sum += eta;
            r.pair_sum += pairs;
            if (r.series) {
                auto& ser = *r.series;
                ser.satellite.push_back(s);
                ser.eta_tot.push_back(eta);
                ser.loss_db.push_back(to_loss_db(eta));
                ser.pairs.push_back(pairs);
                if (s != 0) {
                    const auto i = static_cast<std::size_t>(s - 1);
                    const double l1 = slant_by_sat[e.a * n_sat + i];
                    const double l2 = slant_by_sat[e.b * n_sat + i];
                    ser.slant1_km.push_back(l1);
                    ser.slant2_km.push_back(l2);
                    ser.zenith1_rad.push_back(zenith_angle(l1, config.altitude_km, earth));
                    ser.zenith2_rad.push_back(zenith_angle(l2, config.altitude_km, earth));
                } else {
                    for (auto* v : {&ser.slant1_km, &ser.slant2_km, &ser.zenith1_rad, &ser.zenith2_rad})
                        v->push_back(std::nan(""));
                }
            }
        }
        if (options.record_assignments) result.assignments.push_back({t, assigned});
        if (gap_now && options.stop_at_first_gap) {
            ++step;
            break;
        }
    }
    result.steps_run = step;
    const double end = static_cast<double>(step) * dt;
    for (std::size_t k = 0; k < n_edge; ++k) detail::close_gap(result.edges[k], open_gap[k], end);
    return result;
}

}  // namespace satnet
