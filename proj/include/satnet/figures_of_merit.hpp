#pragma once

// Constellation sweeps and the constrained optima built on them.
//
// A cell is one constellation (N_R, N_S, h) simulated against one station
// graph. Optima at a given altitude only consider cells with continuous
// coverage of every constrained edge over the whole run.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "satnet/error.hpp"
#include "satnet/geometry.hpp"
#include "satnet/network_sim.hpp"
#include "satnet/optical_link.hpp"
#include "satnet/rng.hpp"

namespace satnet {

struct RingShape {
    int num_rings = 1;
    int sats_per_ring = 1;
    [[nodiscard]] int total() const { return num_rings * sats_per_ring; }
    friend bool operator==(const RingShape&, const RingShape&) = default;
};

// The 42 (N_R, N_S) shapes used throughout, 20 to 400 satellites.
inline std::vector<RingShape> default_ring_shapes() {
    return {{2, 10}, {4, 8},  {5, 8},   {3, 10},  {9, 7},   {6, 8},   {4, 5},   {8, 7},   {7, 8},
            {5, 5},  {7, 7},  {8, 8},   {6, 5},   {6, 7},   {9, 8},   {7, 5},   {5, 7},   {8, 9},
            {8, 5},  {4, 7},  {9, 9},   {9, 5},   {8, 10},  {7, 14},  {4, 6},   {9, 10},  {7, 15},
            {5, 6},  {8, 11}, {10, 14}, {6, 6},   {10, 10}, {10, 15}, {7, 6},   {4, 13},  {15, 15},
            {8, 6},  {5, 13}, {16, 16}, {9, 6},   {7, 13},  {20, 20}};
}

inline std::vector<double> default_altitude_grid() {
    return {500, 1000, 1500, 2000, 3000, 3500, 4000, 5000, 6000, 8000, 10000};
}

struct ConfigCatalog {
    std::vector<RingShape> shapes = default_ring_shapes();
    std::vector<double> altitudes_km = default_altitude_grid();
    std::vector<double> distances_km = {1500, 2500, 3500, 4500, 5000};

    void validate() const {
        if (shapes.empty()) throw ConfigError("catalog: no (N_R, N_S) shapes");
        if (altitudes_km.empty()) throw ConfigError("catalog: empty altitude grid");
        for (const auto& s : shapes)
            if (s.num_rings < 1 || s.sats_per_ring < 1) throw ConfigError("catalog: N_R and N_S must be >= 1");
        for (double h : altitudes_km)
            if (!(h > 0.0)) throw ConfigError("catalog: altitudes must be > 0");
    }
};

struct CellResult {
    RingShape shape;
    double altitude_km = 0.0;
    double distance_km = 0.0;  // group key; the edge length for two-station scenarios
    bool coverage_ok = false;
    bool complete = false;     // false when the run stopped at the first gap
    double avg_loss_db = infinite_loss_db;
    double avg_rate = 0.0;
    std::vector<double> edge_loss_db;
    std::vector<double> edge_rate;
    std::vector<double> edge_gap_s;

    [[nodiscard]] int satellites() const { return shape.total(); }
};

inline double figure_of_merit_c(const CellResult& cell) {
    return cell.avg_rate / static_cast<double>(cell.satellites());
}

struct CellContext {
    const StationGraph* graph = nullptr;
    SimulationClock clock;
    OpticalLinkParams link;
    EarthModel earth;
    SimulationOptions options;
    double ring_node_offset_deg = 0.0;
    double inter_ring_phase_deg = 0.0;
};

inline CellResult evaluate_cell(RingShape shape, double altitude_km, double distance_key, const CellContext& ctx) {
    ConstellationConfig cfg{shape.num_rings, shape.sats_per_ring, altitude_km, ctx.ring_node_offset_deg,
                            ctx.inter_ring_phase_deg};
    auto sim = run_simulation(cfg, *ctx.graph, ctx.clock, ctx.link, ctx.earth, ctx.options);
    CellResult r;
    r.shape = shape;
    r.altitude_km = altitude_km;
    r.distance_km = distance_key;
    r.complete = sim.completed();
    r.coverage_ok = sim.all_covered();
    r.avg_loss_db = sim.average_loss_db();
    r.avg_rate = sim.average_rate();
    for (const auto& e : sim.edges) {
        r.edge_loss_db.push_back(e.average_loss_db());
        r.edge_rate.push_back(e.average_rate());
        r.edge_gap_s.push_back(e.gap_seconds());
    }
    return r;
}

struct Optimum {
    double value = 0.0;
    RingShape shape;
    double altitude_km = 0.0;
    std::size_t index = 0;  // into the span searched
};

namespace detail {

inline bool same_key(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

// Ties go to fewer satellites, then lower altitude, then (N_R, N_S).
inline bool preferred_on_tie(const CellResult& a, const CellResult& b) {
    if (a.satellites() != b.satellites()) return a.satellites() < b.satellites();
    if (a.altitude_km != b.altitude_km) return a.altitude_km < b.altitude_km;
    if (a.shape.num_rings != b.shape.num_rings) return a.shape.num_rings < b.shape.num_rings;
    return a.shape.sats_per_ring < b.shape.sats_per_ring;
}

template <class Score>
std::optional<Optimum> best_covering(std::span<const CellResult> cells, Score score, bool maximize) {
    std::optional<Optimum> best;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& c = cells[k];
        if (!c.coverage_ok) continue;
        const double v = score(c);
        bool take = !best;
        if (best) {
            const double bv = best->value;
            const bool better = maximize ? v > bv : v < bv;
            take = better || (v == bv && preferred_on_tie(c, cells[best->index]));
        }
        if (take) best = Optimum{v, c.shape, c.altitude_km, k};
    }
    return best;
}

}  // namespace detail

// Cells belonging to one (h, d) group.
inline std::vector<CellResult> cells_at(std::span<const CellResult> all, double altitude_km, double distance_km) {
    std::vector<CellResult> out;
    for (const auto& c : all)
        if (detail::same_key(c.altitude_km, altitude_km) && detail::same_key(c.distance_km, distance_km))
            out.push_back(c);
    return out;
}

// Fewest satellites with continuous coverage.
inline std::optional<int> n_opt(std::span<const CellResult> group) {
    std::optional<int> best;
    for (const auto& c : group)
        if (c.coverage_ok && (!best || c.satellites() < *best)) best = c.satellites();
    return best;
}

inline std::optional<int> n_opt(double altitude_km, double distance_km, std::span<const CellResult> all) {
    const auto g = cells_at(all, altitude_km, distance_km);
    return n_opt(g);
}

// C(h, d): best rate per satellite among covering shapes.
inline std::optional<Optimum> capital_c(std::span<const CellResult> group) {
    return detail::best_covering(group, figure_of_merit_c, true);
}

inline std::optional<Optimum> capital_c(double altitude_km, double distance_km, std::span<const CellResult> all) {
    const auto g = cells_at(all, altitude_km, distance_km);
    return capital_c(g);
}

inline std::optional<Optimum> rate_opt(std::span<const CellResult> group) {
    return detail::best_covering(group, [](const CellResult& c) { return c.avg_rate; }, true);
}

inline std::optional<Optimum> loss_opt(std::span<const CellResult> group) {
    return detail::best_covering(group, [](const CellResult& c) { return c.avg_loss_db; }, false);
}

// (N_R*, N_S*, h*) maximizing c over every shape and altitude at one distance.
inline std::optional<Optimum> best_configuration(double distance_km, std::span<const CellResult> all) {
    std::vector<CellResult> g;
    for (const auto& c : all)
        if (detail::same_key(c.distance_km, distance_km)) g.push_back(c);
    return detail::best_covering(std::span<const CellResult>(g), figure_of_merit_c, true);
}

struct GraphMerits {
    std::optional<int> n_opt;
    std::optional<Optimum> capital_c;
    std::optional<Optimum> rate_opt;
    std::optional<Optimum> loss_opt;
};

// Graph-level optima at one altitude. Cells must come from the same graph;
// their aggregates already average over edges and time, and coverage_ok
// already requires every edge to be covered.
inline GraphMerits multi_station_merits(const StationGraph& graph, double altitude_km,
                                        std::span<const CellResult> cells) {
    if (graph.edges.empty()) throw ConfigError("multi-station merits need at least one edge");
    std::vector<CellResult> g;
    for (const auto& c : cells) {
        if (!detail::same_key(c.altitude_km, altitude_km)) continue;
        if (c.edge_rate.size() != graph.edges.size())
            throw ConfigError("cell was not evaluated on this station graph");
        g.push_back(c);
    }
    return {n_opt(g), capital_c(g), rate_opt(g), loss_opt(g)};
}

// --- sweeping ---------------------------------------------------------------

inline nlohmann::json to_json(const CellResult& c) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    nlohmann::json loss = nlohmann::json::array();
    for (double v : c.edge_loss_db) loss.push_back(num(v));
    return {{"N_R", c.shape.num_rings},   {"N_S", c.shape.sats_per_ring}, {"h_km", c.altitude_km},
            {"d_km", c.distance_km},      {"coverage_ok", c.coverage_ok}, {"complete", c.complete},
            {"avg_loss_db", num(c.avg_loss_db)}, {"avg_rate", c.avg_rate}, {"edge_loss_db", loss},
            {"edge_rate", c.edge_rate}, {"edge_gap_s", c.edge_gap_s}};
}

inline CellResult cell_from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& v) { return v.is_null() ? infinite_loss_db : v.get<double>(); };
    CellResult c;
    c.shape = {j.at("N_R").get<int>(), j.at("N_S").get<int>()};
    c.altitude_km = j.at("h_km").get<double>();
    c.distance_km = j.at("d_km").get<double>();
    c.coverage_ok = j.at("coverage_ok").get<bool>();
    c.complete = j.at("complete").get<bool>();
    c.avg_loss_db = num(j.at("avg_loss_db"));
    c.avg_rate = j.at("avg_rate").get<double>();
    for (const auto& v : j.at("edge_loss_db")) c.edge_loss_db.push_back(num(v));
    c.edge_rate = j.at("edge_rate").get<std::vector<double>>();
    c.edge_gap_s = j.at("edge_gap_s").get<std::vector<double>>();
    return c;
}

// Canonical text of everything that determines a cell's outcome.
inline std::string cell_fingerprint(RingShape shape, double altitude_km, double distance_key, const CellContext& ctx) {
    std::ostringstream os;
    os.precision(17);
    os << "shape " << shape.num_rings << ' ' << shape.sats_per_ring << " h " << altitude_km << " d " << distance_key
       << " phase " << ctx.ring_node_offset_deg << ' ' << ctx.inter_ring_phase_deg << " clock "
       << ctx.clock.duration_s << ' ' << ctx.clock.timestep_s << " link " << ctx.link.receiver_radius_m << ' '
       << ctx.link.beam_waist_m << ' ' << ctx.link.wavelength_m << ' ' << ctx.link.zenith_transmittance << " earth "
       << ctx.earth.radius_km << ' ' << ctx.earth.rotation_period_s << ' ' << ctx.earth.mu_km3_s2 << " sim "
       << ctx.options.source_rate << ' ' << ctx.options.loss_threshold_db << ' '
       << static_cast<int>(ctx.options.mode) << ' ' << ctx.options.seed << ' ' << ctx.options.stop_at_first_gap;
    for (const auto& s : ctx.graph->stations)
        os << " st " << s.position.latitude_deg << ' ' << s.position.longitude_deg << ' ' << s.position.altitude_km;
    for (const auto& e : ctx.graph->edges) os << " e " << e.a << ' ' << e.b;
    return os.str();
}

// Runs body(k) for k in [0, n) on up to `workers` threads. The first
// exception stops the remaining work and is rethrown.
template <class Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto work = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n) return;
            try {
                body(k);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                next = n;
                return;
            }
        }
    };
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);
}

struct SweepJob {
    RingShape shape;
    double altitude_km = 0.0;
    double distance_key = 0.0;
    const CellContext* context = nullptr;
};

// Evaluates jobs on `workers` threads. With a cache directory, each cell is
// stored as <hash>.json and reused on later runs. Output order follows jobs.
inline std::vector<CellResult> run_sweep(std::span<const SweepJob> jobs, unsigned workers = 1,
                                         const std::optional<std::filesystem::path>& cache_dir = std::nullopt,
                                         const std::function<void(std::size_t, std::size_t)>& progress = {}) {
    std::vector<CellResult> out(jobs.size());
    if (cache_dir) std::filesystem::create_directories(*cache_dir);
    std::atomic<std::size_t> done{0};
    std::mutex mu;

    parallel_for(jobs.size(), workers, [&](std::size_t k) {
        const auto& job = jobs[k];
        std::optional<std::filesystem::path> file;
        bool cached = false;
        if (cache_dir) {
            const auto key = fnv1a(cell_fingerprint(job.shape, job.altitude_km, job.distance_key, *job.context));
            std::ostringstream name;
            name << std::hex << key << ".json";
            file = *cache_dir / name.str();
            if (std::ifstream in{*file}) {
                try {
                    out[k] = cell_from_json(nlohmann::json::parse(in));
                    cached = true;
                } catch (const nlohmann::json::exception&) {
                    // Truncated or stale entry; recompute it.
                }
            }
        }
        if (!cached) {
            out[k] = evaluate_cell(job.shape, job.altitude_km, job.distance_key, *job.context);
            if (file) {
                const auto tmp = std::filesystem::path(file->string() + ".tmp" + std::to_string(k));
                {
                    std::ofstream os(tmp);
                    os << to_json(out[k]).dump();
                    if (!os) throw IoError("cannot write cache entry " + tmp.string());
                }
                std::filesystem::rename(tmp, *file);
            }
        }
        const auto n = ++done;
        if (progress) {
            std::lock_guard lock(mu);
            progress(n, jobs.size());
        }
    });
    return out;
}

}  // namespace satnet
