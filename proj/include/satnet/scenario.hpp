#pragma once

// Scenario configs (YAML), their validation, and the runs that turn them into
// CSV tables plus a manifest.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "satnet/constants.hpp"
#include "satnet/csv.hpp"
#include "satnet/error.hpp"
#include "satnet/figures_of_merit.hpp"
#include "satnet/geometry.hpp"
#include "satnet/network_sim.hpp"
#include "satnet/noise_fidelity.hpp"
#include "satnet/optical_link.hpp"
#include "satnet/repeater.hpp"
#include "satnet/rng.hpp"

namespace satnet {

inline constexpr std::string_view version = "0.1.0";

enum class ScenarioKind {
    two_station_equator,
    latitude_sweep,
    grid_42,
    city_pairs,
    static_midpoint,
    fidelity_vs_irradiance,
    repeater_comparison,
};

struct ScenarioInfo {
    ScenarioKind kind;
    std::string_view name;
    std::string_view summary;
};

inline constexpr std::array<ScenarioInfo, 7> scenario_catalog{{
    {ScenarioKind::two_station_equator, "two_station_equator",
     "equatorial station pair; sweep shapes x altitudes x distances, report N_opt, C and the best configuration"},
    {ScenarioKind::latitude_sweep, "latitude_sweep",
     "station pair at a common latitude, fixed longitude offset; loss and rate versus latitude"},
    {ScenarioKind::grid_42, "grid_42", "7 x 6 station grid, nearest-neighbour or diagonal edges; per-edge loss and rate"},
    {ScenarioKind::city_pairs, "city_pairs", "named city pairs simulated jointly; loss matrix over altitudes"},
    {ScenarioKind::static_midpoint, "static_midpoint", "satellite above the midpoint; two-arm transmittance versus d and h"},
    {ScenarioKind::fidelity_vs_irradiance, "fidelity_vs_irradiance",
     "Bell-pair fidelity versus sky spectral irradiance at a midpoint link"},
    {ScenarioKind::repeater_comparison, "repeater_comparison",
     "satellite rate versus fibre repeater chains over the same distance"},
}};

inline std::string_view to_string(ScenarioKind k) {
    for (const auto& s : scenario_catalog)
        if (s.kind == k) return s.name;
    return "unknown";
}

inline std::optional<ScenarioKind> scenario_from_string(std::string_view name) {
    for (const auto& s : scenario_catalog)
        if (s.name == name) return s.kind;
    return std::nullopt;
}

enum class GridEdges { all_nn, diagonal };

// ---------------------------------------------------------------------------
// Cities

struct City {
    std::string name;
    GeodeticCoordinate position;
};

class CityDatabase {
public:
    // The sites every shipped database must provide.
    static const std::vector<std::string>& required_names() {
        static const std::vector<std::string> names{
            "Toronto", "New York City", "London",        "Singapore", "Sydney",   "Auckland",
            "Rio de Janeiro", "Baton Rouge", "Mumbai",   "Johannesburg", "Washington DC", "Lijiang",
            "Ngari",   "Delingha",      "Nanshan",       "Xinglong",  "Houston"};
        return names;
    }

    static CityDatabase parse(std::istream& in, const std::string& source = "cities") {
        CityDatabase db;
        std::string line;
        std::optional<std::vector<std::string>> header;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            auto f = csv::split_record(line);
            if (!header) {
                header = f;
                continue;
            }
            const std::string where = source + ":" + std::to_string(lineno);
            if (f.size() < 3) throw ConfigError(where + ": expected name,latitude_deg,longitude_deg[,altitude_km]");
            City c;
            c.name = f[0];
            try {
                c.position.latitude_deg = std::stod(f[1]);
                c.position.longitude_deg = std::stod(f[2]);
                if (f.size() > 3 && !f[3].empty()) c.position.altitude_km = std::stod(f[3]);
            } catch (const std::exception&) {
                throw ConfigError(where + ": malformed coordinate");
            }
            try {
                c.position = c.position.normalized();
            } catch (const std::exception& e) {
                throw ConfigError(where + ": " + e.what());
            }
            if (db.find(c.name)) throw ConfigError(where + ": duplicate city '" + c.name + "'");
            db.cities_.push_back(std::move(c));
        }
        return db;
    }

    static CityDatabase load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read city database " + path.string());
        return parse(in, path.string());
    }

    [[nodiscard]] const City* find(std::string_view name) const {
        for (const auto& c : cities_)
            if (c.name == name) return &c;
        return nullptr;
    }

    [[nodiscard]] std::vector<std::string> missing_required() const {
        std::vector<std::string> out;
        for (const auto& n : required_names())
            if (!find(n)) out.push_back(n);
        return out;
    }

    [[nodiscard]] const std::vector<City>& cities() const { return cities_; }

private:
    std::vector<City> cities_;
};

inline std::vector<std::pair<std::string, std::string>> default_city_pairs() {
    return {{"Toronto", "New York City"}, {"Lijiang", "Delingha"},   {"Houston", "Washington DC"},
            {"Sydney", "Auckland"},       {"New York City", "London"}, {"Singapore", "Sydney"},
            {"London", "Mumbai"}};
}

// ---------------------------------------------------------------------------
// Config

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::two_station_equator;
    std::string name;
    std::uint64_t seed = 1;
    CountMode mode = CountMode::deterministic;
    std::filesystem::path output_dir = "out";
    unsigned workers = 1;

    SimulationClock clock;
    ConfigCatalog catalog;
    double ring_node_offset_deg = 0.0;
    double inter_ring_phase_deg = 0.0;
    OpticalLinkParams link;
    NoiseParams noise;
    EarthModel earth;
    double source_rate = constants::default_source_rate;
    double loss_threshold_db = constants::loss_threshold_db;
    bool stop_at_first_gap = false;
    bool cache = true;
    bool record_series = false;  // per-edge time series and gap report for every cell

    // latitude_sweep
    std::vector<double> latitudes_deg;
    double longitude_separation_deg = 18.0;

    // grid_42
    std::vector<double> grid_latitudes_deg;
    double grid_longitude_start_deg = 0.0;
    double grid_longitude_step_deg = 18.0;
    int grid_longitudes = 6;
    GridEdges grid_edges = GridEdges::all_nn;

    // city_pairs
    std::filesystem::path cities_file;
    std::vector<std::pair<std::string, std::string>> city_pairs;

    // fidelity_vs_irradiance
    double fidelity_distance_km = 2000.0;
    double fidelity_altitude_km = 1000.0;
    std::vector<double> irradiance;  // W m^-2 um^-1 sr^-1
    double source_fidelity = 1.0;

    // repeater_comparison
    std::vector<int> repeater_links{10, 20, 50};
    int repeater_memories = 50;
    double attenuation_per_km = constants::fiber_attenuation_per_km;
    std::string signal = "fiber";
    double signal_speed_km_s = constants::fiber_light_speed_km_s;

    [[nodiscard]] SimulationOptions simulation_options() const {
        SimulationOptions o;
        o.source_rate = source_rate;
        o.loss_threshold_db = loss_threshold_db;
        o.mode = mode;
        o.seed = seed;
        o.stop_at_first_gap = stop_at_first_gap;
        return o;
    }

    [[nodiscard]] CellContext cell_context(const StationGraph& graph) const {
        CellContext ctx;
        ctx.graph = &graph;
        ctx.clock = clock;
        ctx.link = link;
        ctx.earth = earth;
        ctx.options = simulation_options();
        ctx.ring_node_offset_deg = ring_node_offset_deg;
        ctx.inter_ring_phase_deg = inter_ring_phase_deg;
        return ctx;
    }
};

struct ValidationResult {
    std::optional<ScenarioConfig> config;
    std::vector<std::string> errors;
    [[nodiscard]] bool ok() const { return errors.empty(); }
};

// Thrown with every problem found in a config, one per line.
class ConfigErrors : public ConfigError {
public:
    explicit ConfigErrors(std::vector<std::string> errors)
        : ConfigError(join(errors)), errors_(std::move(errors)) {}
    [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s;
        for (const auto& x : e) s += (s.empty() ? "" : "\n") + x;
        return s;
    }
    std::vector<std::string> errors_;
};

namespace detail {

class Reader {
public:
    std::vector<std::string> errors;

    void fail(const std::string& path, const std::string& msg) { errors.push_back(path + ": " + msg); }

    // Section must be absent or a map with only the listed keys.
    bool section(const YAML::Node& root, const std::string& key, std::initializer_list<std::string_view> allowed) {
        const auto n = root[key];
        if (!n) return false;
        if (!n.IsMap()) {
            fail(key, "expected a mapping");
            return false;
        }
        check_keys(n, key, allowed);
        return true;
    }

    void check_keys(const YAML::Node& n, const std::string& prefix, std::initializer_list<std::string_view> allowed) {
        for (const auto& kv : n) {
            const auto k = kv.first.as<std::string>();
            if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                fail(prefix.empty() ? k : prefix + "." + k, "unknown key");
        }
    }

    template <class T>
    bool get(const YAML::Node& parent, const std::string& prefix, const char* key, T& out, const char* what) {
        if (!parent) return false;
        const auto n = parent[key];
        if (!n) return false;
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        try {
            if (!n.IsScalar() && !n.IsSequence()) throw YAML::Exception(YAML::Mark::null_mark(), "");
            out = n.as<T>();
            return true;
        } catch (const YAML::Exception&) {
            fail(path, std::string("expected ") + what);
            return false;
        }
    }

    void positive(double v, const std::string& path) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(path, "must be a finite number > 0");
    }
    void non_negative(double v, const std::string& path) {
        if (!(v >= 0.0) || !std::isfinite(v)) fail(path, "must be a finite number >= 0");
    }
    void in_range(double v, double lo, double hi, const std::string& path) {
        if (!(v >= lo && v <= hi)) {
            std::ostringstream os;
            os << "must be in [" << lo << ", " << hi << "]";
            fail(path, os.str());
        }
    }
    void non_empty_positive(const std::vector<double>& v, const std::string& path) {
        if (v.empty()) fail(path, "must not be empty");
        for (std::size_t k = 0; k < v.size(); ++k) positive(v[k], path + "[" + std::to_string(k) + "]");
    }
};

inline std::vector<double> logspace(double from, double to, int points) {
    std::vector<double> v;
    if (points == 1) return {from};
    const double a = std::log10(from), b = std::log10(to);
    for (int k = 0; k < points; ++k) v.push_back(std::pow(10.0, a + (b - a) * k / (points - 1)));
    return v;
}

inline std::vector<double> linspace_step(double from, double to, double step) {
    std::vector<double> v;
    const auto n = static_cast<long long>(std::floor((to - from) / step + 1e-9));
    for (long long k = 0; k <= n; ++k) v.push_back(from + static_cast<double>(k) * step);
    return v;
}

}  // namespace detail

inline std::filesystem::path default_cities_file() {
#ifdef SATNET_DATA_DIR
    return std::filesystem::path(SATNET_DATA_DIR) / "cities.csv";
#else
    return "data/cities.csv";
#endif
}

// Reads a parsed YAML document. Relative input paths are resolved against
// `base_dir` (normally the config file's directory).
inline ValidationResult validate_config(const YAML::Node& root, const std::filesystem::path& base_dir = {}) {
    detail::Reader r;
    ScenarioConfig c;
    if (!root || !root.IsMap()) {
        r.fail("<root>", "config must be a mapping");
        return {std::nullopt, r.errors};
    }
    r.check_keys(root, "",
                 {"scenario", "name", "seed", "mode", "output_dir", "workers", "clock", "constellation", "distances_km",
                  "link", "noise", "earth", "simulation", "latitude_sweep", "grid", "cities", "fidelity", "repeater"});

    std::string kind;
    if (!root["scenario"]) {
        r.fail("scenario", "required; one of the names printed by list-scenarios");
    } else if (r.get(root, "", "scenario", kind, "a scenario name")) {
        if (auto k = scenario_from_string(kind)) c.kind = *k;
        else r.fail("scenario", "unknown scenario '" + kind + "'");
    }
    const auto K = c.kind;

    r.get(root, "", "name", c.name, "a string");
    r.get(root, "", "seed", c.seed, "a non-negative integer");
    std::string mode = "deterministic";
    if (r.get(root, "", "mode", mode, "deterministic or stochastic")) {
        if (mode == "deterministic") c.mode = CountMode::deterministic;
        else if (mode == "stochastic") c.mode = CountMode::stochastic;
        else r.fail("mode", "expected deterministic or stochastic");
    }
    std::string out;
    if (r.get(root, "", "output_dir", out, "a path")) c.output_dir = out;
    else c.output_dir = std::filesystem::path("out") / std::string(to_string(K));
    int workers = 1;
    if (r.get(root, "", "workers", workers, "an integer")) {
        if (workers < 1) r.fail("workers", "must be >= 1");
        else c.workers = static_cast<unsigned>(workers);
    }

    if (r.section(root, "clock", {"duration_s", "timestep_s"})) {
        r.get(root["clock"], "clock", "duration_s", c.clock.duration_s, "seconds");
        r.get(root["clock"], "clock", "timestep_s", c.clock.timestep_s, "seconds");
    }
    r.positive(c.clock.duration_s, "clock.duration_s");
    r.positive(c.clock.timestep_s, "clock.timestep_s");
    if (c.clock.duration_s > 0 && c.clock.timestep_s > 0) {
        const double n = c.clock.duration_s / c.clock.timestep_s;
        if (std::abs(n - std::round(n)) > 1e-9 * n) r.fail("clock", "duration_s must be a whole multiple of timestep_s");
    }

    // Constellation shapes default per scenario.
    switch (K) {
        case ScenarioKind::latitude_sweep:
        case ScenarioKind::grid_42: c.catalog.shapes = {{15, 15}}; break;
        case ScenarioKind::city_pairs:
        case ScenarioKind::repeater_comparison: c.catalog.shapes = {{20, 20}}; break;
        default: c.catalog.shapes = default_ring_shapes(); break;
    }
    const bool needs_altitudes = K != ScenarioKind::fidelity_vs_irradiance;
    if (r.section(root, "constellation", {"shapes", "altitudes_km", "ring_node_offset_deg", "inter_ring_phase_deg"})) {
        const auto cn = root["constellation"];
        if (const auto s = cn["shapes"]) {
            if (s.IsScalar() && s.as<std::string>() == "default") {
                c.catalog.shapes = default_ring_shapes();
            } else if (s.IsSequence()) {
                c.catalog.shapes.clear();
                for (std::size_t k = 0; k < s.size(); ++k) {
                    const std::string path = "constellation.shapes[" + std::to_string(k) + "]";
                    try {
                        const auto v = s[k].as<std::vector<int>>();
                        if (v.size() != 2) throw YAML::Exception(YAML::Mark::null_mark(), "");
                        if (v[0] < 1 || v[1] < 1) r.fail(path, "N_R and N_S must be >= 1");
                        c.catalog.shapes.push_back({v[0], v[1]});
                    } catch (const YAML::Exception&) {
                        r.fail(path, "expected [N_R, N_S]");
                    }
                }
                if (s.size() == 0) r.fail("constellation.shapes", "must not be empty");
            } else {
                r.fail("constellation.shapes", "expected 'default' or a list of [N_R, N_S]");
            }
        }
        if (r.get(cn, "constellation", "altitudes_km", c.catalog.altitudes_km, "a list of km"))
            r.non_empty_positive(c.catalog.altitudes_km, "constellation.altitudes_km");
        else if (needs_altitudes && !cn["altitudes_km"])
            r.fail("constellation.altitudes_km", "required (altitude grid in km)");
        r.get(cn, "constellation", "ring_node_offset_deg", c.ring_node_offset_deg, "degrees");
        r.get(cn, "constellation", "inter_ring_phase_deg", c.inter_ring_phase_deg, "degrees");
    } else if (needs_altitudes) {
        r.fail("constellation.altitudes_km", "required (altitude grid in km)");
    }

    switch (K) {
        case ScenarioKind::static_midpoint: c.catalog.distances_km = detail::linspace_step(100, 5000, 100); break;
        case ScenarioKind::repeater_comparison: c.catalog.distances_km = detail::linspace_step(100, 2000, 50); break;
        default: break;
    }
    if (r.get(root, "", "distances_km", c.catalog.distances_km, "a list of km"))
        r.non_empty_positive(c.catalog.distances_km, "distances_km");

    if (r.section(root, "link", {"receiver_radius_m", "beam_waist_m", "wavelength_m", "zenith_transmittance"})) {
        const auto n = root["link"];
        r.get(n, "link", "receiver_radius_m", c.link.receiver_radius_m, "metres");
        r.get(n, "link", "beam_waist_m", c.link.beam_waist_m, "metres");
        r.get(n, "link", "wavelength_m", c.link.wavelength_m, "metres");
        r.get(n, "link", "zenith_transmittance", c.link.zenith_transmittance, "a number in [0, 1]");
    }
    r.positive(c.link.receiver_radius_m, "link.receiver_radius_m");
    r.positive(c.link.beam_waist_m, "link.beam_waist_m");
    r.positive(c.link.wavelength_m, "link.wavelength_m");
    r.in_range(c.link.zenith_transmittance, 0.0, 1.0, "link.zenith_transmittance");

    if (r.section(root, "noise", {"mean_photons_arm1", "mean_photons_arm2", "coincidence_window_s",
                                  "filter_bandwidth_m", "field_of_view_sr", "receiver_radius_m", "wavelength_m"})) {
        const auto n = root["noise"];
        r.get(n, "noise", "mean_photons_arm1", c.noise.mean_photons_arm1, "a number");
        r.get(n, "noise", "mean_photons_arm2", c.noise.mean_photons_arm2, "a number");
        r.get(n, "noise", "coincidence_window_s", c.noise.coincidence_window_s, "seconds");
        r.get(n, "noise", "filter_bandwidth_m", c.noise.filter_bandwidth_m, "metres");
        r.get(n, "noise", "field_of_view_sr", c.noise.field_of_view_sr, "steradians");
        r.get(n, "noise", "receiver_radius_m", c.noise.receiver_radius_m, "metres");
        r.get(n, "noise", "wavelength_m", c.noise.wavelength_m, "metres");
    }
    r.in_range(c.noise.mean_photons_arm1, 0.0, 1.0, "noise.mean_photons_arm1");
    r.in_range(c.noise.mean_photons_arm2, 0.0, 1.0, "noise.mean_photons_arm2");
    r.non_negative(c.noise.coincidence_window_s, "noise.coincidence_window_s");
    r.non_negative(c.noise.filter_bandwidth_m, "noise.filter_bandwidth_m");
    r.non_negative(c.noise.field_of_view_sr, "noise.field_of_view_sr");
    r.non_negative(c.noise.receiver_radius_m, "noise.receiver_radius_m");
    r.positive(c.noise.wavelength_m, "noise.wavelength_m");

    if (r.section(root, "earth", {"radius_km", "rotation_period_s", "mu_km3_s2"})) {
        const auto n = root["earth"];
        r.get(n, "earth", "radius_km", c.earth.radius_km, "km");
        r.get(n, "earth", "rotation_period_s", c.earth.rotation_period_s, "seconds");
        r.get(n, "earth", "mu_km3_s2", c.earth.mu_km3_s2, "km^3/s^2");
    }
    r.positive(c.earth.radius_km, "earth.radius_km");
    r.positive(c.earth.rotation_period_s, "earth.rotation_period_s");
    r.positive(c.earth.mu_km3_s2, "earth.mu_km3_s2");

    c.stop_at_first_gap = K == ScenarioKind::two_station_equator;
    if (r.section(root, "simulation",
                  {"source_rate", "loss_threshold_db", "stop_at_first_gap", "cache", "record_series"})) {
        const auto n = root["simulation"];
        r.get(n, "simulation", "record_series", c.record_series, "true or false");
        r.get(n, "simulation", "source_rate", c.source_rate, "pairs per second");
        r.get(n, "simulation", "loss_threshold_db", c.loss_threshold_db, "dB");
        r.get(n, "simulation", "stop_at_first_gap", c.stop_at_first_gap, "true or false");
        r.get(n, "simulation", "cache", c.cache, "true or false");
    }
    r.positive(c.source_rate, "simulation.source_rate");
    r.positive(c.loss_threshold_db, "simulation.loss_threshold_db");

    c.latitudes_deg = detail::linspace_step(-72, 72, 18);
    if (r.section(root, "latitude_sweep", {"latitudes_deg", "longitude_separation_deg"})) {
        const auto n = root["latitude_sweep"];
        r.get(n, "latitude_sweep", "latitudes_deg", c.latitudes_deg, "a list of degrees");
        r.get(n, "latitude_sweep", "longitude_separation_deg", c.longitude_separation_deg, "degrees");
    }
    if (K == ScenarioKind::latitude_sweep) {
        if (c.latitudes_deg.empty()) r.fail("latitude_sweep.latitudes_deg", "must not be empty");
        for (std::size_t k = 0; k < c.latitudes_deg.size(); ++k)
            r.in_range(c.latitudes_deg[k], -90.0, 90.0, "latitude_sweep.latitudes_deg[" + std::to_string(k) + "]");
        r.in_range(c.longitude_separation_deg, 1e-9, 180.0, "latitude_sweep.longitude_separation_deg");
    }

    c.grid_latitudes_deg = detail::linspace_step(-54, 54, 18);
    if (r.section(root, "grid", {"latitudes_deg", "longitude_start_deg", "longitude_step_deg", "longitudes", "edges"})) {
        const auto n = root["grid"];
        r.get(n, "grid", "latitudes_deg", c.grid_latitudes_deg, "a list of degrees");
        r.get(n, "grid", "longitude_start_deg", c.grid_longitude_start_deg, "degrees");
        r.get(n, "grid", "longitude_step_deg", c.grid_longitude_step_deg, "degrees");
        r.get(n, "grid", "longitudes", c.grid_longitudes, "an integer");
        std::string edges;
        if (r.get(n, "grid", "edges", edges, "all_nn or diagonal")) {
            if (edges == "all_nn") c.grid_edges = GridEdges::all_nn;
            else if (edges == "diagonal") c.grid_edges = GridEdges::diagonal;
            else r.fail("grid.edges", "expected all_nn or diagonal");
        }
    }
    if (K == ScenarioKind::grid_42) {
        if (c.grid_latitudes_deg.size() < 2) r.fail("grid.latitudes_deg", "need at least two rows");
        for (std::size_t k = 0; k < c.grid_latitudes_deg.size(); ++k)
            r.in_range(c.grid_latitudes_deg[k], -90.0, 90.0, "grid.latitudes_deg[" + std::to_string(k) + "]");
        if (c.grid_longitudes < 2) r.fail("grid.longitudes", "need at least two columns");
        r.positive(c.grid_longitude_step_deg, "grid.longitude_step_deg");
    }

    if (r.section(root, "cities", {"file", "pairs"})) {
        const auto n = root["cities"];
        std::string f;
        if (r.get(n, "cities", "file", f, "a path")) c.cities_file = f;
        if (const auto p = n["pairs"]) {
            if (!p.IsSequence()) r.fail("cities.pairs", "expected a list of [city, city]");
            else
                for (std::size_t k = 0; k < p.size(); ++k) {
                    try {
                        const auto v = p[k].as<std::vector<std::string>>();
                        if (v.size() != 2) throw YAML::Exception(YAML::Mark::null_mark(), "");
                        c.city_pairs.emplace_back(v[0], v[1]);
                    } catch (const YAML::Exception&) {
                        r.fail("cities.pairs[" + std::to_string(k) + "]", "expected [city, city]");
                    }
                }
        }
    }
    if (K == ScenarioKind::city_pairs) {
        if (c.cities_file.empty()) c.cities_file = default_cities_file();
        else if (c.cities_file.is_relative() && !base_dir.empty()) c.cities_file = base_dir / c.cities_file;
        if (c.city_pairs.empty() && !(root["cities"] && root["cities"]["pairs"])) c.city_pairs = default_city_pairs();
        if (c.city_pairs.empty()) r.fail("cities.pairs", "must not be empty");
        if (!std::filesystem::exists(c.cities_file)) {
            r.fail("cities.file", "file not found: " + c.cities_file.string());
        } else {
            try {
                const auto db = CityDatabase::load(c.cities_file);
                for (std::size_t k = 0; k < c.city_pairs.size(); ++k) {
                    const auto& [a, b] = c.city_pairs[k];
                    const std::string path = "cities.pairs[" + std::to_string(k) + "]";
                    if (!db.find(a)) r.fail(path, "unknown city '" + a + "'");
                    if (!db.find(b)) r.fail(path, "unknown city '" + b + "'");
                    if (a == b) r.fail(path, "endpoints must differ");
                }
            } catch (const std::exception& e) {
                r.fail("cities.file", e.what());
            }
        }
    }

    c.irradiance = detail::logspace(1e-10, 1e-1, 91);
    if (r.section(root, "fidelity", {"distance_km", "altitude_km", "irradiance", "source_fidelity"})) {
        const auto n = root["fidelity"];
        r.get(n, "fidelity", "distance_km", c.fidelity_distance_km, "km");
        r.get(n, "fidelity", "altitude_km", c.fidelity_altitude_km, "km");
        r.get(n, "fidelity", "source_fidelity", c.source_fidelity, "a number in [0.25, 1]");
        if (const auto irr = n["irradiance"]) {
            if (irr.IsMap()) {
                r.check_keys(irr, "fidelity.irradiance", {"from", "to", "points"});
                double from = 1e-10, to = 1e-1;
                int points = 91;
                r.get(irr, "fidelity.irradiance", "from", from, "a number");
                r.get(irr, "fidelity.irradiance", "to", to, "a number");
                r.get(irr, "fidelity.irradiance", "points", points, "an integer");
                r.positive(from, "fidelity.irradiance.from");
                r.positive(to, "fidelity.irradiance.to");
                if (points < 1) r.fail("fidelity.irradiance.points", "must be >= 1");
                if (from > 0 && to > 0 && points >= 1) c.irradiance = detail::logspace(from, to, points);
            } else {
                r.get(n, "fidelity", "irradiance", c.irradiance, "a list or {from, to, points}");
                if (c.irradiance.empty()) r.fail("fidelity.irradiance", "must not be empty");
                for (std::size_t k = 0; k < c.irradiance.size(); ++k)
                    r.non_negative(c.irradiance[k], "fidelity.irradiance[" + std::to_string(k) + "]");
            }
        }
    }
    if (K == ScenarioKind::fidelity_vs_irradiance) {
        r.positive(c.fidelity_distance_km, "fidelity.distance_km");
        r.positive(c.fidelity_altitude_km, "fidelity.altitude_km");
        r.in_range(c.source_fidelity, 0.25, 1.0, "fidelity.source_fidelity");
    }

    if (r.section(root, "repeater", {"links", "memories", "attenuation_per_km", "signal"})) {
        const auto n = root["repeater"];
        r.get(n, "repeater", "links", c.repeater_links, "a list of integers");
        r.get(n, "repeater", "memories", c.repeater_memories, "an integer");
        r.get(n, "repeater", "attenuation_per_km", c.attenuation_per_km, "1/km");
        if (const auto s = n["signal"]) {
            std::string sig;
            double v = 0.0;
            if (s.IsScalar() && (sig = s.Scalar()) == "fiber") {
                c.signal = sig;
                c.signal_speed_km_s = constants::fiber_light_speed_km_s;
            } else if (sig == "vacuum") {
                c.signal = sig;
                c.signal_speed_km_s = constants::vacuum_light_speed_km_s;
            } else if (r.get(n, "repeater", "signal", v, "fiber, vacuum or a speed in km/s")) {
                r.positive(v, "repeater.signal");
                c.signal = "custom";
                c.signal_speed_km_s = v;
            }
        }
    }
    if (K == ScenarioKind::repeater_comparison) {
        if (c.repeater_links.empty()) r.fail("repeater.links", "must not be empty");
        for (std::size_t k = 0; k < c.repeater_links.size(); ++k)
            if (c.repeater_links[k] < 1) r.fail("repeater.links[" + std::to_string(k) + "]", "must be >= 1");
        if (c.repeater_memories < 1) r.fail("repeater.memories", "must be >= 1");
        r.non_negative(c.attenuation_per_km, "repeater.attenuation_per_km");
    }

    if (!r.errors.empty()) return {std::nullopt, r.errors};
    return {c, {}};
}

// Splits "section.key=value" and writes value (parsed as YAML) into root.
inline void apply_override(YAML::Node& root, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || eq == 0)
        throw ConfigError("override '" + std::string(assignment) + "': expected section.key=value");
    const std::string path(assignment.substr(0, eq));
    const std::string value(assignment.substr(eq + 1));
    std::vector<std::string> keys;
    std::stringstream ss(path);
    for (std::string k; std::getline(ss, k, '.');) {
        if (k.empty()) throw ConfigError("override '" + path + "': empty key");
        keys.push_back(k);
    }
    YAML::Node parsed;
    try {
        parsed = YAML::Load(value);
    } catch (const YAML::Exception& e) {
        throw ConfigError("override '" + path + "': " + e.msg);
    }
    std::function<void(YAML::Node, std::size_t)> set = [&](YAML::Node node, std::size_t depth) {
        if (depth + 1 == keys.size()) {
            node[keys[depth]] = parsed;
            return;
        }
        YAML::Node child = node[keys[depth]];
        if (child.IsDefined() && !child.IsNull() && !child.IsMap())
            throw ConfigError("override '" + path + "': " + keys[depth] + " is not a section");
        if (!child.IsDefined() || child.IsNull()) {
            node[keys[depth]] = YAML::Node(YAML::NodeType::Map);
            child = node[keys[depth]];
        }
        set(child, depth + 1);
    };
    if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    set(root, 0);
}

inline YAML::Node load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    try {
        return YAML::Load(in);
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline ValidationResult validate_config_text(std::string_view text, const std::filesystem::path& base_dir = {}) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        return {std::nullopt, {std::string("<yaml>: ") + e.what()}};
    }
    return validate_config(root, base_dir);
}

// Loads, applies overrides and validates; throws ConfigErrors with the full list.
inline ScenarioConfig load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    auto root = load_config_file(path);
    for (const auto& o : overrides) apply_override(root, o);
    auto res = validate_config(root, path.parent_path());
    if (!res.ok()) throw ConfigErrors(res.errors);
    return *res.config;
}

// Normalized echo of a config. Everything that can change results is here;
// output location and worker count are kept separate.
inline nlohmann::json to_json(const ScenarioConfig& c) {
    using nlohmann::json;
    json shapes = json::array();
    for (const auto& s : c.catalog.shapes) shapes.push_back({s.num_rings, s.sats_per_ring});
    json j;
    j["scenario"] = std::string(to_string(c.kind));
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["mode"] = c.mode == CountMode::deterministic ? "deterministic" : "stochastic";
    j["clock"] = {{"duration_s", c.clock.duration_s}, {"timestep_s", c.clock.timestep_s}};
    j["constellation"] = {{"shapes", shapes},
                          {"altitudes_km", c.catalog.altitudes_km},
                          {"ring_node_offset_deg", c.ring_node_offset_deg},
                          {"inter_ring_phase_deg", c.inter_ring_phase_deg}};
    j["distances_km"] = c.catalog.distances_km;
    j["link"] = {{"receiver_radius_m", c.link.receiver_radius_m},
                 {"beam_waist_m", c.link.beam_waist_m},
                 {"wavelength_m", c.link.wavelength_m},
                 {"zenith_transmittance", c.link.zenith_transmittance}};
    j["noise"] = {{"mean_photons_arm1", c.noise.mean_photons_arm1},
                  {"mean_photons_arm2", c.noise.mean_photons_arm2},
                  {"coincidence_window_s", c.noise.coincidence_window_s},
                  {"filter_bandwidth_m", c.noise.filter_bandwidth_m},
                  {"field_of_view_sr", c.noise.field_of_view_sr},
                  {"receiver_radius_m", c.noise.receiver_radius_m},
                  {"wavelength_m", c.noise.wavelength_m}};
    j["earth"] = {{"radius_km", c.earth.radius_km},
                  {"rotation_period_s", c.earth.rotation_period_s},
                  {"mu_km3_s2", c.earth.mu_km3_s2}};
    j["simulation"] = {{"source_rate", c.source_rate},
                       {"loss_threshold_db", c.loss_threshold_db},
                       {"stop_at_first_gap", c.stop_at_first_gap},
                       {"record_series", c.record_series}};
    switch (c.kind) {
        case ScenarioKind::latitude_sweep:
            j["latitude_sweep"] = {{"latitudes_deg", c.latitudes_deg},
                                   {"longitude_separation_deg", c.longitude_separation_deg}};
            break;
        case ScenarioKind::grid_42:
            j["grid"] = {{"latitudes_deg", c.grid_latitudes_deg},
                         {"longitude_start_deg", c.grid_longitude_start_deg},
                         {"longitude_step_deg", c.grid_longitude_step_deg},
                         {"longitudes", c.grid_longitudes},
                         {"edges", c.grid_edges == GridEdges::all_nn ? "all_nn" : "diagonal"}};
            break;
        case ScenarioKind::city_pairs: {
            json pairs = json::array();
            for (const auto& [a, b] : c.city_pairs) pairs.push_back({a, b});
            j["cities"] = {{"pairs", pairs}};
            break;
        }
        case ScenarioKind::fidelity_vs_irradiance:
            j["fidelity"] = {{"distance_km", c.fidelity_distance_km},
                             {"altitude_km", c.fidelity_altitude_km},
                             {"irradiance", c.irradiance},
                             {"source_fidelity", c.source_fidelity}};
            break;
        case ScenarioKind::repeater_comparison:
            j["repeater"] = {{"links", c.repeater_links},
                             {"memories", c.repeater_memories},
                             {"attenuation_per_km", c.attenuation_per_km},
                             {"signal", c.signal},
                             {"signal_speed_km_s", c.signal_speed_km_s}};
            break;
        default: break;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Runs

struct ScenarioOutput {
    std::vector<std::pair<std::string, csv::Table>> tables;  // file name -> table
    nlohmann::json summary = nlohmann::json::object();

    [[nodiscard]] const csv::Table& table(std::string_view name) const {
        for (const auto& [n, t] : tables)
            if (n == name) return t;
        throw ConfigError("no table named " + std::string(name));
    }
};

struct RunOptions {
    std::optional<std::filesystem::path> cache_dir;
    std::function<void(std::size_t, std::size_t)> progress;
};

namespace detail {

inline std::string fmt_table_loss(double db, double threshold) {
    if (!(db <= threshold)) {
        std::ostringstream os;
        os << '>' << threshold;
        return os.str();
    }
    return csv::format_fixed(db, 1);
}

// Two stations at one latitude, `separation_deg` apart in longitude.
inline StationGraph parallel_pair(double latitude_deg, double separation_deg, const EarthModel& earth) {
    StationGraph g;
    g.add_station({"west", "west", {latitude_deg, -separation_deg / 2.0, 0.0}});
    g.add_station({"east", "east", {latitude_deg, separation_deg / 2.0, 0.0}});
    g.connect(0, 1, earth);
    return g;
}

// Some requested separation that no altitude in the grid can serve.
inline void require_feasible(const std::vector<double>& separations_km, const ScenarioConfig& c) {
    double best_chord = 0.0;
    for (double h : c.catalog.altitudes_km) best_chord = std::max(best_chord, dual_visibility_chord(h, c.earth));
    for (double d : separations_km)
        if (d >= best_chord) {
            std::ostringstream os;
            os << "station separation " << d << " km exceeds the dual-visibility chord " << best_chord
               << " km of the highest altitude in the grid; no satellite can ever see both stations";
            throw InfeasibleError(os.str());
        }
}

// Re-runs every cell with recording on: one time-series table per (cell, edge)
// plus a single gap report.
inline void add_series(const std::vector<SweepJob>& jobs, ScenarioOutput& out) {
    csv::Table index({"cell", "edge", "N_R", "N_S", "h_km", "d_km", "station_a", "station_b", "file"});
    csv::Table gaps({"cell", "edge", "start_s", "end_s", "duration_s"});
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const auto& job = jobs[k];
        const auto& ctx = *job.context;
        auto opts = ctx.options;
        opts.record_series = true;
        opts.stop_at_first_gap = false;
        const ConstellationConfig cfg{job.shape.num_rings, job.shape.sats_per_ring, job.altitude_km,
                                      ctx.ring_node_offset_deg, ctx.inter_ring_phase_deg};
        const auto sim = run_simulation(cfg, *ctx.graph, ctx.clock, ctx.link, ctx.earth, opts);
        for (std::size_t e = 0; e < sim.edges.size(); ++e) {
            const auto& r = sim.edges[e];
            const auto& ser = *r.series;
            csv::Table t({"t_s", "sat_id", "L1_km", "L2_km", "zeta1_rad", "zeta2_rad", "eta_tot", "loss_db",
                          "loss_infinite", "pairs_received"});
            for (std::size_t i = 0; i < ser.satellite.size(); ++i) {
                csv::Row row;
                row.add(static_cast<double>(i) * r.timestep_s).add(ser.satellite[i]);
                row.add(ser.slant1_km[i]).add(ser.slant2_km[i]).add(ser.zenith1_rad[i]).add(ser.zenith2_rad[i]);
                row.add(ser.eta_tot[i]).add_loss(ser.loss_db[i]).add(ser.pairs[i]);
                t.push(row);
            }
            const std::string file = "series/cell" + std::to_string(k) + "_edge" + std::to_string(e) + ".csv";
            const auto& edge = ctx.graph->edges[e];
            csv::Row row;
            row.add(static_cast<long long>(k)).add(static_cast<long long>(e));
            row.add(job.shape.num_rings).add(job.shape.sats_per_ring).add(job.altitude_km).add(edge.distance_km);
            row.add(ctx.graph->stations[edge.a].name).add(ctx.graph->stations[edge.b].name).add(file);
            index.push(row);
            for (const auto& g : r.gaps) {
                csv::Row gr;
                gr.add(static_cast<long long>(k)).add(static_cast<long long>(e));
                gr.add(g.start_s).add(g.end_s).add(g.duration_s());
                gaps.push(gr);
            }
            out.tables.emplace_back(file, std::move(t));
        }
    }
    out.tables.emplace_back("series/index.csv", std::move(index));
    out.tables.emplace_back("gaps.csv", std::move(gaps));
}

inline std::vector<CellResult> sweep(const std::vector<SweepJob>& jobs, const ScenarioConfig& c,
                                     const RunOptions& run, ScenarioOutput& out) {
    auto cells = run_sweep(jobs, c.workers, c.cache ? run.cache_dir : std::nullopt, run.progress);
    if (c.record_series) add_series(jobs, out);
    return cells;
}

inline void add_cell_columns(csv::Row& row, const CellResult& cell) {
    row.add(cell.coverage_ok).add(cell.complete);
    if (cell.complete) {
        row.add_loss(cell.avg_loss_db).add(cell.avg_rate).add(figure_of_merit_c(cell));
    } else {
        row.empty().empty().empty().empty();
    }
}

inline const std::vector<std::string> cell_header{"coverage_ok", "complete", "avg_loss_db", "avg_loss_infinite",
                                                  "avg_rate_ebits_s", "c_ebits_s_per_sat"};

inline std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline ScenarioOutput run_two_station_equator(const ScenarioConfig& c, const RunOptions& run) {
    require_feasible(c.catalog.distances_km, c);
    std::vector<StationGraph> graphs;
    for (double d : c.catalog.distances_km) graphs.push_back(StationGraph::equator_pair(d, c.earth));
    std::vector<CellContext> ctx;
    for (const auto& g : graphs) ctx.push_back(c.cell_context(g));
    std::vector<SweepJob> jobs;
    for (std::size_t i = 0; i < graphs.size(); ++i)
        for (double h : c.catalog.altitudes_km)
            for (const auto& s : c.catalog.shapes) jobs.push_back({s, h, c.catalog.distances_km[i], &ctx[i]});
    ScenarioOutput out;
    const auto cells = sweep(jobs, c, run, out);
    csv::Table sweep_t(cat({"N_R", "N_S", "h_km", "d_km"}, cell_header));
    for (const auto& cell : cells) {
        csv::Row row;
        row.add(cell.shape.num_rings).add(cell.shape.sats_per_ring).add(cell.altitude_km).add(cell.distance_km);
        add_cell_columns(row, cell);
        sweep_t.push(row);
    }

    csv::Table per_h({"d_km", "h_km", "N_opt", "C_ebits_s_per_sat", "C_N_R", "C_N_S", "R_opt_ebits_s", "R_opt_N_R",
                      "R_opt_N_S", "loss_opt_db"});
    csv::Table optima({"d_km", "h_star_km", "N_R_star", "N_S_star", "avg_loss_db", "avg_rate_ebits_s",
                       "c_ebits_s_per_sat"});
    for (double d : c.catalog.distances_km) {
        for (double h : c.catalog.altitudes_km) {
            const auto g = cells_at(cells, h, d);
            csv::Row row;
            row.add(d).add(h).add(n_opt(g));
            if (auto cc = capital_c(g)) row.add(cc->value).add(cc->shape.num_rings).add(cc->shape.sats_per_ring);
            else row.empty().empty().empty();
            if (auto ro = rate_opt(g)) row.add(ro->value).add(ro->shape.num_rings).add(ro->shape.sats_per_ring);
            else row.empty().empty().empty();
            if (auto lo = loss_opt(g)) row.add(lo->value);
            else row.empty();
            per_h.push(row);
        }
        csv::Row row;
        row.add(d);
        std::vector<CellResult> at_d;
        for (const auto& cell : cells)
            if (cell.distance_km == d) at_d.push_back(cell);
        if (auto best = best_configuration(d, cells)) {
            const auto& cell = at_d[best->index];
            row.add(cell.altitude_km).add(cell.shape.num_rings).add(cell.shape.sats_per_ring);
            row.add(cell.avg_loss_db).add(cell.avg_rate).add(best->value);
            out.summary["optima"].push_back({{"d_km", d},
                                             {"h_star_km", cell.altitude_km},
                                             {"N_R_star", cell.shape.num_rings},
                                             {"N_S_star", cell.shape.sats_per_ring},
                                             {"avg_loss_db", cell.avg_loss_db},
                                             {"avg_rate_ebits_s", cell.avg_rate},
                                             {"c_ebits_s_per_sat", best->value}});
        } else {
            row.empty().empty().empty().empty().empty().empty();
        }
        optima.push(row);
    }
    out.tables.emplace_back("sweep.csv", std::move(sweep_t));
    out.tables.emplace_back("per_altitude.csv", std::move(per_h));
    out.tables.emplace_back("optima.csv", std::move(optima));
    return out;
}

inline ScenarioOutput run_latitude_sweep(const ScenarioConfig& c, const RunOptions& run) {
    std::vector<StationGraph> graphs;
    std::vector<double> separations;
    for (double lat : c.latitudes_deg) {
        graphs.push_back(parallel_pair(lat, c.longitude_separation_deg, c.earth));
        separations.push_back(graphs.back().edges[0].distance_km);
    }
    require_feasible(separations, c);
    std::vector<CellContext> ctx;
    for (const auto& g : graphs) ctx.push_back(c.cell_context(g));
    std::vector<SweepJob> jobs;
    std::vector<double> job_lat;
    for (std::size_t i = 0; i < graphs.size(); ++i)
        for (double h : c.catalog.altitudes_km)
            for (const auto& s : c.catalog.shapes) {
                jobs.push_back({s, h, separations[i], &ctx[i]});
                job_lat.push_back(c.latitudes_deg[i]);
            }
    ScenarioOutput out;
    const auto cells = sweep(jobs, c, run, out);
    csv::Table t(cat({"latitude_deg", "N_R", "N_S", "h_km", "d_km", "gap_s"}, cell_header));
    for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& cell = cells[k];
        csv::Row row;
        row.add(job_lat[k]).add(cell.shape.num_rings).add(cell.shape.sats_per_ring).add(cell.altitude_km);
        row.add(cell.distance_km);
        if (cell.complete) row.add(cell.edge_gap_s.at(0));
        else row.empty();
        add_cell_columns(row, cell);
        t.push(row);
    }
    out.tables.emplace_back("latitude.csv", std::move(t));
    return out;
}

struct GridLayout {
    StationGraph graph;
    std::vector<std::string> edge_kind;
};

inline GridLayout make_grid(const ScenarioConfig& c) {
    GridLayout out;
    const auto rows = c.grid_latitudes_deg.size();
    const auto cols = static_cast<std::size_t>(c.grid_longitudes);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const double lon = c.grid_longitude_start_deg + static_cast<double>(j) * c.grid_longitude_step_deg;
            const std::string id = "r" + std::to_string(i) + "c" + std::to_string(j);
            out.graph.add_station({id, id, {c.grid_latitudes_deg[i], lon, 0.0}});
        }
    auto at = [&](std::size_t i, std::size_t j) { return i * cols + j; };
    auto link = [&](std::size_t a, std::size_t b, const char* kind) {
        out.graph.connect(a, b, c.earth);
        out.edge_kind.emplace_back(kind);
    };
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            if (c.grid_edges == GridEdges::all_nn) {
                if (j + 1 < cols) link(at(i, j), at(i, j + 1), "horizontal");
                if (i + 1 < rows) link(at(i, j), at(i + 1, j), "vertical");
            }
            if (i + 1 < rows && j + 1 < cols) link(at(i, j), at(i + 1, j + 1), "diagonal");
            if (i + 1 < rows && j >= 1) link(at(i, j), at(i + 1, j - 1), "diagonal");
        }
    return out;
}

inline ScenarioOutput run_grid(const ScenarioConfig& c, const RunOptions& run) {
    const auto layout = make_grid(c);
    const auto ctx = c.cell_context(layout.graph);
    std::vector<SweepJob> jobs;
    for (double h : c.catalog.altitudes_km)
        for (const auto& s : c.catalog.shapes) jobs.push_back({s, h, 0.0, &ctx});
    ScenarioOutput out;
    const auto cells = sweep(jobs, c, run, out);
    csv::Table edges({"N_R", "N_S", "h_km", "edge", "kind", "station_a", "lat_a_deg", "lon_a_deg", "station_b",
                      "lat_b_deg", "lon_b_deg", "d_km", "covered", "gap_s", "avg_loss_db", "avg_loss_infinite",
                      "avg_rate_ebits_s"});
    csv::Table summary(cat({"N_R", "N_S", "h_km", "edges"},
                           {"coverage_ok", "complete", "graph_avg_loss_db", "graph_avg_loss_infinite",
                            "graph_avg_rate_ebits_s", "c_ebits_s_per_sat", "min_edge_loss_db", "max_edge_loss_db"}));
    const auto& g = layout.graph;
    for (const auto& cell : cells) {
        if (cell.complete)
            for (std::size_t k = 0; k < g.edges.size(); ++k) {
                const auto& e = g.edges[k];
                const auto& a = g.stations[e.a];
                const auto& b = g.stations[e.b];
                csv::Row row;
                row.add(cell.shape.num_rings).add(cell.shape.sats_per_ring).add(cell.altitude_km);
                row.add(static_cast<long long>(k)).add(layout.edge_kind[k]);
                row.add(a.id).add(a.position.latitude_deg).add(a.position.longitude_deg);
                row.add(b.id).add(b.position.latitude_deg).add(b.position.longitude_deg).add(e.distance_km);
                row.add(cell.edge_gap_s[k] == 0.0).add(cell.edge_gap_s[k]).add_loss(cell.edge_loss_db[k]);
                row.add(cell.edge_rate[k]);
                edges.push(row);
            }
        csv::Row row;
        row.add(cell.shape.num_rings).add(cell.shape.sats_per_ring).add(cell.altitude_km);
        row.add(static_cast<long long>(g.edges.size()));
        add_cell_columns(row, cell);
        if (cell.complete) {
            const auto [lo, hi] = std::minmax_element(cell.edge_loss_db.begin(), cell.edge_loss_db.end());
            row.add(*lo).add(*hi);
        } else {
            row.empty().empty();
        }
        summary.push(row);
    }
    csv::Table merits({"h_km", "N_opt", "C_ebits_s_per_sat", "C_N_R", "C_N_S", "R_opt_ebits_s", "loss_opt_db"});
    for (double h : c.catalog.altitudes_km) {
        const auto m = multi_station_merits(g, h, cells);
        csv::Row row;
        row.add(h).add(m.n_opt);
        if (m.capital_c) row.add(m.capital_c->value).add(m.capital_c->shape.num_rings).add(m.capital_c->shape.sats_per_ring);
        else row.empty().empty().empty();
        if (m.rate_opt) row.add(m.rate_opt->value);
        else row.empty();
        if (m.loss_opt) row.add(m.loss_opt->value);
        else row.empty();
        merits.push(row);
    }
    out.tables.emplace_back("grid_edges.csv", std::move(edges));
    out.tables.emplace_back("grid_summary.csv", std::move(summary));
    out.tables.emplace_back("grid_merits.csv", std::move(merits));
    return out;
}

inline StationGraph city_graph(const ScenarioConfig& c, const CityDatabase& db) {
    StationGraph g;
    std::map<std::string, std::size_t> index;
    auto station = [&](const std::string& name) {
        if (auto it = index.find(name); it != index.end()) return it->second;
        const City* city = db.find(name);
        if (!city) throw ConfigError("unknown city '" + name + "'");
        const auto k = g.add_station({name, name, city->position});
        index[name] = k;
        return k;
    };
    for (const auto& [a, b] : c.city_pairs) {
        const auto ia = station(a);
        const auto ib = station(b);
        g.connect(ia, ib, c.earth);
    }
    return g;
}

inline ScenarioOutput run_city_pairs(const ScenarioConfig& c, const RunOptions& run) {
    const auto db = CityDatabase::load(c.cities_file);
    const auto graph = city_graph(c, db);
    const auto ctx = c.cell_context(graph);
    std::vector<SweepJob> jobs;
    for (const auto& s : c.catalog.shapes)
        for (double h : c.catalog.altitudes_km) jobs.push_back({s, h, 0.0, &ctx});
    ScenarioOutput out;
    const auto cells = sweep(jobs, c, run, out);
    csv::Table longform({"N_R", "N_S", "h_km", "city_a", "city_b", "d_km", "gap_s", "avg_loss_db",
                         "avg_loss_infinite", "avg_rate_ebits_s"});
    for (const auto& cell : cells)
        for (std::size_t k = 0; k < graph.edges.size(); ++k) {
            const auto& e = graph.edges[k];
            csv::Row row;
            row.add(cell.shape.num_rings).add(cell.shape.sats_per_ring).add(cell.altitude_km);
            row.add(graph.stations[e.a].name).add(graph.stations[e.b].name).add(e.distance_km);
            if (cell.complete) row.add(cell.edge_gap_s[k]).add_loss(cell.edge_loss_db[k]).add(cell.edge_rate[k]);
            else row.empty().empty().empty().empty();
            longform.push(row);
            const double loss = cell.edge_loss_db[k];
            out.summary["edges"].push_back({{"N_R", cell.shape.num_rings},
                                            {"N_S", cell.shape.sats_per_ring},
                                            {"h_km", cell.altitude_km},
                                            {"city_a", graph.stations[e.a].name},
                                            {"city_b", graph.stations[e.b].name},
                                            {"d_km", e.distance_km},
                                            {"avg_loss_db", std::isfinite(loss) ? nlohmann::json(loss) : nullptr},
                                            {"avg_rate", cell.edge_rate[k]}});
        }

    std::vector<std::string> header{"N_R", "N_S", "pair", "d_km"};
    for (double h : c.catalog.altitudes_km) header.push_back(csv::format_double(h));
    csv::Table matrix(header);
    std::size_t base = 0;
    for (const auto& s : c.catalog.shapes) {
        for (std::size_t k = 0; k < graph.edges.size(); ++k) {
            const auto& e = graph.edges[k];
            csv::Row row;
            row.add(s.num_rings).add(s.sats_per_ring);
            row.add(graph.stations[e.a].name + " - " + graph.stations[e.b].name);
            row.add(csv::format_fixed(e.distance_km, 0));
            for (std::size_t i = 0; i < c.catalog.altitudes_km.size(); ++i) {
                const auto& cell = cells[base + i];
                if (cell.complete) row.add(fmt_table_loss(cell.edge_loss_db[k], c.loss_threshold_db));
                else row.empty();
            }
            matrix.push(row);
        }
        base += c.catalog.altitudes_km.size();
    }
    out.tables.emplace_back("city_pairs.csv", std::move(longform));
    out.tables.emplace_back("table.csv", std::move(matrix));
    return out;
}

inline ScenarioOutput run_static_midpoint(const ScenarioConfig& c) {
    ScenarioOutput out;
    csv::Table t({"d_km", "h_km", "slant_km", "zenith_rad", "eta_sg", "eta_pair", "loss_db", "loss_infinite"});
    csv::Table best({"d_km", "best_h_km", "loss_db", "loss_infinite", "interior"});
    for (double d : c.catalog.distances_km) {
        std::optional<std::size_t> arg;
        double best_eta = 0.0;
        for (std::size_t i = 0; i < c.catalog.altitudes_km.size(); ++i) {
            const double h = c.catalog.altitudes_km[i];
            const double slant = midpoint_slant_range(d, h, c.earth);
            const double cz = cos_zenith(slant, h, c.earth);
            const double eta = midpoint_link_transmittance(d, h, c.link, c.earth);
            const double pair = eta * eta;
            csv::Row row;
            row.add(d).add(h).add(slant);
            if (cz > 0.0) row.add(std::acos(std::min(1.0, cz)));
            else row.empty();
            row.add(eta).add(pair).add_loss(to_loss_db(pair));
            t.push(row);
            if (pair > best_eta) {
                best_eta = pair;
                arg = i;
            }
        }
        csv::Row row;
        row.add(d);
        if (arg) {
            row.add(c.catalog.altitudes_km[*arg]).add_loss(to_loss_db(best_eta));
            row.add(*arg != 0 && *arg + 1 != c.catalog.altitudes_km.size());
        } else {
            row.empty().add_loss(infinite_loss_db).add(false);
        }
        best.push(row);
    }
    out.tables.emplace_back("static.csv", std::move(t));
    out.tables.emplace_back("static_best.csv", std::move(best));
    return out;
}

inline ScenarioOutput run_fidelity(const ScenarioConfig& c) {
    ScenarioOutput out;
    const auto curve = fidelity_vs_irradiance_curve(c.fidelity_distance_km, c.fidelity_altitude_km, c.irradiance,
                                                    c.link, c.noise, c.earth);
    csv::Table t({"irradiance_W_m2_um_sr", "mean_photons", "eta_sg", "snr", "fidelity_ideal", "fidelity_nonideal",
                  "fidelity_exact", "valid"});
    for (const auto& p : curve) {
        csv::Row row;
        row.add(p.irradiance).add(p.mean_photons).add(p.eta_sg);
        if (p.mean_photons > 0.0) row.add(p.eta_sg / p.mean_photons);
        else row.add(std::numeric_limits<double>::infinity());
        row.add(p.fidelity).add(fidelity_nonideal(c.source_fidelity, p.eta_sg, p.mean_photons));
        if (p.mean_photons <= 1.0 && p.eta_sg > 0.0) {
            const auto a = arm_coefficients(p.eta_sg, p.mean_photons);
            row.add(coincidence_fidelity(a, a));
        } else {
            row.empty();
        }
        row.add(p.valid);
        t.push(row);
    }
    out.summary["eta_sg"] = curve.empty() ? 0.0 : curve.front().eta_sg;
    out.tables.emplace_back("fidelity.csv", std::move(t));
    return out;
}

inline ScenarioOutput run_repeater(const ScenarioConfig& c, const RunOptions& run) {
    std::vector<StationGraph> graphs;
    for (double d : c.catalog.distances_km) graphs.push_back(StationGraph::equator_pair(d, c.earth));
    std::vector<CellContext> ctx;
    for (const auto& g : graphs) ctx.push_back(c.cell_context(g));
    std::vector<SweepJob> jobs;
    for (std::size_t i = 0; i < graphs.size(); ++i)
        for (const auto& s : c.catalog.shapes)
            for (double h : c.catalog.altitudes_km) jobs.push_back({s, h, c.catalog.distances_km[i], &ctx[i]});
    ScenarioOutput out;
    const auto cells = sweep(jobs, c, run, out);
    csv::Table rates({"d_km", "kind", "N_R", "N_S", "h_km", "M", "N_mem", "rate_ebits_s"});
    // repeater[d][m]
    std::vector<std::vector<double>> rep(c.catalog.distances_km.size());
    for (std::size_t i = 0; i < c.catalog.distances_km.size(); ++i) {
        const double d = c.catalog.distances_km[i];
        for (int m : c.repeater_links) {
            RepeaterChainConfig rc{d, m, c.repeater_memories, c.attenuation_per_km, c.signal_speed_km_s};
            const double rate = repeater_rate(rc);
            rep[i].push_back(rate);
            csv::Row row;
            row.add(d).add("repeater").empty().empty().empty().add(m).add(c.repeater_memories).add(rate);
            rates.push(row);
        }
    }
    for (const auto& cell : cells) {
        csv::Row row;
        row.add(cell.distance_km).add("satellite").add(cell.shape.num_rings).add(cell.shape.sats_per_ring);
        row.add(cell.altitude_km).empty().empty().add(cell.avg_rate);
        rates.push(row);
    }
    csv::Table cross({"N_R", "N_S", "h_km", "M", "N_mem", "signal_speed_km_s", "first_d_km"});
    const std::size_t per_d = c.catalog.shapes.size() * c.catalog.altitudes_km.size();
    for (std::size_t si = 0; si < per_d; ++si)
        for (std::size_t mi = 0; mi < c.repeater_links.size(); ++mi) {
            std::optional<double> first;
            for (std::size_t i = 0; i < c.catalog.distances_km.size() && !first; ++i)
                if (cells[i * per_d + si].avg_rate > rep[i][mi]) first = c.catalog.distances_km[i];
            const auto& cell = cells[si];
            csv::Row row;
            row.add(cell.shape.num_rings).add(cell.shape.sats_per_ring).add(cell.altitude_km);
            row.add(c.repeater_links[mi]).add(c.repeater_memories).add(c.signal_speed_km_s).add(first);
            cross.push(row);
            out.summary["crossover"].push_back({{"N_R", cell.shape.num_rings},
                                                {"N_S", cell.shape.sats_per_ring},
                                                {"h_km", cell.altitude_km},
                                                {"M", c.repeater_links[mi]},
                                                {"first_d_km", first ? nlohmann::json(*first) : nullptr}});
        }
    out.tables.emplace_back("rates.csv", std::move(rates));
    out.tables.emplace_back("crossover.csv", std::move(cross));
    return out;
}

}  // namespace detail

// Pure computation; writes nothing except sweep cache entries.
inline ScenarioOutput execute_scenario(const ScenarioConfig& c, const RunOptions& run = {}) {
    switch (c.kind) {
        case ScenarioKind::two_station_equator: return detail::run_two_station_equator(c, run);
        case ScenarioKind::latitude_sweep: return detail::run_latitude_sweep(c, run);
        case ScenarioKind::grid_42: return detail::run_grid(c, run);
        case ScenarioKind::city_pairs: return detail::run_city_pairs(c, run);
        case ScenarioKind::static_midpoint: return detail::run_static_midpoint(c);
        case ScenarioKind::fidelity_vs_irradiance: return detail::run_fidelity(c);
        case ScenarioKind::repeater_comparison: return detail::run_repeater(c, run);
    }
    throw ConfigError("unhandled scenario");
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline nlohmann::json constants_json() {
    return {{"planck_J_s", constants::planck},
            {"speed_of_light_m_s", constants::speed_of_light},
            {"fiber_attenuation_per_km", constants::fiber_attenuation_per_km},
            {"fiber_light_speed_km_s", constants::fiber_light_speed_km_s},
            {"background_validity_limit", background_validity_limit}};
}

// Everything that determines the outputs, and its hash.
inline nlohmann::json build_manifest(const ScenarioConfig& c) {
    nlohmann::json m;
    m["tool"] = "satnet";
    m["version"] = std::string(version);
    m["config"] = to_json(c);
    m["constants"] = constants_json();
    if (c.kind == ScenarioKind::city_pairs) {
        std::ifstream in(c.cities_file, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        m["inputs"] = {{"cities_fnv1a", hex64(fnv1a(ss.str()))}};
    }
    m["manifest_hash"] = hex64(fnv1a(m.dump()));
    return m;
}

struct RunReport {
    std::string manifest_hash;
    std::vector<std::filesystem::path> files;
    ScenarioOutput output;
};

inline RunReport run_scenario(const ScenarioConfig& c, RunOptions run = {}) {
    auto manifest = build_manifest(c);
    const std::string hash = manifest["manifest_hash"];
    RunReport report;
    report.manifest_hash = hash;

    std::error_code ec;
    std::filesystem::create_directories(c.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + c.output_dir.string() + ": " + ec.message());
    if (c.cache && !run.cache_dir) run.cache_dir = c.output_dir / "cache";

    report.output = execute_scenario(c, run);

    const std::string comment =
        "satnet " + std::string(version) + " scenario=" + std::string(to_string(c.kind)) + " manifest=" + hash +
        " seed=" + std::to_string(c.seed);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [name, table] : report.output.tables) {
        const auto path = c.output_dir / name;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
        table.write(path, comment);
        report.files.push_back(path);
        files.push_back(name);
    }
    manifest["outputs"] = files;
    manifest["summary"] = report.output.summary;
    const auto mpath = c.output_dir / "manifest.json";
    std::ofstream os(mpath, std::ios::binary);
    os << manifest.dump(2) << '\n';
    if (!os) throw IoError("cannot write " + mpath.string());
    report.files.push_back(mpath);
    return report;
}

}  // namespace satnet
