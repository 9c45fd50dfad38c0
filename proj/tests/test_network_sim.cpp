#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "assignment_oracle.hpp"
#include "satnet/network_sim.hpp"
#include "support.hpp"

using namespace satnet;
using satnet::testing::Gen;
using satnet::testing::admissible_matchings;

namespace {

const EarthModel earth{};
const OpticalLinkParams link_params{};

std::vector<int> assign(const std::vector<Candidate>& c, std::size_t pairs, std::size_t sats) {
    return assign_satellites(c, pairs, sats);
}

ConstellationConfig walker(int rings, int per_ring, double h) { return {rings, per_ring, h, 0.0, 0.0}; }

SimulationResult simulate(const ConstellationConfig& cfg, const StationGraph& g, double duration,
                          SimulationOptions opt = {}, double dt = 1.0) {
    return run_simulation(cfg, g, SimulationClock{duration, dt}, link_params, earth, opt);
}

}  // namespace

TEST(Assignment, SingleSatelliteSinglePair) {
    EXPECT_EQ(assign({{1, 0, 50.0}}, 1, 1), std::vector<int>{1});
}

TEST(Assignment, LowerLossPairWins) {
    EXPECT_EQ(assign({{1, 0, 70.0}, {1, 1, 60.0}}, 2, 1), (std::vector<int>{0, 1}));
}

TEST(Assignment, LonePairRule) {
    // Pair 0 sees only S=1; pair 1 sees S=1 at 55 dB and S'=2 at 65 dB.
    EXPECT_EQ(assign({{1, 0, 70.0}, {1, 1, 55.0}, {2, 1, 65.0}}, 2, 2), (std::vector<int>{1, 2}));
}

TEST(Assignment, CompetingLonePairs) {
    EXPECT_EQ(assign({{1, 0, 70.0}, {1, 1, 60.0}}, 2, 1), (std::vector<int>{0, 1}));
    EXPECT_EQ(assign({{1, 0, 60.0}, {1, 1, 60.0}}, 2, 1), (std::vector<int>{1, 0}));
}

TEST(Assignment, ThreeByThreeFixture) {
    // Greedy order: (2,p1,50) (1,p0,52) (3,p2,58); the rest are blocked.
    const std::vector<Candidate> c{{1, 0, 52.0}, {2, 0, 53.0}, {3, 0, 54.0}, {1, 1, 51.0}, {2, 1, 50.0},
                                   {3, 1, 56.0}, {1, 2, 57.0}, {2, 2, 55.0}, {3, 2, 58.0}};
    EXPECT_EQ(assign(c, 3, 3), (std::vector<int>{1, 2, 3}));

    // Satellite 1 is best for everyone: the lowest-loss pair gets it.
    const std::vector<Candidate> d{{1, 0, 52.0}, {2, 0, 60.0}, {1, 1, 51.0}, {3, 1, 61.0}, {1, 2, 53.0},
                                   {2, 2, 54.0}};
    EXPECT_EQ(assign(d, 3, 3), (std::vector<int>{0, 1, 2}));
}

TEST(Assignment, EqualLossTieBreaksOnSatelliteThenPair) {
    const std::vector<Candidate> c{{2, 0, 60.0}, {1, 0, 60.0}, {1, 1, 60.0}, {2, 1, 60.0}};
    EXPECT_EQ(assign(c, 2, 2), (std::vector<int>{1, 2}));
}

TEST(Assignment, EmptyAndBounds) {
    EXPECT_EQ(assign({}, 3, 4), (std::vector<int>{0, 0, 0}));
    EXPECT_THROW(assign({{5, 0, 50.0}}, 1, 4), ConfigError);
    EXPECT_THROW(assign({{1, 2, 50.0}}, 1, 4), ConfigError);
}

TEST(Assignment, AgreesWithBruteForceOnRandomSnapshots) {
    Gen g(21);
    for (int c = 0; c < 2000; ++c) {
        const int sats = g.integer(1, 6);
        const int pairs = g.integer(1, 4);
        std::vector<Candidate> cand;
        for (int s = 1; s <= sats; ++s)
            for (int p = 0; p < pairs; ++p)
                if (g.uniform(0.0, 1.0) < 0.5)
                    cand.push_back({s, static_cast<std::size_t>(p), static_cast<double>(g.integer(40, 48))});
        const auto got = assign(cand, pairs, sats);
        const auto all = admissible_matchings(cand, pairs, sats);
        ASSERT_EQ(all.size(), 1u) << "case " << c;
        EXPECT_EQ(got, all.front()) << "case " << c;

        std::set<int> seen;
        for (std::size_t p = 0; p < got.size(); ++p) {
            if (got[p] == 0) continue;
            EXPECT_TRUE(seen.insert(got[p]).second);
            EXPECT_TRUE(std::any_of(cand.begin(), cand.end(),
                                    [&](const Candidate& x) { return x.pair == p && x.satellite == got[p]; }));
        }
        // No spurious gaps: a pair whose options are all free ends up served.
        for (int p = 0; p < pairs; ++p) {
            bool has = false, contested = false;
            for (const auto& x : cand)
                if (x.pair == static_cast<std::size_t>(p)) {
                    has = true;
                    for (const auto& y : cand) contested |= y.satellite == x.satellite && y.pair != x.pair;
                }
            if (has && !contested) {
                EXPECT_NE(got[p], 0);
            }
        }
    }
}

TEST(InRange, Predicate) {
    LinkSample s;
    s.eta1 = 1e-3;
    s.eta2 = 1e-3;
    s.eta_tot = 1e-6;
    s.loss_db = 60.0;
    EXPECT_TRUE(in_range(s));
    s.eta2 = 0.0;
    EXPECT_FALSE(in_range(s));
    s.eta2 = 1e-5;
    s.eta1 = 1e-5;
    s.eta_tot = 1e-10;
    s.loss_db = 100.0;
    EXPECT_FALSE(in_range(s));
    s.loss_db = 90.0;
    EXPECT_FALSE(in_range(s));
}

TEST(InRange, MidpointZenithSample) {
    const auto g = StationGraph::equator_pair(500.0, earth);
    // Satellite straight above longitude 0 at t = 0 (no Earth rotation yet).
    const CartesianPosition sat{earth.radius_km + 500.0, 0.0, 0.0};
    const auto s = make_link_sample(0.0, 1, sat, 0, ground_station_position(g.stations[0].position, earth, 0.0), 1,
                                    ground_station_position(g.stations[1].position, earth, 0.0), 500.0, link_params, earth);
    EXPECT_NEAR(s.slant1_km, s.slant2_km, 1e-9);
    EXPECT_TRUE(in_range(s));
    EXPECT_GT(s.loss_db, 34.0);
    EXPECT_LT(s.loss_db, 40.0);
    EXPECT_NEAR(s.eta_tot, midpoint_pair_transmittance(500.0, 500.0, link_params, earth), 1e-15);

    const CartesianPosition far_side{-(earth.radius_km + 500.0), 0.0, 0.0};
    const auto t = make_link_sample(0.0, 1, far_side, 0, ground_station_position(g.stations[0].position, earth, 0.0),
                                    1, ground_station_position(g.stations[1].position, earth, 0.0), 500.0, link_params,
                                    earth);
    EXPECT_FALSE(in_range(t));
}

TEST(Averages, Loss) {
    const std::vector<double> constant(10, 1e-6);
    EXPECT_NEAR(average_loss_db(constant), 60.0, 1e-12);
    std::vector<double> half(10, 0.0);
    std::fill(half.begin(), half.begin() + 5, 1e-6);
    EXPECT_NEAR(average_loss_db(half), 63.01029995663981, 1e-12);  // hand mean, then log
    const std::vector<double> one{3e-7};
    EXPECT_DOUBLE_EQ(average_loss_db(one), to_loss_db(3e-7));
    const std::vector<double> zeros(4, 0.0);
    EXPECT_TRUE(std::isinf(average_loss_db(zeros)));
}

TEST(Averages, Rate) {
    const std::vector<double> per_step(100, 1e9 * 1e-6);
    EXPECT_NEAR(average_rate(per_step, 1.0), 1000.0, 1e-9);
    EXPECT_EQ(average_rate(std::vector<double>(5, 0.0), 1.0), 0.0);
    EXPECT_NEAR(average_rate(std::vector<double>(5, 20.0), 10.0), 2.0, 1e-15);
}

TEST(SamplePairCount, Deterministic) {
    EXPECT_EQ(sample_pair_count(0.0, 1e9, 1.0), 0u);
    EXPECT_EQ(sample_pair_count(1.0, 1e9, 1.0), 1'000'000'000u);
    EXPECT_EQ(sample_pair_count(1e-6, 1e9, 1.0), 1000u);
    EXPECT_EQ(sample_pair_count(1.26e-6, 1e9, 1.0), 1260u);
    EXPECT_EQ(sample_pair_count(0.5e-9, 1e9, 1.0), 1u);  // round half away from zero
    EXPECT_THROW(sample_pair_count(1.5, 1e9, 1.0), DomainError);
}

TEST(SamplePairCount, StochasticEdges) {
    auto rng = substream(1, 0);
    for (int k = 0; k < 20; ++k) {
        EXPECT_EQ(sample_pair_count(0.0, 1e9, 1.0, &rng), 0u);
        EXPECT_EQ(sample_pair_count(1.0, 1e9, 1.0, &rng), 1'000'000'000u);
    }
}

TEST(SamplePairCount, BinomialMoments) {
    // n = 1e9, p = 1e-6: mean 1000, sigma ~31.6.
    auto rng = substream(7, 3);
    constexpr int draws = 1000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < draws; ++k) {
        const auto x = static_cast<double>(sample_pair_count(1e-6, 1e9, 1.0, &rng));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    const double sigma = std::sqrt(1e9 * 1e-6 * (1.0 - 1e-6));
    EXPECT_NEAR(mean, 1000.0, 3.0 * sigma / std::sqrt(draws));
    EXPECT_NEAR(var, sigma * sigma, 0.15 * sigma * sigma);
}

TEST(StationGraph, Validation) {
    auto g = StationGraph::equator_pair(1500.0, earth);
    EXPECT_NEAR(g.edges[0].distance_km, 1500.0, 1e-9);
    EXPECT_NO_THROW(g.validate(earth));
    g.edges[0].distance_km *= 1.02;
    EXPECT_THROW(g.validate(earth), ConfigError);
    g.edges[0] = {0, 0, 0.0};
    EXPECT_THROW(g.validate(earth), ConfigError);
    g.edges[0] = {0, 5, 0.0};
    EXPECT_THROW(g.validate(earth), ConfigError);
    EXPECT_THROW(g.connect(0, 7, earth), ConfigError);
}

TEST(SimulationClock, Validation) {
    EXPECT_EQ((SimulationClock{86400.0, 10.0}).steps(), 8640u);
    EXPECT_THROW((SimulationClock{100.0, 3.0}).validate(), ConfigError);
    EXPECT_THROW((SimulationClock{100.0, 0.0}).validate(), ConfigError);
}

TEST(Simulation, ConfigErrorsBeforeStart) {
    const auto g = StationGraph::equator_pair(1500.0, earth);
    EXPECT_THROW(simulate(walker(0, 3, 1000.0), g, 10.0), ConfigError);
    EXPECT_THROW(simulate(walker(3, 3, -5.0), g, 10.0), ConfigError);
    StationGraph empty = g;
    empty.edges.clear();
    EXPECT_THROW(simulate(walker(3, 3, 1000.0), empty, 10.0), ConfigError);
}

TEST(Simulation, NothingInRangeIsOneGap) {
    // Stations 8000 km apart cannot share a 300 km satellite.
    const auto g = StationGraph::equator_pair(8000.0, earth);
    const auto r = simulate(walker(4, 4, 300.0), g, 3600.0);
    ASSERT_EQ(r.edges.size(), 1u);
    const auto& e = r.edges[0];
    EXPECT_TRUE(std::isinf(e.average_loss_db()));
    EXPECT_EQ(e.average_rate(), 0.0);
    ASSERT_EQ(e.gaps.size(), 1u);
    EXPECT_EQ(e.gaps[0].start_s, 0.0);
    EXPECT_EQ(e.gaps[0].end_s, 3600.0);
    EXPECT_FALSE(r.all_covered());
}

TEST(Simulation, DeterministicRateIsLinearInSourceRate) {
    const auto g = StationGraph::equator_pair(1500.0, earth);
    SimulationOptions opt;
    const auto a = simulate(walker(7, 13, 1000.0), g, 7200.0, opt);
    opt.source_rate *= 2.0;
    const auto b = simulate(walker(7, 13, 1000.0), g, 7200.0, opt);
    EXPECT_GT(a.average_rate(), 0.0);
    EXPECT_EQ(b.average_rate(), 2.0 * a.average_rate());
    EXPECT_EQ(a.average_loss_db(), b.average_loss_db());
}

TEST(Simulation, StochasticIsBitReproducible) {
    const auto g = StationGraph::equator_pair(1500.0, earth);
    SimulationOptions opt;
    opt.mode = CountMode::stochastic;
    opt.seed = 42;
    opt.record_series = true;
    const auto a = simulate(walker(7, 13, 1000.0), g, 3600.0, opt);
    const auto b = simulate(walker(7, 13, 1000.0), g, 3600.0, opt);
    EXPECT_EQ(a.edges[0].series->pairs, b.edges[0].series->pairs);
    EXPECT_EQ(a.edges[0].pair_sum, b.edges[0].pair_sum);
    opt.seed = 43;
    const auto c = simulate(walker(7, 13, 1000.0), g, 3600.0, opt);
    EXPECT_NE(a.edges[0].series->pairs, c.edges[0].series->pairs);
}

TEST(Simulation, StochasticTracksDeterministic) {
    const auto g = StationGraph::equator_pair(1500.0, earth);
    SimulationOptions opt;
    const auto det = simulate(walker(7, 13, 1000.0), g, 21600.0, opt);
    opt.mode = CountMode::stochastic;
    opt.seed = 5;
    const auto sto = simulate(walker(7, 13, 1000.0), g, 21600.0, opt);
    EXPECT_NEAR(sto.average_rate(), det.average_rate(), 0.01 * det.average_rate());
    EXPECT_EQ(sto.average_loss_db(), det.average_loss_db());
}

TEST(Simulation, AggregatesMatchSeries) {
    const auto g = StationGraph::equator_pair(2500.0, earth);
    SimulationOptions opt;
    opt.record_series = true;
    opt.record_assignments = true;
    const auto r = simulate(walker(5, 6, 1500.0), g, 20000.0, opt);
    const auto& e = r.edges[0];
    const auto& s = *e.series;
    ASSERT_EQ(s.eta_tot.size(), e.steps);
    EXPECT_NEAR(average_loss_db(s.eta_tot), e.average_loss_db(), 1e-9 * e.average_loss_db());
    EXPECT_NEAR(average_rate(s.pairs, 1.0), e.average_rate(), 1e-9 * e.average_rate());
    EXPECT_EQ(static_cast<std::size_t>(std::count_if(s.satellite.begin(), s.satellite.end(), [](int x) { return x != 0; })),
              e.assigned_steps);

    // Gaps are exactly the maximal runs of unassigned steps.
    std::vector<CoverageGap> rebuilt;
    for (std::size_t k = 0; k < s.satellite.size(); ++k) {
        if (s.satellite[k] != 0) continue;
        const double t = static_cast<double>(k);
        if (!rebuilt.empty() && rebuilt.back().end_s == t)
            rebuilt.back().end_s = t + 1.0;
        else
            rebuilt.push_back({t, t + 1.0});
    }
    ASSERT_EQ(rebuilt.size(), e.gaps.size());
    for (std::size_t k = 0; k < rebuilt.size(); ++k) {
        EXPECT_EQ(rebuilt[k].start_s, e.gaps[k].start_s);
        EXPECT_EQ(rebuilt[k].end_s, e.gaps[k].end_s);
    }
    EXPECT_FALSE(e.gaps.empty());

    for (std::size_t k = 0; k < s.satellite.size(); ++k) {
        if (s.satellite[k] == 0) {
            EXPECT_EQ(s.eta_tot[k], 0.0);
            EXPECT_TRUE(std::isnan(s.slant1_km[k]));
        } else {
            EXPECT_LT(s.loss_db[k], constants::loss_threshold_db);
            EXPECT_NEAR(zenith_angle(s.slant1_km[k], 1500.0, earth), s.zenith1_rad[k], 1e-12);
        }
    }
    ASSERT_EQ(r.assignments.size(), e.steps);
    EXPECT_EQ(r.assignments[17].satellite_for_pair[0], s.satellite[17]);
}

TEST(Simulation, MultiEdgeAssignmentsAreMatchings) {
    StationGraph g;
    g.add_station({"a", "a", {0.0, 0.0, 0.0}});
    g.add_station({"b", "b", {0.0, 15.0, 0.0}});
    g.add_station({"c", "c", {12.0, 7.0, 0.0}});
    g.add_station({"d", "d", {-10.0, 5.0, 0.0}});
    g.connect(0, 1, earth);
    g.connect(1, 2, earth);
    g.connect(0, 2, earth);
    g.connect(2, 3, earth);
    SimulationOptions opt;
    opt.record_assignments = true;
    const auto r = simulate(walker(6, 8, 1200.0), g, 14400.0, opt, 5.0);
    std::size_t busy = 0;
    for (const auto& rec : r.assignments) {
        std::set<int> used;
        std::size_t served = 0;
        for (int s : rec.satellite_for_pair)
            if (s != 0) {
                EXPECT_TRUE(used.insert(s).second) << "t=" << rec.t;
                ++served;
            }
        busy += served >= 2;
    }
    EXPECT_GT(busy, 0u);
}

TEST(Simulation, StopAtFirstGap) {
    const auto g = StationGraph::equator_pair(2500.0, earth);
    SimulationOptions opt;
    opt.stop_at_first_gap = true;
    const auto r = simulate(walker(5, 6, 1500.0), g, 20000.0, opt);
    EXPECT_FALSE(r.completed());
    EXPECT_FALSE(r.all_covered());
    ASSERT_EQ(r.edges[0].gaps.size(), 1u);
    EXPECT_EQ(r.edges[0].gaps[0].end_s, static_cast<double>(r.steps_run));
    EXPECT_EQ(r.edges[0].steps, r.steps_run);
}

TEST(Simulation, PeriodicBumpsInRate) {
    const auto g = StationGraph::equator_pair(1000.0, earth);
    SimulationOptions opt;
    opt.record_series = true;
    const auto r = simulate(walker(9, 10, 1500.0), g, 86400.0, opt);
    const auto& eta = r.edges[0].series->eta_tot;
    // Find a 3000 s window with no gap and count local maxima of the rate.
    bool checked = false;
    for (std::size_t start = 0; start + 3000 <= eta.size() && !checked; start += 500) {
        if (std::any_of(eta.begin() + start, eta.begin() + start + 3000, [](double x) { return x == 0.0; }))
            continue;
        int peaks = 0;
        for (std::size_t k = start + 1; k + 1 < start + 3000; ++k)
            peaks += eta[k] > eta[k - 1] && eta[k] >= eta[k + 1];
        EXPECT_GT(peaks, 1);
        checked = true;
    }
    EXPECT_TRUE(checked);
}

TEST(Simulation, MoreSatellitesPerRingNeverAddGapSeconds) {
    Gen g(23);
    for (int c = 0; c < 6; ++c) {
        const int rings = g.integer(3, 7);
        const int per = g.integer(3, 9);
        const double h = g.uniform(800.0, 2500.0);
        const auto graph = StationGraph::equator_pair(g.uniform(500.0, 2500.0), earth);
        const auto a = simulate(walker(rings, per, h), graph, 86400.0, {}, 10.0);
        const auto b = simulate(walker(rings, per + 1, h), graph, 86400.0, {}, 10.0);
        // Spot check only: a denser ring shifts every satellite's phase too.
        if (b.edges[0].gap_seconds() > a.edges[0].gap_seconds())
            ADD_FAILURE() << "rings=" << rings << " per=" << per << " h=" << h << " gaps " << a.edges[0].gap_seconds()
                          << " -> " << b.edges[0].gap_seconds();
    }
}
