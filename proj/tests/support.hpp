#pragma once

// Hand-rolled generators for the property tests. Fixed seeds keep failures
// reproducible; bump `cases` locally when hunting for counterexamples.

#include <cstdint>
#include <random>

#include "satnet/geometry.hpp"

namespace satnet::testing {

inline constexpr int cases = 200;

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    ConstellationConfig constellation() {
        return {integer(1, 20), integer(1, 20), uniform(300.0, 12000.0), uniform(-30.0, 30.0), uniform(0.0, 20.0)};
    }
    GeodeticCoordinate site() { return {uniform(-90.0, 90.0), uniform(-180.0, 180.0), 0.0}; }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace satnet::testing
