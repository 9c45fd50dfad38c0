#pragma once

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
#include "satnet/scenario.hpp"
