#pragma once

// Umbrella header: the whole simulator in one include.

#include "pulsesim/collapse.hpp"
#include "pulsesim/core_state.hpp"
#include "pulsesim/dynamics.hpp"
#include "pulsesim/errors.hpp"
#include "pulsesim/experiment.hpp"
#include "pulsesim/io.hpp"
#include "pulsesim/rng.hpp"
#include "pulsesim/scenario.hpp"
#include "pulsesim/seed_spread.hpp"
#include "pulsesim/version.hpp"
