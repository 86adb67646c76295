#pragma once

// Umbrella header.

#include "volterra_games/numerics.hpp"
#include "volterra_games/kernel.hpp"
#include "volterra_games/position.hpp"
#include "volterra_games/game.hpp"
#include "volterra_games/dynamics.hpp"
#include "volterra_games/value.hpp"
#include "volterra_games/lyapunov.hpp"
#include "volterra_games/strategy.hpp"
#include "volterra_games/io.hpp"
#include "volterra_games/scenario.hpp"
