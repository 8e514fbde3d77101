#pragma once

#include "haven/baselines.hpp"
#include "haven/config.hpp"
#include "haven/controller.hpp"
#include "haven/dtqn.hpp"
#include "haven/episode.hpp"
#include "haven/geometry.hpp"
#include "haven/harness.hpp"
#include "haven/projection.hpp"
#include "haven/rng.hpp"
#include "haven/tactics.hpp"
#include "haven/world.hpp"
