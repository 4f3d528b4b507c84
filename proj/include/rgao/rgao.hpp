#pragma once

// Umbrella header: pulls in the whole library.

#include "rgao/budget.hpp"
#include "rgao/code_index.hpp"
#include "rgao/common.hpp"
#include "rgao/contracts.hpp"
#include "rgao/evalharness.hpp"
#include "rgao/retrieval.hpp"
#include "rgao/router.hpp"
#include "rgao/stats.hpp"
#include "rgao/swarm.hpp"
#include "rgao/synth.hpp"
