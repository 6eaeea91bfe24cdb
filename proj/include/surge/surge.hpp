#pragma once

// Convenience umbrella: the whole library in one include.

#include "surge/acceptance.hpp"
#include "surge/baselines.hpp"
#include "surge/core.hpp"
#include "surge/experiment.hpp"
#include "surge/filter.hpp"
#include "surge/guidance.hpp"
#include "surge/io.hpp"
#include "surge/metrics.hpp"
#include "surge/observation.hpp"
#include "surge/propagation.hpp"
#include "surge/resampling.hpp"
#include "surge/rng.hpp"
#include "surge/surrogate.hpp"
#include "surge/systems.hpp"
#include "surge/weights.hpp"
