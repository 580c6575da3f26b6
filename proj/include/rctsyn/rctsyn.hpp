#pragma once

// Umbrella header for the synthetic trial-data library.

#include "rctsyn/common.hpp"
#include "rctsyn/rng.hpp"
#include "rctsyn/schema.hpp"
#include "rctsyn/dataset.hpp"
#include "rctsyn/grid.hpp"
#include "rctsyn/histogram.hpp"
#include "rctsyn/design.hpp"
#include "rctsyn/regression.hpp"
#include "rctsyn/metrics.hpp"
#include "rctsyn/synthesis.hpp"
#include "rctsyn/simulation.hpp"
#include "rctsyn/fixture.hpp"
