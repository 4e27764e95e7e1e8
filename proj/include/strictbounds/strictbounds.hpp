#pragma once

// Umbrella header. io.hpp is left out because it needs nlohmann/json.

#include "errors.hpp"
#include "experiments.hpp"
#include "intervals.hpp"
#include "llr.hpp"
#include "maxquantile.hpp"
#include "model.hpp"
#include "nulldist.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "replicates.hpp"
#include "solver.hpp"
#include "stats.hpp"
#include "version.hpp"
