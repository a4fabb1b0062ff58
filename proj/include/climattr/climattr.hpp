#pragma once

// Umbrella header: per-month bivariate count/temperature models, the
// climate/natural share split, synthetic scenarios and serialization.
// The CLI layer (app.hpp) is not included here because it pulls in CLI11.

#include "climattr/attribution.hpp"
#include "climattr/csv.hpp"
#include "climattr/errors.hpp"
#include "climattr/ingest.hpp"
#include "climattr/model_io.hpp"
#include "climattr/rng.hpp"
#include "climattr/simulate.hpp"
#include "climattr/stats.hpp"
#include "climattr/units.hpp"
