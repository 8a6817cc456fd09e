#pragma once

#include "heraldsim/analysis.hpp"
#include "heraldsim/closedform.hpp"
#include "heraldsim/detector.hpp"
#include "heraldsim/errors.hpp"
#include "heraldsim/eventsim.hpp"
#include "heraldsim/heralding.hpp"
#include "heraldsim/numeric.hpp"
#include "heraldsim/pdcstate.hpp"
#include "heraldsim/rng.hpp"
#include "heraldsim/scenario.hpp"
#include "heraldsim/spectra.hpp"
#include "heraldsim/svg.hpp"
#include "heraldsim/sweep.hpp"
