#pragma once

#include "bohm/analytic.hpp"
#include "bohm/config.hpp"
#include "bohm/equilibrium.hpp"
#include "bohm/fields.hpp"
#include "bohm/flux.hpp"
#include "bohm/grid.hpp"
#include "bohm/guidance.hpp"
#include "bohm/io.hpp"
#include "bohm/povm.hpp"
#include "bohm/propagate.hpp"
#include "bohm/scenarios.hpp"
