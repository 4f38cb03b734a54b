#pragma once

#include "tfim/diagnostics.hpp"
#include "tfim/error.hpp"
#include "tfim/exact.hpp"
#include "tfim/io.hpp"
#include "tfim/lattice.hpp"
#include "tfim/model.hpp"
#include "tfim/mps.hpp"
#include "tfim/observables.hpp"
#include "tfim/peps.hpp"
#include "tfim/schedule.hpp"
#include "tfim/semiclassical.hpp"
