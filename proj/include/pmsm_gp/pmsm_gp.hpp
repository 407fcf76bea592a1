// Umbrella header.
#pragma once

#include "pmsm_gp/aggregation.hpp"
#include "pmsm_gp/control.hpp"
#include "pmsm_gp/datagen.hpp"
#include "pmsm_gp/dataset_io.hpp"
#include "pmsm_gp/dynamics.hpp"
#include "pmsm_gp/gp.hpp"
#include "pmsm_gp/scenario.hpp"
#include "pmsm_gp/scenario_io.hpp"
#include "pmsm_gp/simulator.hpp"
