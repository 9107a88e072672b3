#pragma once

#include "hrcplan/config_io.hpp"
#include "hrcplan/core.hpp"
#include "hrcplan/experiment.hpp"
#include "hrcplan/kmeans.hpp"
#include "hrcplan/learn.hpp"
#include "hrcplan/network.hpp"
#include "hrcplan/plan.hpp"
#include "hrcplan/report.hpp"
#include "hrcplan/safety.hpp"
#include "hrcplan/sim.hpp"
