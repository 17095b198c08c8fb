#pragma once

#include "dcd/analysis.hpp"
#include "dcd/combiners.hpp"
#include "dcd/common.hpp"
#include "dcd/experiment.hpp"
#include "dcd/io.hpp"
#include "dcd/oracle.hpp"
#include "dcd/problem.hpp"
#include "dcd/rng.hpp"
#include "dcd/solver.hpp"
#include "dcd/topology.hpp"
