#pragma once

#include "drl/advisor.hpp"
#include "drl/agent.hpp"
#include "drl/benchmarks.hpp"
#include "drl/error.hpp"
#include "drl/harness.hpp"
#include "drl/infogain.hpp"
#include "drl/json_io.hpp"
#include "drl/mdp.hpp"
#include "drl/oracles.hpp"
#include "drl/planner.hpp"
#include "drl/random.hpp"
