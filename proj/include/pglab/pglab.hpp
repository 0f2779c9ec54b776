#pragma once

#include "pglab/benchmark.hpp"
#include "pglab/csv.hpp"
#include "pglab/exact.hpp"
#include "pglab/experiment.hpp"
#include "pglab/gpomdp.hpp"
#include "pglab/model_io.hpp"
#include "pglab/optimizer.hpp"
#include "pglab/policy.hpp"
#include "pglab/pomdp.hpp"
#include "pglab/random.hpp"
#include "pglab/stats.hpp"
