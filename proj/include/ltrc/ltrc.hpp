#pragma once

#include "ltrc/error.hpp"
#include "ltrc/step_function.hpp"
#include "ltrc/sample.hpp"
#include "ltrc/survival.hpp"
#include "ltrc/normal.hpp"
#include "ltrc/kernel.hpp"
#include "ltrc/regression.hpp"
#include "ltrc/random.hpp"
#include "ltrc/kv_config.hpp"
#include "ltrc/simulation.hpp"
#include "ltrc/parallel.hpp"
#include "ltrc/mc_harness.hpp"
#include "ltrc/io.hpp"
