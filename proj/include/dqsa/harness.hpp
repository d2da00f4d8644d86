#pragma once

#include "dqsa/harness/config.hpp"
#include "dqsa/harness/evaluate.hpp"
#include "dqsa/harness/scenario.hpp"
