#pragma once

#include "wfomc/bench.hpp"
#include "wfomc/canonical.hpp"
#include "wfomc/domain_recursion.hpp"
#include "wfomc/engine.hpp"
#include "wfomc/liftability.hpp"
#include "wfomc/logic.hpp"
#include "wfomc/oracle.hpp"
#include "wfomc/parser.hpp"
#include "wfomc/preprocess.hpp"
#include "wfomc/rational.hpp"
#include "wfomc/theory_ops.hpp"
