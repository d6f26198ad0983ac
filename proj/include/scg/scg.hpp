#pragma once

#include "scg/config.hpp"
#include "scg/conformance.hpp"
#include "scg/diagnostics.hpp"
#include "scg/errors.hpp"
#include "scg/harness.hpp"
#include "scg/optimizer.hpp"
#include "scg/problems.hpp"
#include "scg/rng.hpp"
#include "scg/runner.hpp"
#include "scg/schedules.hpp"
#include "scg/vecmath.hpp"
