#pragma once

#include "csflock/analysis.hpp"
#include "csflock/bias.hpp"
#include "csflock/config.hpp"
#include "csflock/engine.hpp"
#include "csflock/errors.hpp"
#include "csflock/grid.hpp"
#include "csflock/io.hpp"
#include "csflock/laplacian.hpp"
#include "csflock/models.hpp"
#include "csflock/random.hpp"
#include "csflock/sweep.hpp"
#include "csflock/version.hpp"
