#pragma once

#include "rlfbm/hurst.hpp"
#include "rlfbm/kernels.hpp"
#include "rlfbm/gauss.hpp"
#include "rlfbm/rng.hpp"
#include "rlfbm/grid.hpp"
#include "rlfbm/paths.hpp"
#include "rlfbm/integrands.hpp"
#include "rlfbm/integrator.hpp"
#include "rlfbm/stats.hpp"
#include "rlfbm/parallel.hpp"
#include "rlfbm/experiments.hpp"
