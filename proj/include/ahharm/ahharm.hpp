#pragma once

#include "ahharm/core.hpp"
#include "ahharm/geometry.hpp"
#include "ahharm/grid.hpp"
#include "ahharm/kernel.hpp"
#include "ahharm/approx.hpp"
#include "ahharm/tension.hpp"
#include "ahharm/solver.hpp"
#include "ahharm/comparison.hpp"
#include "ahharm/barrier.hpp"
#include "ahharm/io.hpp"
#include "ahharm/config.hpp"
