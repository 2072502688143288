#pragma once

#include "wgf/benchmarks.hpp"
#include "wgf/diagnostics.hpp"
#include "wgf/energy.hpp"
#include "wgf/grid.hpp"
#include "wgf/newton.hpp"
#include "wgf/schemes.hpp"
#include "wgf/sparse.hpp"
#include "wgf/cli/config.hpp"
#include "wgf/cli/runner.hpp"
