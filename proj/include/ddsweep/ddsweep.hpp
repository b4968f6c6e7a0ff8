#pragma once

#include "ddsweep/benchmarks.hpp"
#include "ddsweep/core.hpp"
#include "ddsweep/ddm_core.hpp"
#include "ddsweep/fem_assembly.hpp"
#include "ddsweep/geometry_mesh.hpp"
#include "ddsweep/habc.hpp"
#include "ddsweep/krylov.hpp"
#include "ddsweep/sparse_linalg.hpp"
#include "ddsweep/sweeping_precond.hpp"
