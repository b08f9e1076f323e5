#pragma once

#include "pqv/calculus.hpp"
#include "pqv/errors.hpp"
#include "pqv/fbm.hpp"
#include "pqv/functions.hpp"
#include "pqv/grid.hpp"
#include "pqv/local_time.hpp"
#include "pqv/parallel.hpp"
#include "pqv/partition_diagnostics.hpp"
#include "pqv/partition_io.hpp"
#include "pqv/partitions.hpp"
#include "pqv/path_io.hpp"
#include "pqv/paths.hpp"
#include "pqv/quadvar.hpp"
#include "pqv/roughness.hpp"
#include "pqv/rng.hpp"
#include "pqv/stats.hpp"
#include "pqv/table_io.hpp"

namespace pqv {
inline constexpr const char* version = "0.1.0";
}
