#pragma once

#include "subgrid/error.hpp"
#include "subgrid/system.hpp"
#include "subgrid/integrator.hpp"
#include "subgrid/averaging.hpp"
#include "subgrid/reduction.hpp"
#include "subgrid/dual.hpp"
#include "subgrid/problems.hpp"
#include "subgrid/io.hpp"
