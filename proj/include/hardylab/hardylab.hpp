#pragma once

#include "hardylab/capacity.hpp"
#include "hardylab/energy.hpp"
#include "hardylab/error.hpp"
#include "hardylab/expression.hpp"
#include "hardylab/extrapolation.hpp"
#include "hardylab/family.hpp"
#include "hardylab/field.hpp"
#include "hardylab/geometry.hpp"
#include "hardylab/hardy.hpp"
#include "hardylab/oracles.hpp"
#include "hardylab/parallel.hpp"
#include "hardylab/solver.hpp"
#include "hardylab/spectral.hpp"
