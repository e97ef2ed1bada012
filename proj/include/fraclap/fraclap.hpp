#pragma once

#include "fraclap/error.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/fft.hpp"
#include "fraclap/weights.hpp"
#include "fraclap/lowrank.hpp"
#include "fraclap/operator.hpp"
#include "fraclap/oracle.hpp"
#include "fraclap/solver.hpp"
#include "fraclap/expression.hpp"
#include "fraclap/experiments.hpp"
