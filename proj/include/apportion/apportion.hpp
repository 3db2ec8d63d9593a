#pragma once

#include "apportion/error.hpp"
#include "apportion/estimator.hpp"
#include "apportion/evaluation.hpp"
#include "apportion/geometry.hpp"
#include "apportion/io.hpp"
#include "apportion/rng.hpp"
#include "apportion/synthgen.hpp"
#include "apportion/types.hpp"
