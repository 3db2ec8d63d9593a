#pragma once

#include "apportion/geometry/affine.hpp"
#include "apportion/geometry/extreme.hpp"
#include "apportion/geometry/hull.hpp"
#include "apportion/geometry/nearest.hpp"
#include "apportion/geometry/projection.hpp"
#include "apportion/geometry/volume.hpp"
