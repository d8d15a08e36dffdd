#pragma once

#include "fptd/baseline.hpp"
#include "fptd/bridge.hpp"
#include "fptd/estimator.hpp"
#include "fptd/expr.hpp"
#include "fptd/io.hpp"
#include "fptd/model.hpp"
#include "fptd/parallel.hpp"
#include "fptd/quadrature.hpp"
#include "fptd/rng.hpp"
#include "fptd/tail.hpp"
