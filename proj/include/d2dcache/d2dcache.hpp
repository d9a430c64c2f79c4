#pragma once

#include "d2dcache/analytic.hpp"
#include "d2dcache/dist.hpp"
#include "d2dcache/estimate.hpp"
#include "d2dcache/laplace.hpp"
#include "d2dcache/model.hpp"
#include "d2dcache/montecarlo.hpp"
#include "d2dcache/quadrature.hpp"
#include "d2dcache/selftest.hpp"
#include "d2dcache/sweep.hpp"
