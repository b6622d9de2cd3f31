#pragma once

#include "sqbessel/error.hpp"
#include "sqbessel/specfun.hpp"
#include "sqbessel/quadrature.hpp"
#include "sqbessel/chebyshev.hpp"
#include "sqbessel/spectral.hpp"
#include "sqbessel/measures.hpp"
#include "sqbessel/equilibrium.hpp"
#include "sqbessel/kernel.hpp"
#include "sqbessel/simulate.hpp"
#include "sqbessel/parallel.hpp"
