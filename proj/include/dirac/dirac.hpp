#pragma once

#include "dirac/errors.hpp"
#include "dirac/autodiff.hpp"
#include "dirac/linalg.hpp"
#include "dirac/geometry.hpp"
#include "dirac/io.hpp"
#include "dirac/integrator.hpp"
#include "dirac/hamilton_jacobi.hpp"
#include "dirac/chaplygin.hpp"
#include "dirac/systems.hpp"
#include "dirac/config.hpp"
#include "dirac/plot.hpp"
#include "dirac/cli.hpp"
