#pragma once

#include "gsfcalc/csv.hpp"
#include "gsfcalc/embedding.hpp"
#include "gsfcalc/error.hpp"
#include "gsfcalc/finite_diff.hpp"
#include "gsfcalc/gauge.hpp"
#include "gsfcalc/gen_num.hpp"
#include "gsfcalc/gsf.hpp"
#include "gsfcalc/jacobi.hpp"
#include "gsfcalc/lagrangian.hpp"
#include "gsfcalc/linear_ode.hpp"
#include "gsfcalc/minimizer.hpp"
#include "gsfcalc/mollifier.hpp"
#include "gsfcalc/noether.hpp"
#include "gsfcalc/quadrature.hpp"
#include "gsfcalc/riemann.hpp"
#include "gsfcalc/trajectory.hpp"
#include "gsfcalc/varcalc.hpp"
