#pragma once

#include "classb/acceptance.hpp"
#include "classb/calculus.hpp"
#include "classb/closedforms.hpp"
#include "classb/errors.hpp"
#include "classb/eval.hpp"
#include "classb/expr.hpp"
#include "classb/families.hpp"
#include "classb/inference.hpp"
#include "classb/matrix.hpp"
#include "classb/moments.hpp"
#include "classb/number.hpp"
#include "classb/oracle.hpp"
#include "classb/parser.hpp"
#include "classb/quadrature.hpp"
#include "classb/rng.hpp"
#include "classb/tails.hpp"
#include "classb/transforms.hpp"
