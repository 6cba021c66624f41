#pragma once

#include "ocdma/core.hpp"
#include "ocdma/fd.hpp"
#include "ocdma/harness.hpp"
#include "ocdma/linalg.hpp"
#include "ocdma/metrics.hpp"
#include "ocdma/netmodel.hpp"
#include "ocdma/problem.hpp"
#include "ocdma/qp.hpp"
#include "ocdma/solver_alm.hpp"
#include "ocdma/solver_hopfield.hpp"
#include "ocdma/solver_sqp.hpp"
#include "ocdma/trace.hpp"
