#pragma once

#include "mfsr/baselines.hpp"
#include "mfsr/cg.hpp"
#include "mfsr/config.hpp"
#include "mfsr/errors.hpp"
#include "mfsr/experiment.hpp"
#include "mfsr/image.hpp"
#include "mfsr/linear_operator.hpp"
#include "mfsr/mm_solver.hpp"
#include "mfsr/observation.hpp"
#include "mfsr/optical_flow.hpp"
#include "mfsr/pgm.hpp"
#include "mfsr/tv.hpp"
