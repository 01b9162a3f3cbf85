#pragma once

#include "graspdec/analysis.hpp"
#include "graspdec/classify.hpp"
#include "graspdec/core.hpp"
#include "graspdec/csp.hpp"
#include "graspdec/dataset_io.hpp"
#include "graspdec/dsp.hpp"
#include "graspdec/error.hpp"
#include "graspdec/features.hpp"
#include "graspdec/io.hpp"
#include "graspdec/linalg.hpp"
#include "graspdec/ml.hpp"
#include "graspdec/parallel.hpp"
#include "graspdec/rng.hpp"
#include "graspdec/stats.hpp"
#include "graspdec/svg.hpp"
#include "graspdec/synth.hpp"
