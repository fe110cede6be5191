#pragma once

#include "adacate/common.hpp"
#include "adacate/dataset.hpp"
#include "adacate/csv.hpp"
#include "adacate/glm.hpp"
#include "adacate/reduction.hpp"
#include "adacate/nuisance.hpp"
#include "adacate/pseudo_outcome.hpp"
#include "adacate/kernel.hpp"
#include "adacate/combiner.hpp"
#include "adacate/tuning.hpp"
#include "adacate/pipeline.hpp"
#include "adacate/simulation.hpp"
