#pragma once

#include "apc/awc.hpp"
#include "apc/baselines.hpp"
#include "apc/bitops.hpp"
#include "apc/clustering_types.hpp"
#include "apc/cost_model.hpp"
#include "apc/error.hpp"
#include "apc/io.hpp"
#include "apc/metrics.hpp"
#include "apc/parallel.hpp"
#include "apc/pattern_matrix.hpp"
#include "apc/rng.hpp"
#include "apc/synthetic.hpp"
#include "apc/text.hpp"
