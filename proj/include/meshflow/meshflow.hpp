#pragma once

#include "meshflow/core.hpp"
#include "meshflow/flow.hpp"
#include "meshflow/image.hpp"
#include "meshflow/imgio.hpp"
#include "meshflow/model3d.hpp"
#include "meshflow/neuralmath.hpp"
#include "meshflow/parallel.hpp"
#include "meshflow/raster.hpp"
#include "meshflow/sampler.hpp"
#include "meshflow/synth.hpp"
#include "meshflow/temporal.hpp"
