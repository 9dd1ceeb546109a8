#pragma once

// Umbrella header.

#include "gdfo/autodiff.hpp"
#include "gdfo/bench.hpp"
#include "gdfo/blackbox.hpp"
#include "gdfo/checkpoint.hpp"
#include "gdfo/cmaes.hpp"
#include "gdfo/config.hpp"
#include "gdfo/distill.hpp"
#include "gdfo/errors.hpp"
#include "gdfo/models.hpp"
#include "gdfo/promptspace.hpp"
#include "gdfo/random.hpp"
#include "gdfo/svgplot.hpp"
#include "gdfo/trainer.hpp"
