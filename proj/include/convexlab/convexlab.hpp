#pragma once

#include "convexlab/rng.hpp"
#include "convexlab/parallel.hpp"
#include "convexlab/body.hpp"
#include "convexlab/sampler.hpp"
#include "convexlab/position.hpp"
#include "convexlab/marginal.hpp"
#include "convexlab/convexity.hpp"
#include "convexlab/concentration.hpp"
#include "convexlab/predict.hpp"
#include "convexlab/io.hpp"
#include "convexlab/experiment.hpp"
