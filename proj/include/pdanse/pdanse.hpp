#pragma once

// Umbrella header.

#include "pdanse/adam.hpp"
#include "pdanse/backprop.hpp"
#include "pdanse/checkpoint.hpp"
#include "pdanse/config.hpp"
#include "pdanse/container.hpp"
#include "pdanse/dataset.hpp"
#include "pdanse/experiment.hpp"
#include "pdanse/inference.hpp"
#include "pdanse/lorenz.hpp"
#include "pdanse/losses.hpp"
#include "pdanse/measurement.hpp"
#include "pdanse/metrics.hpp"
#include "pdanse/numerics.hpp"
#include "pdanse/particle_filter.hpp"
#include "pdanse/random.hpp"
#include "pdanse/rnn_prior.hpp"
#include "pdanse/trainer.hpp"
