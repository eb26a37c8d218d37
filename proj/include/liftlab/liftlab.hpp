#pragma once

// Umbrella header for the whole library.

#include "liftlab/version.hpp"

#include "liftlab/rng.hpp"

#include "liftlab/lattice.hpp"
#include "liftlab/matrix.hpp"
#include "liftlab/spectral.hpp"

#include "liftlab/gaussian.hpp"
#include "liftlab/ramp_clock.hpp"

#include "liftlab/observables.hpp"

#include "liftlab/srw.hpp"

#include "liftlab/ecmc.hpp"
#include "liftlab/hmc.hpp"

#include "liftlab/config.hpp"
#include "liftlab/io.hpp"
#include "liftlab/parallel.hpp"
#include "liftlab/stats.hpp"

#include "liftlab/relaxation.hpp"

#include "liftlab/verify.hpp"
#include "liftlab/wick.hpp"
