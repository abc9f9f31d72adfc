#pragma once

// Umbrella header for the whole library.

#include "phalanx/codec.hpp"
#include "phalanx/errors.hpp"
#include "phalanx/evaluation.hpp"
#include "phalanx/fusion.hpp"
#include "phalanx/manifest.hpp"
#include "phalanx/matcher.hpp"
#include "phalanx/pipeline.hpp"
#include "phalanx/protocol.hpp"
#include "phalanx/rng.hpp"
#include "phalanx/synthetic.hpp"
#include "phalanx/types.hpp"
