#pragma once

// Umbrella header.
#include "gomkit/analysis.hpp"
#include "gomkit/diagnostics.hpp"
#include "gomkit/dtw.hpp"
#include "gomkit/error.hpp"
#include "gomkit/exchange.hpp"
#include "gomkit/generation.hpp"
#include "gomkit/gom.hpp"
#include "gomkit/kalman.hpp"
#include "gomkit/kf_trainer.hpp"
#include "gomkit/motion.hpp"
#include "gomkit/nelder_mead.hpp"
#include "gomkit/parallel.hpp"
#include "gomkit/random.hpp"
#include "gomkit/recognition.hpp"
#include "gomkit/synth.hpp"
#include "gomkit/topology.hpp"
#include "gomkit/version.hpp"
