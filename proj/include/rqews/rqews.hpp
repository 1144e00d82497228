#pragma once

// Umbrella header.

#include "rqews/error.hpp"
#include "rqews/numeric.hpp"
#include "rqews/random.hpp"
#include "rqews/parallel.hpp"
#include "rqews/signal.hpp"
#include "rqews/embedding.hpp"
#include "rqews/rqa.hpp"
#include "rqews/dfa.hpp"
#include "rqews/features.hpp"
#include "rqews/labeling.hpp"
#include "rqews/svm.hpp"
#include "rqews/eval.hpp"
#include "rqews/synth.hpp"
#include "rqews/config.hpp"
#include "rqews/pipeline.hpp"
