#pragma once

#include "argctx/context.hpp"
#include "argctx/corpus.hpp"
#include "argctx/embeddings.hpp"
#include "argctx/experiment.hpp"
#include "argctx/features.hpp"
#include "argctx/metrics.hpp"
#include "argctx/model.hpp"
#include "argctx/neural/adam.hpp"
#include "argctx/neural/attention.hpp"
#include "argctx/neural/checkpoint.hpp"
#include "argctx/neural/classifier.hpp"
#include "argctx/neural/conv.hpp"
#include "argctx/neural/lstm.hpp"
#include "argctx/significance.hpp"
#include "argctx/sweep.hpp"
#include "argctx/synth.hpp"
