#pragma once

#include "memsa/core/adam.hpp"
#include "memsa/core/error.hpp"
#include "memsa/core/fast_tanh.hpp"
#include "memsa/core/format.hpp"
#include "memsa/core/gradcheck.hpp"
#include "memsa/core/matrix.hpp"
#include "memsa/core/random.hpp"
#include "memsa/core/softmax.hpp"

#include "memsa/attention/export.hpp"
#include "memsa/attention/score.hpp"
#include "memsa/attention/self_attention.hpp"

#include "memsa/multihead/multihead.hpp"
#include "memsa/multihead/transformer_reference.hpp"

#include "memsa/metrics/annotations.hpp"
#include "memsa/metrics/event.hpp"
#include "memsa/metrics/report.hpp"
#include "memsa/metrics/segment.hpp"

#include "memsa/model/checkpoint.hpp"
#include "memsa/model/gru.hpp"
#include "memsa/model/loss.hpp"
#include "memsa/model/sed_model.hpp"
#include "memsa/model/trainer.hpp"

#include "memsa/synth/dataset.hpp"
#include "memsa/synth/soundscape.hpp"

#include "memsa/harness/bench.hpp"
#include "memsa/harness/experiment.hpp"
#include "memsa/harness/heatmap.hpp"
#include "memsa/harness/score.hpp"
