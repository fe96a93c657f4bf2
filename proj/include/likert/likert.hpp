#pragma once

// Umbrella header: the whole library in one include.

#include "likert/bytes.hpp"
#include "likert/checkpoint.hpp"
#include "likert/cli.hpp"
#include "likert/dataset.hpp"
#include "likert/embedding_io.hpp"
#include "likert/eval.hpp"
#include "likert/ingest.hpp"
#include "likert/losses.hpp"
#include "likert/model.hpp"
#include "likert/reporting.hpp"
#include "likert/rng.hpp"
#include "likert/scale.hpp"
#include "likert/sha256.hpp"
#include "likert/split.hpp"
#include "likert/stats.hpp"
#include "likert/synth.hpp"
#include "likert/trainer.hpp"
#include "likert/version.hpp"
