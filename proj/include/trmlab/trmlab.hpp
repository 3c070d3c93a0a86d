#pragma once

#include "trmlab/checkpoint.hpp"
#include "trmlab/cli.hpp"
#include "trmlab/datastream.hpp"
#include "trmlab/diagnostics.hpp"
#include "trmlab/errors.hpp"
#include "trmlab/evaluate.hpp"
#include "trmlab/experiment_config.hpp"
#include "trmlab/io.hpp"
#include "trmlab/matrix.hpp"
#include "trmlab/merging.hpp"
#include "trmlab/mlp.hpp"
#include "trmlab/parallel.hpp"
#include "trmlab/rng.hpp"
#include "trmlab/trainer.hpp"
#include "trmlab/vecops.hpp"
