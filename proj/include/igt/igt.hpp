#pragma once

#include "igt/errors.hpp"
#include "igt/tensor.hpp"
#include "igt/ops.hpp"
#include "igt/graph.hpp"
#include "igt/attention.hpp"
#include "igt/layers.hpp"
#include "igt/mil_head.hpp"
#include "igt/model.hpp"
#include "igt/optim.hpp"
#include "igt/rng.hpp"
#include "igt/checkpoint.hpp"
#include "igt/bag_io.hpp"
#include "igt/metrics.hpp"
#include "igt/config.hpp"
#include "igt/synth.hpp"
#include "igt/harness.hpp"
#include "igt/gradcheck.hpp"
