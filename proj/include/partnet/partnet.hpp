#pragma once

#include "partnet/analysis.hpp"
#include "partnet/checkpoint.hpp"
#include "partnet/config.hpp"
#include "partnet/data.hpp"
#include "partnet/ensemble.hpp"
#include "partnet/gradcheck.hpp"
#include "partnet/gradcheck_suite.hpp"
#include "partnet/nn.hpp"
#include "partnet/ops.hpp"
#include "partnet/optim.hpp"
#include "partnet/partition.hpp"
#include "partnet/rng.hpp"
#include "partnet/runner.hpp"
#include "partnet/tensor.hpp"
