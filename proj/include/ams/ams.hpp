#pragma once

#include "ams/cli.hpp"
#include "ams/errors.hpp"
#include "ams/infer.hpp"
#include "ams/io.hpp"
#include "ams/matrix.hpp"
#include "ams/nn.hpp"
#include "ams/rng.hpp"
#include "ams/sampler.hpp"
#include "ams/supervision.hpp"
#include "ams/synthgen.hpp"
#include "ams/types.hpp"
