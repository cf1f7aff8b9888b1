#pragma once

#include "lidsn/model/grad_suite.hpp"

namespace lidsn::testing {

using model::perturb_params;
using model::random_tiny_config;

}  // namespace lidsn::testing
