#pragma once

#include <cstdint>

#include "lidsn/grad_check.hpp"
#include "lidsn/model/network.hpp"
#include "lidsn/rng.hpp"

namespace lidsn::model {

/// Random small geometry: 2-4 channels, 1-2 heads, one or two layers, any integration
/// mode and flag combination. Every draw passes validate().
ModelConfig random_tiny_config(RngStream& rng);

/// Moves every parameter and running statistic away from its structured initial value so
/// that biases, gains and statistics all take part in the computation.
void perturb_params(LidsnParams& p, RngStream& rng, double amount = 0.3);

/// Central-difference check of the weighted cross-entropy of a train-mode forward over a
/// batch of three random trials, with respect to every parameter and the input.
GradCheckResult network_grad_check(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace lidsn::model
