#include "lidsn/model/grad_suite.hpp"

#include <array>

#include "lidsn/ops.hpp"

namespace lidsn::model {

ModelConfig random_tiny_config(RngStream& rng) {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.n_channels = 2 + rng.below(3);
  cfg.n_heads = 1 + rng.below(2);
  cfg.embed_dim = cfg.n_heads * 2 * (1 + rng.below(2));
  cfg.n_samples = 24 + 8 * rng.below(3);
  cfg.pool_window = cfg.pool_stride = 8;
  cfg.spatial_pool_window = cfg.spatial_pool_stride = 8 + 4 * rng.below(2);
  cfg.temporal_kernel = 3 + 2 * rng.below(2);
  cfg.spatial_kernel = 1 + 2 * rng.below(2);
  cfg.spatial_maps = 1 + rng.below(2);
  cfg.temporal_depth = 1 + rng.below(2);
  cfg.spatial_depth = 1 + rng.below(cfg.temporal_depth);
  cfg.ffn_expansion = 2;
  cfg.classifier_hidden = 4;
  cfg.n_classes = 2 + rng.below(2);
  constexpr std::array modes = {IntegrationMode::st2t, IntegrationMode::st2s, IntegrationMode::bidir,
                                IntegrationMode::none};
  cfg.integration = modes[rng.below(modes.size())];
  cfg.fusion = rng.below(4) == 0 ? FusionMode::mean_concat : FusionMode::adaptive;
  cfg.use_positional_embedding = rng.below(4) != 0;
  cfg.use_cosine_gate = rng.below(4) != 0;
  cfg.use_electrode_pos_embedding = rng.below(4) != 0;
  cfg.use_tsia = rng.below(5) != 0;
  cfg.per_head_electrode_embedding = rng.below(3) != 0;
  cfg.validate();
  return cfg;
}

void perturb_params(LidsnParams& p, RngStream& rng, double amount) {
  for (auto& [name, t] : p.named_parameters()) {
    Tensor handle = t;
    for (auto& v : handle.mutable_data()) v += rng.uniform(-amount, amount);
  }
  for (auto* st : {&p.temporal.bn, &p.spatial.bn}) {
    for (auto& m : st->running_mean) m = rng.uniform(-0.2, 0.2);
    for (auto& v : st->running_var) v = rng.uniform(0.5, 1.5);
  }
}

GradCheckResult network_grad_check(const ModelConfig& cfg, std::uint64_t seed) {
  RngStream rng(seed, 0x6743);
  LidsnParams p = init_params(cfg, seed);
  perturb_params(p, rng);
  LidsnModel model(cfg, std::move(p));
  std::vector<double> xs(3 * cfg.n_channels * cfg.n_samples);
  for (auto& v : xs) v = rng.uniform(-1.0, 1.0);
  Tensor x({3, cfg.n_channels, cfg.n_samples}, std::move(xs), true);
  const std::vector<int> labels{0, 1, static_cast<int>(cfg.n_classes) - 1};
  const std::vector<double> weights(cfg.n_classes, 1.0);

  std::vector<Tensor> inputs;
  for (const auto& [name, t] : model.params().named_parameters()) inputs.push_back(t);
  inputs.push_back(x);
  const auto fn = [&](std::span<const Tensor>) {
    RngStream dropout(seed, 0x4452);
    return weighted_cross_entropy(model.forward(x, Mode::train, dropout), labels, weights);
  };
  return grad_check(fn, inputs);
}

}  // namespace lidsn::model
