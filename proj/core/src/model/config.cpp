#include "lidsn/model/config.hpp"

#include <string>

#include "lidsn/error.hpp"

namespace lidsn::model {

std::string_view to_string(IntegrationMode mode) {
  switch (mode) {
    case IntegrationMode::st2t: return "ST2T";
    case IntegrationMode::st2s: return "ST2S";
    case IntegrationMode::bidir: return "BIDIR";
    case IntegrationMode::none: return "NONE";
  }
  return "?";
}

std::string_view to_string(FusionMode mode) {
  return mode == FusionMode::adaptive ? "adaptive" : "mean-concat";
}

IntegrationMode parse_integration_mode(std::string_view text) {
  if (text == "ST2T") return IntegrationMode::st2t;
  if (text == "ST2S") return IntegrationMode::st2s;
  if (text == "BIDIR") return IntegrationMode::bidir;
  if (text == "NONE") return IntegrationMode::none;
  throw ConfigError("unknown integration mode '" + std::string(text) +
                    "' (expected ST2T, ST2S, BIDIR or NONE)");
}

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "adaptive") return FusionMode::adaptive;
  if (text == "mean-concat") return FusionMode::mean_concat;
  throw ConfigError("unknown fusion mode '" + std::string(text) +
                    "' (expected adaptive or mean-concat)");
}

namespace {

std::size_t pooled(std::size_t length, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0 || window > length) return 0;
  return (length - window) / stride + 1;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid model config: " + what);
}

}  // namespace

std::size_t ModelConfig::n_patches() const {
  return pooled(n_samples, pool_window, pool_stride);
}

std::size_t ModelConfig::spatial_patches() const {
  return pooled(n_samples, spatial_pool_window, spatial_pool_stride);
}

void ModelConfig::validate() const {
  require(n_channels >= 1, "n_channels must be >= 1");
  require(n_samples >= 1, "n_samples must be >= 1");
  require(n_classes >= 2, "n_classes must be >= 2");
  require(embed_dim >= 1 && n_heads >= 1, "embed_dim and n_heads must be >= 1");
  require(embed_dim % n_heads == 0, "embed_dim " + std::to_string(embed_dim) +
                                        " not divisible by n_heads " + std::to_string(n_heads));
  require(embed_dim % 2 == 0, "embed_dim must be even (fusion hidden width is D/2)");
  require(spatial_maps >= 1, "spatial_maps must be >= 1");
  require(temporal_depth >= 1, "temporal_depth must be >= 1");
  require(spatial_depth <= temporal_depth,
          "spatial_depth " + std::to_string(spatial_depth) + " exceeds temporal_depth " +
              std::to_string(temporal_depth));
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(ffn_expansion >= 1 && classifier_hidden >= 1, "hidden widths must be >= 1");
  require(temporal_kernel % 2 == 1, "temporal_kernel must be odd");
  require(spatial_kernel % 2 == 1, "spatial_kernel must be odd");
  require(pool_window >= 1 && pool_stride >= 1, "pool window/stride must be >= 1");
  require(n_samples >= pool_window, "n_samples " + std::to_string(n_samples) +
                                        " shorter than pool_window " +
                                        std::to_string(pool_window));
  require(n_samples >= pool_stride, "n_samples shorter than pool_stride");
  require(spatial_pool_window >= 1 && spatial_pool_stride >= 1 &&
              n_samples >= spatial_pool_window && n_samples >= spatial_pool_stride,
          "spatial pool window/stride invalid for n_samples");
  require(bn_momentum > 0.0 && bn_momentum <= 1.0, "bn_momentum must lie in (0, 1]");
  require(norm_eps > 0.0, "norm_eps must be positive");
}

ModelConfig ModelConfig::bnci2014001() {
  ModelConfig cfg;
  cfg.n_channels = 22;
  cfg.n_samples = 1000;
  cfg.n_classes = 2;
  return cfg;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.n_channels = 3;
  cfg.n_samples = 64;
  cfg.n_classes = 2;
  cfg.embed_dim = 8;
  cfg.spatial_maps = 2;
  cfg.n_heads = 2;
  cfg.temporal_depth = 1;
  cfg.spatial_depth = 1;
  cfg.ffn_expansion = 2;
  cfg.classifier_hidden = 6;
  cfg.temporal_kernel = 5;
  cfg.spatial_kernel = 3;
  cfg.pool_window = 16;
  cfg.pool_stride = 16;
  cfg.spatial_pool_window = 16;
  cfg.spatial_pool_stride = 16;
  return cfg;
}

}  // namespace lidsn::model
