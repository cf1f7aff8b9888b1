#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace lidsn::model {

/// Direction of the per-layer cross-stream update.
enum class IntegrationMode {
  st2t,   ///< spatial context refines the temporal stream
  st2s,   ///< temporal context refines the spatial stream
  bidir,  ///< both updates from the same FFN-refined pair
  none,   ///< no cross-talk; streams meet only at fusion
};

enum class FusionMode { adaptive, mean_concat };

std::string_view to_string(IntegrationMode mode);
std::string_view to_string(FusionMode mode);
IntegrationMode parse_integration_mode(std::string_view text);
FusionMode parse_fusion_mode(std::string_view text);

/// Every architectural knob of the network and its ablations.
struct ModelConfig {
  std::size_t n_channels = 22;
  std::size_t n_samples = 1000;
  std::size_t n_classes = 2;

  std::size_t embed_dim = 40;
  std::size_t spatial_maps = 16;
  std::size_t n_heads = 4;
  std::size_t temporal_depth = 3;
  std::size_t spatial_depth = 3;
  double dropout = 0.25;
  std::size_t ffn_expansion = 4;
  std::size_t classifier_hidden = 32;

  std::size_t temporal_kernel = 25;
  std::size_t pool_window = 50;
  std::size_t pool_stride = 50;
  std::size_t spatial_kernel = 1;
  std::size_t spatial_pool_window = 50;
  std::size_t spatial_pool_stride = 50;

  IntegrationMode integration = IntegrationMode::st2t;
  FusionMode fusion = FusionMode::adaptive;
  bool use_positional_embedding = true;
  bool use_cosine_gate = true;
  bool use_electrode_pos_embedding = true;
  /// false replaces attention-based integration with concatenation + projection.
  bool use_tsia = true;
  /// false shares one [C x d_h] electrode embedding across heads.
  bool per_head_electrode_embedding = true;

  double bn_momentum = 0.1;
  double norm_eps = 1e-5;

  std::size_t head_dim() const { return embed_dim / n_heads; }
  /// Temporal tokens after pooling.
  std::size_t n_patches() const;
  /// Pooled length inside the spatial tokenizer.
  std::size_t spatial_patches() const;

  /// Throws ConfigError naming the violated constraint.
  void validate() const;

  /// C=22, T=1000, two classes: the motor-imagery reference geometry.
  static ModelConfig bnci2014001();
  /// C=3, T=64, D=8, H=2, one layer: small enough for exhaustive finite differences.
  static ModelConfig tiny();
};

}  // namespace lidsn::model
