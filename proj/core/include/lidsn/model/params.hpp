#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lidsn/model/config.hpp"
#include "lidsn/ops.hpp"
#include "lidsn/tensor.hpp"

namespace lidsn::model {

struct TemporalTokenizerParams {
  Tensor pw_weight;  // [D x C]
  Tensor pw_bias;    // [D]
  Tensor bn_gain, bn_bias;
  BatchNormState bn;
  Tensor dw_weight;  // [D x K]
  Tensor dw_bias;    // [D]
};

struct SpatialTokenizerParams {
  Tensor in_weight;  // [S x 1 x k]
  Tensor in_bias;    // [S]
  Tensor bn_gain, bn_bias;
  BatchNormState bn;
  Tensor out_weight;  // [S*P_s x D]
  Tensor out_bias;    // [D]
};

struct FfnParams {
  Tensor ln_gain, ln_bias;  // [D]
  Tensor w_a, b_a;          // [D x hD], [hD]
  Tensor w_b, b_b;          // [hD x D], [D]
};

// Per-head projections are stored side by side: head h owns columns [h*d_h, (h+1)*d_h).
struct TsiaParams {
  Tensor w_1, w_2;   // context projections [D x D]
  Tensor e_pos;      // [C x D], or [C x d_h] when shared; undefined when disabled
  Tensor w_t1;       // [D x D]
  Tensor w_phi;      // [D x D]; undefined without the cosine gate
  Tensor w_k;        // [D x D]
  Tensor w_out;      // [D x D], no bias
};

/// Replacement for the attention integration: [refined ; mean(context)] * w.
struct ConcatMixParams {
  Tensor w;  // [2D x D]
};

struct LayerParams {
  FfnParams temporal_ffn;
  std::optional<FfnParams> spatial_ffn;      // present while the spatial stream is active
  std::optional<TsiaParams> to_temporal;     // ST2T, BIDIR
  std::optional<TsiaParams> to_spatial;      // ST2S, BIDIR (active spatial layers only)
  std::optional<ConcatMixParams> mix_temporal;
  std::optional<ConcatMixParams> mix_spatial;
};

struct FusionParams {
  Tensor w_sp;          // [C]
  Tensor att_w1, att_b1;  // [D x D/2], [D/2]
  Tensor att_w2, att_b2;  // [D/2 x 1], [1]
};

struct ClassifierParams {
  Tensor w1, b1;  // [2D x hidden], [hidden]
  Tensor w2, b2;  // [hidden x K], [K]
};

using NamedTensor = std::pair<std::string, Tensor>;
using NamedBuffer = std::pair<std::string, std::vector<double>*>;

struct LidsnParams {
  TemporalTokenizerParams temporal;
  SpatialTokenizerParams spatial;
  Tensor temporal_pos;  // [P x D]; undefined without positional embeddings
  Tensor spatial_pos;   // [C x D]
  std::vector<LayerParams> layers;
  std::optional<FusionParams> fusion;  // adaptive fusion only
  ClassifierParams classifier;

  /// Trainable tensors in canonical order with stable dotted names.
  std::vector<NamedTensor> named_parameters() const;
  /// Batch-norm running statistics in canonical order.
  std::vector<NamedBuffer> named_buffers();
  std::size_t parameter_count() const;
};

/// Draws every tensor from its own stream forked off `seed` by name, so adding or
/// removing an optional tensor leaves the others unchanged.
LidsnParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Deep copy with fresh storage (running statistics included).
LidsnParams clone_params(const LidsnParams& params);

}  // namespace lidsn::model
