#pragma once

#include <cstddef>
#include <vector>

#include "lidsn/model/config.hpp"
#include "lidsn/model/params.hpp"
#include "lidsn/rng.hpp"
#include "lidsn/tensor.hpp"

namespace lidsn::model {

// ---- building blocks (each records on the active tape) ----

/// x [B x C x T] -> one [P x D] token matrix per trial.
/// pointwise conv -> BN -> depthwise conv -> GELU -> avgpool.
std::vector<Tensor> temporal_tokenize(const Tensor& x, TemporalTokenizerParams& p,
                                      const ModelConfig& cfg, Mode mode);

/// x [B x C x T] -> one [C x D] token matrix per trial. Every channel goes through the
/// same conv -> GELU -> BN -> avgpool -> flatten -> linear pipeline on its own.
std::vector<Tensor> spatial_tokenize(const Tensor& x, SpatialTokenizerParams& p,
                                     const ModelConfig& cfg, Mode mode);

/// z + dropout(W_b gelu(W_a layernorm(z))).
Tensor ffn_block(const Tensor& z, const FfnParams& p, const ModelConfig& cfg, RngStream& rng,
                 Mode mode);

struct SacmResult {
  Tensor pooled;                  // [1 x D], heads side by side
  std::vector<Tensor> attention;  // per head, [Q x Q]
  Tensor importance;              // [H x Q]
};

/// Multi-head context summary of `context` [Q x D] (Q = C for the spatial stream).
SacmResult sacm_context(const Tensor& context, const TsiaParams& p, const ModelConfig& cfg);

struct TcamResult {
  std::vector<Tensor> refined;    // per head, [R x d_h]
  std::vector<Tensor> attention;  // per head, [d_h x d_h]
};

/// Cosine-gated feature-dimension attention over `tokens` [R x D], scaled by 1/sqrt(R).
TcamResult tcam_refine(const Tensor& tokens, const TsiaParams& p, const ModelConfig& cfg);

struct TsiaTrace {
  std::vector<Tensor> sacm;  // per head
  std::vector<Tensor> tcam;  // per head
  Tensor importance;         // [H x Q]
};

/// concat_h(refined_h * pooled_h) W_out for tokens [R x D] and context [Q x D].
Tensor tsia(const Tensor& tokens, const Tensor& context, const TsiaParams& p,
            const ModelConfig& cfg, TsiaTrace* trace = nullptr);

/// [tokens ; broadcast(mean_rows(context))] w.
Tensor concat_mix(const Tensor& tokens, const Tensor& context, const ConcatMixParams& p);

struct LayerTrace {
  TsiaTrace integration;  // temporal-stream update; empty under ST2S/NONE
  Tensor temporal_pre;    // [P x D] after the temporal FFN
  Tensor temporal_post;   // [P x D] after integration
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Tensor alpha;  // [1 x P]; undefined under mean-concat fusion
};

struct Encoded {
  Tensor temporal;  // [P x D]
  Tensor spatial;   // [C x D]
};

/// Layer-wise interactive encoding of one trial's token matrices.
Encoded encode_tokens(const Tensor& temporal0, const Tensor& spatial0, const LidsnParams& p,
                      const ModelConfig& cfg, RngStream& rng, Mode mode,
                      ForwardTrace* trace = nullptr);

/// u = [z_t ; z_s] as [1 x 2D]; alpha_out receives the [1 x P] temporal weights.
Tensor adaptive_fuse(const Tensor& temporal, const Tensor& spatial, const LidsnParams& p,
                     const ModelConfig& cfg, Tensor* alpha_out = nullptr);

/// [1 x 2D] -> [1 x K].
Tensor classify(const Tensor& u, const ClassifierParams& p);

// ---- whole network ----

class LidsnModel {
 public:
  LidsnModel(ModelConfig cfg, std::uint64_t seed);
  LidsnModel(ModelConfig cfg, LidsnParams params);

  const ModelConfig& config() const noexcept { return cfg_; }
  LidsnParams& params() noexcept { return params_; }
  const LidsnParams& params() const noexcept { return params_; }

  /// x [B x C x T] -> logits [B x K]. Train mode shares batch-norm statistics across the
  /// batch and updates the running estimates. `traces`, when given, receives one entry
  /// per trial.
  Tensor forward(const Tensor& x, Mode mode, RngStream& rng,
                 std::vector<ForwardTrace>* traces = nullptr);

  /// Eval-mode convenience for a single trial x [C x T]; returns [1 x K].
  Tensor predict(const Tensor& x, std::vector<ForwardTrace>* traces = nullptr);

 private:
  void check_input(const Tensor& x) const;

  ModelConfig cfg_;
  LidsnParams params_;
};

/// |d logit_k / dx| for x [C x T], scaled so the largest entry is 1 (all zeros stay 0).
Tensor saliency(LidsnModel& model, const Tensor& x, std::size_t class_index);

struct ModelCost {
  std::size_t params = 0;
  std::size_t flops = 0;
};

/// Exact parameter tally and eval-mode FLOPs for one trial. A multiply-add counts 2,
/// every other element-wise operation (including exp, erf, cos) counts 1.
ModelCost count_params_flops(const ModelConfig& cfg);

}  // namespace lidsn::model
