#include "lidsn/model/network.hpp"

namespace lidsn::model {

namespace {

// Eval-mode cost model. Batch norm folds into one multiply and one add per element.
struct FlopCounter {
  const ModelConfig& cfg;
  std::size_t total = 0;

  void matmul(std::size_t m, std::size_t k, std::size_t n) { total += 2 * m * k * n; }
  void elementwise(std::size_t count, std::size_t ops = 1) { total += count * ops; }
  void softmax(std::size_t count) { total += 4 * count; }  // max-subtract, exp, sum, divide

  void temporal_tokenizer() {
    const std::size_t c = cfg.n_channels, t = cfg.n_samples, d = cfg.embed_dim;
    const std::size_t p = cfg.n_patches();
    matmul(d, c, t);
    elementwise(d * t);                              // bias
    elementwise(d * t, 2);                           // batch norm
    total += 2 * d * cfg.temporal_kernel * t;        // depthwise conv
    elementwise(d * t);                              // bias
    elementwise(d * t);                              // GELU
    elementwise(d * p, cfg.pool_window + 1);         // pooling
  }

  void spatial_tokenizer() {
    const std::size_t c = cfg.n_channels, t = cfg.n_samples, d = cfg.embed_dim;
    const std::size_t s = cfg.spatial_maps, ps = cfg.spatial_patches();
    total += 2 * c * s * cfg.spatial_kernel * t;
    elementwise(c * s * t);                          // bias
    elementwise(c * s * t);                          // GELU
    elementwise(c * s * t, 2);                       // batch norm
    elementwise(c * s * ps, cfg.spatial_pool_window + 1);
    matmul(c, s * ps, d);
    elementwise(c * d);
  }

  void ffn(std::size_t rows) {
    const std::size_t d = cfg.embed_dim, h = cfg.ffn_expansion * cfg.embed_dim;
    elementwise(rows * d, 7);  // layer norm: mean, center, square-accumulate, scale, affine
    matmul(rows, d, h);
    elementwise(rows * h, 2);  // bias, GELU
    matmul(rows, h, d);
    elementwise(rows * d, 2);  // bias, residual
  }

  void tsia(std::size_t rows, std::size_t ctx, bool electrode_embedding) {
    const std::size_t d = cfg.embed_dim, dh = cfg.head_dim(), heads = cfg.n_heads;
    matmul(ctx, d, d);
    matmul(ctx, d, d);
    if (electrode_embedding) elementwise(ctx * d, 2);
    for (std::size_t h = 0; h < heads; ++h) {
      matmul(ctx, dh, ctx);
      elementwise(ctx * ctx);  // scale
      softmax(ctx * ctx);
      elementwise(ctx * dh, 2);  // squared norms
      elementwise(ctx);          // sqrt
      softmax(ctx);
      matmul(ctx, ctx, dh);
      matmul(1, ctx, dh);
    }
    matmul(rows, d, d);
    if (cfg.use_cosine_gate) {
      matmul(rows, d, d);
      elementwise(rows * d, 2);  // cos, gate
    }
    matmul(rows, d, d);
    for (std::size_t h = 0; h < heads; ++h) {
      matmul(dh, rows, dh);
      elementwise(dh * dh);
      softmax(dh * dh);
      matmul(rows, dh, dh);
    }
    elementwise(rows * d);  // multiplicative integration
    matmul(rows, d, d);
  }

  void concat_mix(std::size_t rows, std::size_t ctx) {
    const std::size_t d = cfg.embed_dim;
    elementwise(ctx * d);   // mean
    elementwise(rows * d);  // broadcast
    matmul(rows, 2 * d, d);
  }

  void fusion() {
    const std::size_t c = cfg.n_channels, d = cfg.embed_dim, p = cfg.n_patches();
    if (cfg.fusion == FusionMode::adaptive) {
      matmul(1, c, d);
      matmul(p, d, d / 2);
      elementwise(p * (d / 2), 2);  // bias, ReLU
      matmul(p, d / 2, 1);
      elementwise(p);
      softmax(p);
      matmul(1, p, d);
    } else {
      elementwise(p * d + c * d);
    }
  }

  void classifier() {
    const std::size_t d = cfg.embed_dim, h = cfg.classifier_hidden;
    matmul(1, 2 * d, h);
    elementwise(h, 2);
    matmul(1, h, cfg.n_classes);
    elementwise(cfg.n_classes);
  }
};

}  // namespace

ModelCost count_params_flops(const ModelConfig& cfg) {
  ModelCost cost;
  cost.params = init_params(cfg, 0).parameter_count();

  FlopCounter f{cfg};
  const std::size_t c = cfg.n_channels, d = cfg.embed_dim, p = cfg.n_patches();
  f.temporal_tokenizer();
  f.spatial_tokenizer();
  if (cfg.use_positional_embedding) f.elementwise(p * d + c * d);
  const bool into_t = cfg.integration == IntegrationMode::st2t ||
                      cfg.integration == IntegrationMode::bidir;
  const bool into_s = cfg.integration == IntegrationMode::st2s ||
                      cfg.integration == IntegrationMode::bidir;
  for (std::size_t l = 0; l < cfg.temporal_depth; ++l) {
    const bool spatial_active = l < cfg.spatial_depth;
    if (spatial_active) f.ffn(c);
    f.ffn(p);
    if (into_t) {
      if (cfg.use_tsia) {
        f.tsia(p, c, cfg.use_electrode_pos_embedding);
      } else {
        f.concat_mix(p, c);
      }
    }
    if (into_s && spatial_active) {
      if (cfg.use_tsia) {
        f.tsia(c, p, false);
      } else {
        f.concat_mix(c, p);
      }
    }
  }
  f.fusion();
  f.classifier();
  cost.flops = f.total;
  return cost;
}

}  // namespace lidsn::model
