#include "lidsn/model/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidsn/error.hpp"
#include "lidsn/ops.hpp"

namespace lidsn::model {

namespace {

Tensor head_slice(const Tensor& t, std::size_t h, std::size_t dh) {
  return slice(t, 1, h * dh, (h + 1) * dh);
}

Tensor row_vector(const Tensor& t) { return reshape(t, {1, t.numel()}); }

}  // namespace

std::vector<Tensor> temporal_tokenize(const Tensor& x, TemporalTokenizerParams& p,
                                      const ModelConfig& cfg, Mode mode) {
  Tensor y = conv1d_pointwise(x, p.pw_weight, p.pw_bias);
  y = batchnorm(y, p.bn_gain, p.bn_bias, p.bn, mode, cfg.bn_momentum, cfg.norm_eps);
  y = conv1d_depthwise(y, p.dw_weight, p.dw_bias);
  y = gelu(y);
  y = avgpool1d(y, cfg.pool_window, cfg.pool_stride);
  std::vector<Tensor> out;
  out.reserve(x.dim(0));
  for (std::size_t b = 0; b < x.dim(0); ++b) out.push_back(transpose(select(y, b)));
  return out;
}

std::vector<Tensor> spatial_tokenize(const Tensor& x, SpatialTokenizerParams& p,
                                     const ModelConfig& cfg, Mode mode) {
  const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  Tensor y = conv1d(reshape(x, {batch * ch, 1, len}), p.in_weight, p.in_bias);
  y = gelu(y);
  y = batchnorm(y, p.bn_gain, p.bn_bias, p.bn, mode, cfg.bn_momentum, cfg.norm_eps);
  y = avgpool1d(y, cfg.spatial_pool_window, cfg.spatial_pool_stride);
  y = reshape(y, {batch * ch, y.dim(1) * y.dim(2)});
  y = add(matmul(y, p.out_weight), p.out_bias);
  y = reshape(y, {batch, ch, cfg.embed_dim});
  std::vector<Tensor> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) out.push_back(select(y, b));
  return out;
}

Tensor ffn_block(const Tensor& z, const FfnParams& p, const ModelConfig& cfg, RngStream& rng,
                 Mode mode) {
  Tensor h = layernorm(z, p.ln_gain, p.ln_bias, cfg.norm_eps);
  h = gelu(add(matmul(h, p.w_a), p.b_a));
  h = add(matmul(h, p.w_b), p.b_b);
  return add(z, dropout(h, cfg.dropout, rng, mode));
}

SacmResult sacm_context(const Tensor& context, const TsiaParams& p, const ModelConfig& cfg) {
  const std::size_t heads = cfg.n_heads, dh = cfg.head_dim(), q = context.dim(0);
  Tensor y1 = matmul(context, p.w_1);
  Tensor y2 = matmul(context, p.w_2);
  if (p.e_pos.defined()) {
    Tensor e = p.e_pos;
    if (e.dim(1) != cfg.embed_dim) {
      std::vector<Tensor> copies(heads, e);
      e = concat(copies, 1);
    }
    y1 = add(y1, e);
    y2 = add(y2, e);
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  SacmResult r;
  std::vector<Tensor> pooled, weights;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor a = head_slice(y1, h, dh);
    Tensor b = head_slice(y2, h, dh);
    Tensor attn = softmax(scale(matmul(a, transpose(b)), inv_sqrt), 1);
    Tensor omega = softmax(reshape(l2norm(a, 1), {1, q}), 1);
    pooled.push_back(matmul(omega, matmul(attn, a)));
    weights.push_back(omega);
    r.attention.push_back(attn);
  }
  r.pooled = concat(pooled, 1);
  r.importance = concat(weights, 0);
  return r;
}

TcamResult tcam_refine(const Tensor& tokens, const TsiaParams& p, const ModelConfig& cfg) {
  const std::size_t dh = cfg.head_dim();
  Tensor x1 = matmul(tokens, p.w_t1);
  if (p.w_phi.defined()) x1 = mul(x1, cosine(matmul(tokens, p.w_phi)));
  Tensor k = matmul(tokens, p.w_k);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(tokens.dim(0)));
  TcamResult r;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    Tensor xh = head_slice(x1, h, dh);
    Tensor attn = softmax(scale(matmul(transpose(xh), head_slice(k, h, dh)), inv_sqrt), 1);
    r.refined.push_back(matmul(xh, attn));
    r.attention.push_back(attn);
  }
  return r;
}

Tensor tsia(const Tensor& tokens, const Tensor& context, const TsiaParams& p,
            const ModelConfig& cfg, TsiaTrace* trace) {
  const std::size_t dh = cfg.head_dim();
  SacmResult sacm = sacm_context(context, p, cfg);
  TcamResult tcam = tcam_refine(tokens, p, cfg);
  std::vector<Tensor> gated;
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    gated.push_back(mul(tcam.refined[h], head_slice(sacm.pooled, h, dh)));
  }
  if (trace != nullptr) {
    trace->sacm = sacm.attention;
    trace->tcam = tcam.attention;
    trace->importance = sacm.importance;
  }
  return matmul(concat(gated, 1), p.w_out);
}

Tensor concat_mix(const Tensor& tokens, const Tensor& context, const ConcatMixParams& p) {
  Tensor summary = row_vector(mean(context, 0));
  Tensor tiled = mul(Tensor::full({tokens.dim(0), 1}, 1.0), summary);
  const Tensor parts[] = {tokens, tiled};
  return matmul(concat(parts, 1), p.w);
}

Encoded encode_tokens(const Tensor& temporal0, const Tensor& spatial0, const LidsnParams& p,
                      const ModelConfig& cfg, RngStream& rng, Mode mode, ForwardTrace* trace) {
  Tensor zt = temporal0, zs = spatial0;
  if (cfg.use_positional_embedding) {
    zt = add(zt, p.temporal_pos);
    zs = add(zs, p.spatial_pos);
  }
  for (const auto& layer : p.layers) {
    Tensor hs = layer.spatial_ffn ? ffn_block(zs, *layer.spatial_ffn, cfg, rng, mode) : zs;
    Tensor ht = ffn_block(zt, layer.temporal_ffn, cfg, rng, mode);
    LayerTrace lt;
    Tensor next_t = ht, next_s = hs;
    if (layer.to_temporal) {
      next_t = tsia(ht, hs, *layer.to_temporal, cfg, trace ? &lt.integration : nullptr);
    } else if (layer.mix_temporal) {
      next_t = concat_mix(ht, hs, *layer.mix_temporal);
    }
    if (layer.to_spatial) {
      next_s = tsia(hs, ht, *layer.to_spatial, cfg);
    } else if (layer.mix_spatial) {
      next_s = concat_mix(hs, ht, *layer.mix_spatial);
    }
    if (trace != nullptr) {
      lt.temporal_pre = ht;
      lt.temporal_post = next_t;
      trace->layers.push_back(std::move(lt));
    }
    zt = next_t;
    zs = next_s;
  }
  return {zt, zs};
}

Tensor adaptive_fuse(const Tensor& temporal, const Tensor& spatial, const LidsnParams& p,
                     const ModelConfig& cfg, Tensor* alpha_out) {
  Tensor zt, zs;
  if (cfg.fusion == FusionMode::adaptive) {
    if (!p.fusion) throw ConfigError("adaptive fusion requested but fusion parameters are absent");
    const auto& f = *p.fusion;
    zs = matmul(row_vector(f.w_sp), spatial);
    Tensor hidden = relu(add(matmul(temporal, f.att_w1), f.att_b1));
    Tensor scores = add(matmul(hidden, f.att_w2), f.att_b2);
    Tensor alpha = softmax(row_vector(scores), 1);
    zt = matmul(alpha, temporal);
    if (alpha_out != nullptr) *alpha_out = alpha;
  } else {
    zt = row_vector(mean(temporal, 0));
    zs = row_vector(mean(spatial, 0));
  }
  const Tensor parts[] = {zt, zs};
  return concat(parts, 1);
}

Tensor classify(const Tensor& u, const ClassifierParams& p) {
  Tensor h = relu(add(matmul(u, p.w1), p.b1));
  return add(matmul(h, p.w2), p.b2);
}

LidsnModel::LidsnModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), params_(init_params(cfg_, seed)) {}

LidsnModel::LidsnModel(ModelConfig cfg, LidsnParams params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

void LidsnModel::check_input(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(1) != cfg_.n_channels || x.dim(2) != cfg_.n_samples ||
      x.dim(0) == 0) {
    throw DimensionError("model expects input [B x " + std::to_string(cfg_.n_channels) + " x " +
                         std::to_string(cfg_.n_samples) + "], got " + shape_str(x.shape()));
  }
}

Tensor LidsnModel::forward(const Tensor& x, Mode mode, RngStream& rng,
                           std::vector<ForwardTrace>* traces) {
  check_input(x);
  const std::vector<Tensor> zt = temporal_tokenize(x, params_.temporal, cfg_, mode);
  const std::vector<Tensor> zs = spatial_tokenize(x, params_.spatial, cfg_, mode);
  if (traces != nullptr) traces->assign(x.dim(0), ForwardTrace{});
  std::vector<Tensor> rows;
  rows.reserve(x.dim(0));
  for (std::size_t b = 0; b < x.dim(0); ++b) {
    ForwardTrace* trace = traces ? &(*traces)[b] : nullptr;
    Encoded enc = encode_tokens(zt[b], zs[b], params_, cfg_, rng, mode, trace);
    Tensor u = adaptive_fuse(enc.temporal, enc.spatial, params_, cfg_,
                             trace ? &trace->alpha : nullptr);
    rows.push_back(classify(u, params_.classifier));
  }
  return concat(rows, 0);
}

Tensor LidsnModel::predict(const Tensor& x, std::vector<ForwardTrace>* traces) {
  RngStream unused(0);
  return forward(reshape(x, {1, x.dim(0), x.dim(1)}), Mode::eval, unused, traces);
}

Tensor saliency(LidsnModel& model, const Tensor& x, std::size_t class_index) {
  const auto& cfg = model.config();
  if (class_index >= cfg.n_classes) {
    throw ConfigError("saliency: class index " + std::to_string(class_index) + " out of range [0, " +
                      std::to_string(cfg.n_classes) + ")");
  }
  if (x.rank() != 2) throw DimensionError("saliency: expects [C x T], got " + shape_str(x.shape()));
  Tensor input(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor logits = model.predict(input);
    backward(sum(slice(logits, 1, class_index, class_index + 1)), tape);
  }
  std::vector<double> map(input.numel(), 0.0);
  if (input.has_grad()) {
    const auto g = input.grad();
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = std::abs(g[i]);
  }
  // Parameters picked up gradients as a side effect; leave them clean.
  for (auto& [name, t] : model.params().named_parameters()) {
    Tensor handle = t;
    handle.zero_grad();
  }
  const double peak = map.empty() ? 0.0 : *std::max_element(map.begin(), map.end());
  if (peak > 0.0) {
    for (auto& v : map) v /= peak;
  }
  return Tensor(x.shape(), std::move(map));
}

}  // namespace lidsn::model
