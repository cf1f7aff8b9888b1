#include "lidsn/model/params.hpp"

#include <cmath>
#include <string_view>

#include "lidsn/rng.hpp"

namespace lidsn::model {

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : seed_(seed) {}

  Tensor uniform(std::string_view name, Shape shape, std::size_t fan_in) const {
    RngStream rng(seed_, fnv1a(name));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v), true);
  }

  Tensor normal(std::string_view name, Shape shape, double stddev) const {
    RngStream rng(seed_, fnv1a(name));
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.normal(0.0, stddev);
    return Tensor(std::move(shape), std::move(v), true);
  }

  static Tensor constant(Shape shape, double value) { return Tensor::full(std::move(shape), value, true); }

 private:
  std::uint64_t seed_;
};

FfnParams make_ffn(const Initializer& init, const std::string& prefix, const ModelConfig& cfg) {
  const std::size_t d = cfg.embed_dim, h = cfg.ffn_expansion * cfg.embed_dim;
  FfnParams p;
  p.ln_gain = Initializer::constant({d}, 1.0);
  p.ln_bias = Initializer::constant({d}, 0.0);
  p.w_a = init.uniform(prefix + ".w_a", {d, h}, d);
  p.b_a = Initializer::constant({h}, 0.0);
  p.w_b = init.uniform(prefix + ".w_b", {h, d}, h);
  p.b_b = Initializer::constant({d}, 0.0);
  return p;
}

// Mirror blocks attend over the temporal tokens, which carry no electrode identity.
TsiaParams make_tsia(const Initializer& init, const std::string& prefix, const ModelConfig& cfg,
                     bool with_electrode_embedding) {
  const std::size_t d = cfg.embed_dim;
  TsiaParams p;
  p.w_1 = init.uniform(prefix + ".w_1", {d, d}, d);
  p.w_2 = init.uniform(prefix + ".w_2", {d, d}, d);
  if (with_electrode_embedding && cfg.use_electrode_pos_embedding) {
    const std::size_t width = cfg.per_head_electrode_embedding ? d : cfg.head_dim();
    p.e_pos = init.normal(prefix + ".e_pos", {cfg.n_channels, width}, 0.02);
  }
  p.w_t1 = init.uniform(prefix + ".w_t1", {d, d}, d);
  if (cfg.use_cosine_gate) p.w_phi = init.uniform(prefix + ".w_phi", {d, d}, d);
  p.w_k = init.uniform(prefix + ".w_k", {d, d}, d);
  p.w_out = init.uniform(prefix + ".w_out", {d, d}, d);
  return p;
}

void push_ffn(std::vector<NamedTensor>& out, const std::string& prefix, const FfnParams& p) {
  out.emplace_back(prefix + ".ln_gain", p.ln_gain);
  out.emplace_back(prefix + ".ln_bias", p.ln_bias);
  out.emplace_back(prefix + ".w_a", p.w_a);
  out.emplace_back(prefix + ".b_a", p.b_a);
  out.emplace_back(prefix + ".w_b", p.w_b);
  out.emplace_back(prefix + ".b_b", p.b_b);
}

void push_tsia(std::vector<NamedTensor>& out, const std::string& prefix, const TsiaParams& p) {
  out.emplace_back(prefix + ".w_1", p.w_1);
  out.emplace_back(prefix + ".w_2", p.w_2);
  if (p.e_pos.defined()) out.emplace_back(prefix + ".e_pos", p.e_pos);
  out.emplace_back(prefix + ".w_t1", p.w_t1);
  if (p.w_phi.defined()) out.emplace_back(prefix + ".w_phi", p.w_phi);
  out.emplace_back(prefix + ".w_k", p.w_k);
  out.emplace_back(prefix + ".w_out", p.w_out);
}

Tensor copy_of(const Tensor& t) {
  if (!t.defined()) return {};
  return Tensor(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), t.requires_grad());
}

FfnParams copy_of(const FfnParams& p) {
  return {copy_of(p.ln_gain), copy_of(p.ln_bias), copy_of(p.w_a),
          copy_of(p.b_a),     copy_of(p.w_b),     copy_of(p.b_b)};
}

TsiaParams copy_of(const TsiaParams& p) {
  return {copy_of(p.w_1), copy_of(p.w_2), copy_of(p.e_pos), copy_of(p.w_t1),
          copy_of(p.w_phi), copy_of(p.w_k), copy_of(p.w_out)};
}

template <typename T>
std::optional<T> copy_of(const std::optional<T>& p) {
  if (!p) return std::nullopt;
  return copy_of(*p);
}

ConcatMixParams copy_of(const ConcatMixParams& p) { return {copy_of(p.w)}; }

}  // namespace

LidsnParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const Initializer init(seed);
  const std::size_t c = cfg.n_channels, d = cfg.embed_dim, s = cfg.spatial_maps;
  LidsnParams p;

  auto& tt = p.temporal;
  tt.pw_weight = init.uniform("temporal.pw_weight", {d, c}, c);
  tt.pw_bias = Initializer::constant({d}, 0.0);
  tt.bn_gain = Initializer::constant({d}, 1.0);
  tt.bn_bias = Initializer::constant({d}, 0.0);
  tt.bn = BatchNormState(d);
  tt.dw_weight = init.uniform("temporal.dw_weight", {d, cfg.temporal_kernel}, cfg.temporal_kernel);
  tt.dw_bias = Initializer::constant({d}, 0.0);

  auto& st = p.spatial;
  st.in_weight = init.uniform("spatial.in_weight", {s, 1, cfg.spatial_kernel}, cfg.spatial_kernel);
  st.in_bias = Initializer::constant({s}, 0.0);
  st.bn_gain = Initializer::constant({s}, 1.0);
  st.bn_bias = Initializer::constant({s}, 0.0);
  st.bn = BatchNormState(s);
  const std::size_t flat = s * cfg.spatial_patches();
  st.out_weight = init.uniform("spatial.out_weight", {flat, d}, flat);
  st.out_bias = Initializer::constant({d}, 0.0);

  if (cfg.use_positional_embedding) {
    p.temporal_pos = init.normal("temporal_pos", {cfg.n_patches(), d}, 0.02);
    p.spatial_pos = init.normal("spatial_pos", {c, d}, 0.02);
  }

  const bool into_t = cfg.integration == IntegrationMode::st2t ||
                      cfg.integration == IntegrationMode::bidir;
  const bool into_s = cfg.integration == IntegrationMode::st2s ||
                      cfg.integration == IntegrationMode::bidir;
  for (std::size_t l = 0; l < cfg.temporal_depth; ++l) {
    const std::string prefix = "layers." + std::to_string(l);
    const bool spatial_active = l < cfg.spatial_depth;
    LayerParams layer;
    layer.temporal_ffn = make_ffn(init, prefix + ".temporal_ffn", cfg);
    if (spatial_active) layer.spatial_ffn = make_ffn(init, prefix + ".spatial_ffn", cfg);
    if (cfg.use_tsia) {
      if (into_t) layer.to_temporal = make_tsia(init, prefix + ".to_temporal", cfg, true);
      if (into_s && spatial_active)
        layer.to_spatial = make_tsia(init, prefix + ".to_spatial", cfg, false);
    } else {
      if (into_t) layer.mix_temporal = ConcatMixParams{init.uniform(prefix + ".mix_temporal.w", {2 * d, d}, 2 * d)};
      if (into_s && spatial_active)
        layer.mix_spatial = ConcatMixParams{init.uniform(prefix + ".mix_spatial.w", {2 * d, d}, 2 * d)};
    }
    p.layers.push_back(std::move(layer));
  }

  if (cfg.fusion == FusionMode::adaptive) {
    FusionParams f;
    f.w_sp = Initializer::constant({c}, 1.0 / static_cast<double>(c));
    f.att_w1 = init.uniform("fusion.att_w1", {d, d / 2}, d);
    f.att_b1 = Initializer::constant({d / 2}, 0.0);
    f.att_w2 = init.uniform("fusion.att_w2", {d / 2, 1}, d / 2);
    f.att_b2 = Initializer::constant({1}, 0.0);
    p.fusion = std::move(f);
  }

  const std::size_t hid = cfg.classifier_hidden;
  p.classifier.w1 = init.uniform("classifier.w1", {2 * d, hid}, 2 * d);
  p.classifier.b1 = Initializer::constant({hid}, 0.0);
  p.classifier.w2 = init.uniform("classifier.w2", {hid, cfg.n_classes}, hid);
  p.classifier.b2 = Initializer::constant({cfg.n_classes}, 0.0);
  return p;
}

std::vector<NamedTensor> LidsnParams::named_parameters() const {
  std::vector<NamedTensor> out;
  out.emplace_back("temporal.pw_weight", temporal.pw_weight);
  out.emplace_back("temporal.pw_bias", temporal.pw_bias);
  out.emplace_back("temporal.bn_gain", temporal.bn_gain);
  out.emplace_back("temporal.bn_bias", temporal.bn_bias);
  out.emplace_back("temporal.dw_weight", temporal.dw_weight);
  out.emplace_back("temporal.dw_bias", temporal.dw_bias);
  out.emplace_back("spatial.in_weight", spatial.in_weight);
  out.emplace_back("spatial.in_bias", spatial.in_bias);
  out.emplace_back("spatial.bn_gain", spatial.bn_gain);
  out.emplace_back("spatial.bn_bias", spatial.bn_bias);
  out.emplace_back("spatial.out_weight", spatial.out_weight);
  out.emplace_back("spatial.out_bias", spatial.out_bias);
  if (temporal_pos.defined()) out.emplace_back("temporal_pos", temporal_pos);
  if (spatial_pos.defined()) out.emplace_back("spatial_pos", spatial_pos);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layers." + std::to_string(l);
    const auto& layer = layers[l];
    push_ffn(out, prefix + ".temporal_ffn", layer.temporal_ffn);
    if (layer.spatial_ffn) push_ffn(out, prefix + ".spatial_ffn", *layer.spatial_ffn);
    if (layer.to_temporal) push_tsia(out, prefix + ".to_temporal", *layer.to_temporal);
    if (layer.to_spatial) push_tsia(out, prefix + ".to_spatial", *layer.to_spatial);
    if (layer.mix_temporal) out.emplace_back(prefix + ".mix_temporal.w", layer.mix_temporal->w);
    if (layer.mix_spatial) out.emplace_back(prefix + ".mix_spatial.w", layer.mix_spatial->w);
  }
  if (fusion) {
    out.emplace_back("fusion.w_sp", fusion->w_sp);
    out.emplace_back("fusion.att_w1", fusion->att_w1);
    out.emplace_back("fusion.att_b1", fusion->att_b1);
    out.emplace_back("fusion.att_w2", fusion->att_w2);
    out.emplace_back("fusion.att_b2", fusion->att_b2);
  }
  out.emplace_back("classifier.w1", classifier.w1);
  out.emplace_back("classifier.b1", classifier.b1);
  out.emplace_back("classifier.w2", classifier.w2);
  out.emplace_back("classifier.b2", classifier.b2);
  return out;
}

std::vector<NamedBuffer> LidsnParams::named_buffers() {
  return {{"temporal.bn.running_mean", &temporal.bn.running_mean},
          {"temporal.bn.running_var", &temporal.bn.running_var},
          {"spatial.bn.running_mean", &spatial.bn.running_mean},
          {"spatial.bn.running_var", &spatial.bn.running_var}};
}

std::size_t LidsnParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named_parameters()) n += t.numel();
  return n;
}

LidsnParams clone_params(const LidsnParams& src) {
  LidsnParams p;
  p.temporal = {copy_of(src.temporal.pw_weight), copy_of(src.temporal.pw_bias),
                copy_of(src.temporal.bn_gain),   copy_of(src.temporal.bn_bias),
                src.temporal.bn,                 copy_of(src.temporal.dw_weight),
                copy_of(src.temporal.dw_bias)};
  p.spatial = {copy_of(src.spatial.in_weight), copy_of(src.spatial.in_bias),
               copy_of(src.spatial.bn_gain),   copy_of(src.spatial.bn_bias),
               src.spatial.bn,                 copy_of(src.spatial.out_weight),
               copy_of(src.spatial.out_bias)};
  p.temporal_pos = copy_of(src.temporal_pos);
  p.spatial_pos = copy_of(src.spatial_pos);
  for (const auto& layer : src.layers) {
    LayerParams l;
    l.temporal_ffn = copy_of(layer.temporal_ffn);
    l.spatial_ffn = copy_of(layer.spatial_ffn);
    l.to_temporal = copy_of(layer.to_temporal);
    l.to_spatial = copy_of(layer.to_spatial);
    if (layer.mix_temporal) l.mix_temporal = copy_of(*layer.mix_temporal);
    if (layer.mix_spatial) l.mix_spatial = copy_of(*layer.mix_spatial);
    p.layers.push_back(std::move(l));
  }
  if (src.fusion) {
    const auto& f = *src.fusion;
    p.fusion = FusionParams{copy_of(f.w_sp), copy_of(f.att_w1), copy_of(f.att_b1),
                            copy_of(f.att_w2), copy_of(f.att_b2)};
  }
  const auto& c = src.classifier;
  p.classifier = {copy_of(c.w1), copy_of(c.b1), copy_of(c.w2), copy_of(c.b2)};
  return p;
}

}  // namespace lidsn::model
