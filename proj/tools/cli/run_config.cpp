#include "run_config.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "lidsn/error.hpp"

namespace lidsn::cli {

using json = nlohmann::ordered_json;

namespace {

/// Typed field access on one JSON object; remembers which keys were read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  template <typename F>
  void with(const char* key, F&& f) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) f(*it, name(key));
  }

  void size(const char* key, std::size_t& out) {
    with(key, [&](const json& v, const std::string& n) {
      if (!v.is_number_unsigned()) fail(n, "expected a non-negative integer");
      out = v.get<std::size_t>();
    });
  }
  void u64(const char* key, std::uint64_t& out) {
    with(key, [&](const json& v, const std::string& n) {
      if (!v.is_number_unsigned()) fail(n, "expected a non-negative integer");
      out = v.get<std::uint64_t>();
    });
  }
  void real(const char* key, double& out) {
    with(key, [&](const json& v, const std::string& n) {
      if (!v.is_number()) fail(n, "expected a number");
      out = v.get<double>();
    });
  }
  void flag(const char* key, bool& out) {
    with(key, [&](const json& v, const std::string& n) {
      if (!v.is_boolean()) fail(n, "expected true or false");
      out = v.get<bool>();
    });
  }
  void text(const char* key, std::string& out) {
    with(key, [&](const json& v, const std::string& n) {
      if (!v.is_string()) fail(n, "expected a string");
      out = v.get<std::string>();
    });
  }
  template <typename F>
  void object(const char* key, F&& f) {
    with(key, [&](const json& v, const std::string& n) {
      Section s(v, n);
      f(s);
      s.finish();
    });
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) fail(name(key.c_str()), "unknown key");
    }
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError("config " + where + ": " + what);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Parse>
auto parse_enum(const json& v, const std::string& n, Parse parse) {
  if (!v.is_string()) Section::fail(n, "expected a string");
  try {
    return parse(v.get<std::string>());
  } catch (const ConfigError& e) {
    Section::fail(n, e.what());
  }
}

void read_model(Section& s, model::ModelConfig& m) {
  s.size("n_channels", m.n_channels);
  s.size("n_samples", m.n_samples);
  s.size("n_classes", m.n_classes);
  s.size("embed_dim", m.embed_dim);
  s.size("spatial_maps", m.spatial_maps);
  s.size("n_heads", m.n_heads);
  s.size("temporal_depth", m.temporal_depth);
  s.size("spatial_depth", m.spatial_depth);
  s.real("dropout", m.dropout);
  s.size("ffn_expansion", m.ffn_expansion);
  s.size("classifier_hidden", m.classifier_hidden);
  s.size("temporal_kernel", m.temporal_kernel);
  s.size("pool_window", m.pool_window);
  s.size("pool_stride", m.pool_stride);
  s.size("spatial_kernel", m.spatial_kernel);
  s.size("spatial_pool_window", m.spatial_pool_window);
  s.size("spatial_pool_stride", m.spatial_pool_stride);
  s.with("integration", [&](const json& v, const std::string& n) {
    m.integration = parse_enum(v, n, model::parse_integration_mode);
  });
  s.with("fusion", [&](const json& v, const std::string& n) {
    m.fusion = parse_enum(v, n, model::parse_fusion_mode);
  });
  s.flag("use_positional_embedding", m.use_positional_embedding);
  s.flag("use_cosine_gate", m.use_cosine_gate);
  s.flag("use_electrode_pos_embedding", m.use_electrode_pos_embedding);
  s.flag("use_tsia", m.use_tsia);
  s.flag("per_head_electrode_embedding", m.per_head_electrode_embedding);
  s.real("bn_momentum", m.bn_momentum);
  s.real("norm_eps", m.norm_eps);
}

void read_train(Section& s, train::TrainConfig& t) {
  s.real("learning_rate", t.learning_rate);
  s.size("batch_size", t.batch_size);
  s.size("max_epochs", t.max_epochs);
  s.size("patience", t.patience);
  s.real("beta1", t.beta1);
  s.real("beta2", t.beta2);
  s.real("eps", t.eps);
  s.real("weight_decay", t.weight_decay);
  s.with("class_weights", [&](const json& v, const std::string& n) {
    t.class_weights = parse_enum(v, n, train::parse_class_weight_mode);
  });
  s.real("val_fraction", t.val_fraction);
}

void read_synth(Section& s, data::SynthSpec& d) {
  s.size("n_subjects", d.n_subjects);
  s.size("trials_per_subject", d.trials_per_subject);
  s.size("n_channels", d.n_channels);
  s.size("n_samples", d.n_samples);
  s.real("fs", d.fs);
  s.with("classes", [&](const json& v, const std::string& n) {
    if (!v.is_array()) Section::fail(n, "expected an array");
    d.classes.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      Section c(v[i], n + "[" + std::to_string(i) + "]");
      data::ClassRecipe r;
      c.real("freq_hz", r.freq_hz);
      c.with("channels", [&](const json& ch, const std::string& cn) {
        if (!ch.is_array()) Section::fail(cn, "expected an array");
        for (const auto& x : ch) {
          if (!x.is_number_unsigned()) Section::fail(cn, "expected channel indices");
          r.channels.push_back(x.get<std::size_t>());
        }
      });
      c.real("amplitude", r.amplitude);
      c.finish();
      d.classes.push_back(std::move(r));
    }
  });
  s.real("noise_exponent", d.noise_exponent);
  s.real("pink_sigma", d.pink_sigma);
  s.real("white_sigma", d.white_sigma);
  s.real("gain_spread", d.gain_spread);
  s.real("freq_jitter_hz", d.freq_jitter_hz);
}

void read_rpsd(Section& s, data::RpsdParams& r) {
  s.real("outer_seconds", r.outer_seconds);
  s.real("outer_overlap", r.outer_overlap);
  s.real("inner_seconds", r.inner_seconds);
  s.real("inner_overlap", r.inner_overlap);
  s.with("bands", [&](const json& v, const std::string& n) {
    if (!v.is_array()) Section::fail(n, "expected an array of [lo_hz, hi_hz] pairs");
    r.bands.clear();
    for (const auto& b : v) {
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
        Section::fail(n, "expected an array of [lo_hz, hi_hz] pairs");
      }
      r.bands.push_back({b[0].get<double>(), b[1].get<double>()});
    }
  });
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section top(root, "");
  top.object("model", [&](Section& s) { read_model(s, cfg.model); });
  top.object("train", [&](Section& s) { read_train(s, cfg.train); });
  top.object("data", [&](Section& s) {
    s.text("path", cfg.data.path);
    s.u64("synth_seed", cfg.data.synth_seed);
    s.object("synth", [&](Section& d) { read_synth(d, cfg.data.synth); });
  });
  top.with("protocol", [&](const json& v, const std::string& n) {
    cfg.protocol = parse_enum(v, n, data::parse_protocol);
  });
  top.object("split", [&](Section& s) {
    s.real("train_fraction", cfg.split.train_fraction);
    s.size("n_folds", cfg.split.n_folds);
  });
  top.object("preprocessing", [&](Section& s) {
    s.flag("ea", cfg.preprocessing.ea);
    s.flag("ea_train_only", cfg.preprocessing.ea_train_only);
    s.flag("rpsd", cfg.preprocessing.rpsd);
    s.object("rpsd_params", [&](Section& r) { read_rpsd(r, cfg.preprocessing.rpsd_params); });
  });
  top.text("output", cfg.output);
  top.with("seeds", [&](const json& v, const std::string& n) {
    if (!v.is_array() || v.empty()) Section::fail(n, "expected a non-empty array of seeds");
    cfg.seeds.clear();
    for (const auto& s : v) {
      if (!s.is_number_unsigned()) Section::fail(n, "expected non-negative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  });
  top.finish();
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << f.rdbuf();
  return parse_run_config(text.str());
}

std::string run_config_json(const RunConfig& cfg) {
  const auto& m = cfg.model;
  const auto& t = cfg.train;
  const auto& d = cfg.data.synth;
  const auto& r = cfg.preprocessing.rpsd_params;
  json classes = json::array();
  for (const auto& c : d.classes) {
    classes.push_back({{"freq_hz", c.freq_hz}, {"channels", c.channels}, {"amplitude", c.amplitude}});
  }
  json bands = json::array();
  for (const auto& b : r.bands) bands.push_back({b.lo_hz, b.hi_hz});
  json j;
  j["model"] = {{"n_channels", m.n_channels},
                {"n_samples", m.n_samples},
                {"n_classes", m.n_classes},
                {"embed_dim", m.embed_dim},
                {"spatial_maps", m.spatial_maps},
                {"n_heads", m.n_heads},
                {"temporal_depth", m.temporal_depth},
                {"spatial_depth", m.spatial_depth},
                {"dropout", m.dropout},
                {"ffn_expansion", m.ffn_expansion},
                {"classifier_hidden", m.classifier_hidden},
                {"temporal_kernel", m.temporal_kernel},
                {"pool_window", m.pool_window},
                {"pool_stride", m.pool_stride},
                {"spatial_kernel", m.spatial_kernel},
                {"spatial_pool_window", m.spatial_pool_window},
                {"spatial_pool_stride", m.spatial_pool_stride},
                {"integration", std::string(model::to_string(m.integration))},
                {"fusion", std::string(model::to_string(m.fusion))},
                {"use_positional_embedding", m.use_positional_embedding},
                {"use_cosine_gate", m.use_cosine_gate},
                {"use_electrode_pos_embedding", m.use_electrode_pos_embedding},
                {"use_tsia", m.use_tsia},
                {"per_head_electrode_embedding", m.per_head_electrode_embedding},
                {"bn_momentum", m.bn_momentum},
                {"norm_eps", m.norm_eps}};
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"patience", t.patience},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"eps", t.eps},
                {"weight_decay", t.weight_decay},
                {"class_weights", train::to_string(t.class_weights)},
                {"val_fraction", t.val_fraction}};
  j["data"] = {{"path", cfg.data.path},
               {"synth_seed", cfg.data.synth_seed},
               {"synth",
                {{"n_subjects", d.n_subjects},
                 {"trials_per_subject", d.trials_per_subject},
                 {"n_channels", d.n_channels},
                 {"n_samples", d.n_samples},
                 {"fs", d.fs},
                 {"classes", classes},
                 {"noise_exponent", d.noise_exponent},
                 {"pink_sigma", d.pink_sigma},
                 {"white_sigma", d.white_sigma},
                 {"gain_spread", d.gain_spread},
                 {"freq_jitter_hz", d.freq_jitter_hz}}}};
  j["protocol"] = data::to_string(cfg.protocol);
  j["split"] = {{"train_fraction", cfg.split.train_fraction}, {"n_folds", cfg.split.n_folds}};
  j["preprocessing"] = {{"ea", cfg.preprocessing.ea},
                        {"ea_train_only", cfg.preprocessing.ea_train_only},
                        {"rpsd", cfg.preprocessing.rpsd},
                        {"rpsd_params",
                         {{"outer_seconds", r.outer_seconds},
                          {"outer_overlap", r.outer_overlap},
                          {"inner_seconds", r.inner_seconds},
                          {"inner_overlap", r.inner_overlap},
                          {"bands", bands}}}};
  j["output"] = cfg.output;
  j["seeds"] = cfg.seeds;
  return j.dump(2) + "\n";
}

}  // namespace lidsn::cli
