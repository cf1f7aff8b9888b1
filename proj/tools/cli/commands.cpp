#include "commands.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>

#include "lidsn/data/epochs.hpp"
#include "lidsn/data/preprocess.hpp"
#include "lidsn/error.hpp"
#include "lidsn/model/grad_suite.hpp"
#include "lidsn/model/viz.hpp"
#include "lidsn/train/snapshot.hpp"
#include "run_config.hpp"

namespace lidsn::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Options {
  std::string config;
  bool print_config = false;
  std::string out;
  std::string in;
  std::string model;
  std::string subset = "test";
  std::string protocol;
  std::vector<std::size_t> trials{0};
  std::size_t fold = 0;
  std::size_t configs = 20;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool tiny = false;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.out.empty()) cfg.output = o.out;
  if (o.seed_given) cfg.seeds = {o.seed};
  if (!o.protocol.empty()) cfg.protocol = data::parse_protocol(o.protocol);
  return cfg;
}

data::EpochSet load_data(const RunConfig& cfg) {
  if (!cfg.data.path.empty()) return data::load_epochs(cfg.data.path);
  return data::synth_generate(cfg.data.synth, cfg.data.synth_seed);
}

const data::EpochSet& pick(const train::FoldData& d, const std::string& subset) {
  if (subset == "train") return d.train;
  if (subset == "val") return d.val;
  if (subset == "test") return d.test;
  throw ConfigError("unknown subset '" + subset + "' (expected train, val or test)");
}

struct Loaded {
  RunConfig cfg;
  train::FoldData fold;
  std::unique_ptr<model::LidsnModel> model;
};

Loaded load_fold_model(const Options& o) {
  Loaded l{resolve(o), {}, nullptr};
  const data::EpochSet set = load_data(l.cfg);
  const data::SplitPlan plan = data::make_split(set, l.cfg.protocol, l.cfg.split);
  if (o.fold >= plan.folds.size()) {
    throw ConfigError("fold " + std::to_string(o.fold) + " out of range; the plan has " +
                      std::to_string(plan.folds.size()));
  }
  l.fold = train::prepare_fold(set, plan.folds[o.fold], l.cfg.preprocessing, l.cfg.train.val_fraction);
  l.model = std::make_unique<model::LidsnModel>(train::fit_geometry(l.cfg.model, l.fold.train), 0);
  train::load_snapshot(o.model, l.model->params());
  return l;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = resolve(o);
  if (o.print_config) {
    out << run_config_json(cfg);
    return kOk;
  }
  const auto t0 = std::chrono::steady_clock::now();
  const data::EpochSet set = load_data(cfg);
  const data::SplitPlan plan = data::make_split(set, cfg.protocol, cfg.split);
  const fs::path root = cfg.output;
  fs::create_directories(root);

  json doc;
  doc["config"] = json::parse(run_config_json(cfg));
  doc["config"].erase("output");
  doc["runs"] = json::array();
  std::string curves = "seed,fold,epoch,train_loss,val_loss,val_acc\n";
  std::vector<double> accs, f1s;
  bool first = true;
  for (std::uint64_t seed : cfg.seeds) {
    train::TrainConfig tc = cfg.train;
    tc.seed = seed;
    const fs::path seed_dir = root / ("seed_" + std::to_string(seed));
    const auto on_fold = [&](const train::FoldReport& r, model::LidsnModel& m) {
      const fs::path dir = seed_dir / ("fold_" + std::to_string(r.fold));
      fs::create_directories(dir);
      train::save_snapshot(m.params(), dir / "model.bin");
      out << "seed=" << seed << " fold=" << r.fold << " epochs=" << r.training.stop_epoch
          << " best_epoch=" << r.training.best_epoch << " train_acc=" << num(r.train_eval.accuracy)
          << " test_acc=" << num(r.test_eval.accuracy) << " test_macro_f1=" << num(r.test_eval.macro_f1)
          << "\n";
    };
    const train::ProtocolReport report =
        train::run_protocol(set, plan, cfg.model, tc, cfg.preprocessing, worker_threads(), on_fold);
    for (const auto& r : report.folds) {
      train::ProtocolReport single = report;
      single.folds = {r};
      const fs::path dir = seed_dir / ("fold_" + std::to_string(r.fold));
      model::write_text_file(dir / "report.json", train::report_json(single));
      model::write_text_file(dir / "curves.csv", train::curves_csv(single));
      for (const auto& e : r.training.curve) {
        curves += std::to_string(seed) + "," + std::to_string(r.fold) + "," + std::to_string(e.epoch) + "," +
                  num(e.train_loss) + "," + num(e.val_loss) + "," + num(e.val_acc) + "\n";
      }
      accs.push_back(r.test_eval.accuracy);
      f1s.push_back(r.test_eval.macro_f1);
      if (first) {
        fs::copy_file(dir / "model.bin", root / "model.bin", fs::copy_options::overwrite_existing);
        first = false;
      }
    }
    doc["runs"].push_back(json::parse(train::report_json(report)));
  }
  const auto acc = train::aggregate(accs), f1 = train::aggregate(f1s);
  doc["summary"] = {{"folds", accs.size()},
                    {"accuracy", {{"mean", acc.mean}, {"std", acc.std}}},
                    {"macro_f1", {{"mean", f1.mean}, {"std", f1.std}}}};
  model::write_text_file(root / "report.json", doc.dump(2) + "\n");
  model::write_text_file(root / "curves.csv", curves);
  out << "acc_mean=" << num(acc.mean) << " acc_std=" << num(acc.std) << " macro_f1_mean=" << num(f1.mean)
      << " macro_f1_std=" << num(f1.std) << "\n";
  err << "elapsed=" << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << "s\n";
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  if (o.print_config) {
    out << run_config_json(resolve(o));
    return kOk;
  }
  Loaded l = load_fold_model(o);
  const train::Evaluation e = train::evaluate(*l.model, pick(l.fold, o.subset));
  out << "n=" << e.n << " acc=" << num(e.accuracy) << " macro_f1=" << num(e.macro_f1);
  if (e.positive_f1) out << " positive_f1=" << num(*e.positive_f1);
  out << "\n";
  const fs::path dir = o.out.empty() ? fs::path(o.model).parent_path() : fs::path(o.out);
  if (!dir.empty()) fs::create_directories(dir);
  model::write_text_file(dir / ("confusion_" + o.subset + ".csv"), train::confusion_csv(e));
  return kOk;
}

int cmd_export_viz(const Options& o, std::ostream& out) {
  Loaded l = load_fold_model(o);
  const data::EpochSet& set = pick(l.fold, o.subset);
  for (auto t : o.trials) {
    if (t >= set.n_trials()) {
      throw ConfigError("trial " + std::to_string(t) + " out of range; the " + o.subset + " set has " +
                        std::to_string(set.n_trials()));
    }
  }
  const fs::path dir = o.out.empty() ? fs::path("viz") : fs::path(o.out);
  fs::create_directories(dir);
  std::size_t written = 0;
  auto emit = [&](const std::string& stem, const Tensor& m) {
    model::write_text_file(dir / (stem + ".csv"), model::matrix_csv(m));
    model::write_text_file(dir / (stem + ".svg"), model::heatmap_svg(m));
    written += 2;
  };

  std::vector<model::ForwardTrace> traces;
  RngStream unused(0);
  l.model->forward(train::batch_tensor(set, o.trials), Mode::eval, unused, &traces);
  // Maps are averaged over the requested trials.
  auto average = [&](auto&& get) {
    Tensor acc = get(traces[0]).detach();
    auto a = acc.mutable_data();
    for (std::size_t i = 1; i < traces.size(); ++i) {
      const auto v = get(traces[i]).data();
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += v[k];
    }
    for (auto& v : a) v /= static_cast<double>(traces.size());
    return acc;
  };
  const auto& layers = traces[0].layers;
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& integ = layers[li].integration;
    for (std::size_t h = 0; h < integ.sacm.size(); ++h) {
      const std::string tag = "l" + std::to_string(li) + "_h" + std::to_string(h);
      emit("sacm_" + tag, average([&](const model::ForwardTrace& t) { return t.layers[li].integration.sacm[h]; }));
      emit("tcam_" + tag, average([&](const model::ForwardTrace& t) { return t.layers[li].integration.tcam[h]; }));
    }
    if (integ.importance.defined()) {
      emit("omega_l" + std::to_string(li),
           average([&](const model::ForwardTrace& t) { return t.layers[li].integration.importance; }));
    }
  }
  if (traces[0].alpha.defined()) emit("alpha", average([](const model::ForwardTrace& t) { return t.alpha; }));
  for (auto t : o.trials) {
    const Tensor x({set.n_channels, set.n_samples},
                   std::vector<double>(set.trial(t).begin(), set.trial(t).end()));
    emit("saliency_trial" + std::to_string(t),
         model::saliency(*l.model, x, static_cast<std::size_t>(set.labels[t])));
  }
  out << "files=" << written << " dir=" << dir.string() << "\n";
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const std::uint64_t seed = o.seed_given ? o.seed : cfg.data.synth_seed;
  const data::EpochSet set = data::synth_generate(cfg.data.synth, seed);
  data::save_epochs(set, o.out);
  out << "trials=" << set.n_trials() << " channels=" << set.n_channels << " samples=" << set.n_samples
      << " classes=" << set.n_classes << "\n";
  return kOk;
}

int cmd_align(const Options& o, std::ostream& out) {
  const data::EpochSet set = data::euclidean_align(data::load_epochs(o.in));
  data::save_epochs(set, o.out);
  out << "trials=" << set.n_trials() << " subjects=" << set.subject_ids().size() << "\n";
  return kOk;
}

int cmd_features(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const data::EpochSet set = data::rpsd_features(data::load_epochs(o.in), cfg.preprocessing.rpsd_params);
  data::save_epochs(set, o.out);
  out << "trials=" << set.n_trials() << " channels=" << set.n_channels << " features=" << set.n_samples
      << "\n";
  return kOk;
}

int cmd_split(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  const data::EpochSet set = o.in.empty() ? load_data(cfg) : data::load_epochs(o.in);
  const data::SplitPlan plan = data::make_split(set, cfg.protocol, cfg.split);
  std::string csv = "fold,role,trial\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (auto i : plan.folds[f].train) csv += std::to_string(f) + ",train," + std::to_string(i) + "\n";
    for (auto i : plan.folds[f].test) csv += std::to_string(f) + ",test," + std::to_string(i) + "\n";
  }
  if (o.out.empty()) {
    out << csv;
  } else {
    model::write_text_file(o.out, csv);
    out << "protocol=" << data::to_string(plan.protocol) << " folds=" << plan.folds.size() << "\n";
  }
  return kOk;
}

int cmd_count(const Options& o, std::ostream& out) {
  const RunConfig cfg = resolve(o);
  if (o.print_config) {
    out << run_config_json(cfg);
    return kOk;
  }
  const model::ModelCost cost = model::count_params_flops(cfg.model);
  out << "params=" << cost.params << " flops=" << cost.flops << "\n";
  return kOk;
}

int cmd_grad_check(const Options& o, std::ostream& out) {
  RngStream draw(o.seed, 0x7467);
  double worst = 0.0;
  for (std::size_t i = 0; i < o.configs; ++i) {
    const model::ModelConfig cfg = model::random_tiny_config(draw);
    const GradCheckResult r = model::network_grad_check(cfg, o.seed + i);
    worst = std::max(worst, r.max_rel_error);
    out << "config=" << i << " integration=" << model::to_string(cfg.integration)
        << " fusion=" << model::to_string(cfg.fusion) << " coords=" << r.coords_checked
        << " max_rel_err=" << num(r.max_rel_error) << "\n";
  }
  const bool pass = worst < 1e-4;
  out << "max_rel_err=" << num(worst) << " threshold=1e-4 " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kOk : kNumericAbort;
}

int fail(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << "error[" << kind << "]: " << message << "\n";
  return code;
}

}  // namespace

std::size_t worker_threads() {
  if (const char* env = std::getenv("LIDSN_THREADS")) {
    char* end = nullptr;
    const unsigned long n = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Dual-stream EEG classifier with per-layer cross-stream attention", "lidsn"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  auto config_opts = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_flag("--print-config", o.print_config, "Print the effective configuration and exit");
  };
  auto seed_opt = [&](CLI::App* sub, const char* help) {
    sub->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { o.seed = s; o.seed_given = true; }, help);
  };

  auto* train = app.add_subcommand("train", "Train under the configured protocol and write artifacts");
  config_opts(train);
  train->add_option("--out", o.out, "Output directory (overrides the config)");
  seed_opt(train, "Single seed (overrides the config's seed list)");
  train->add_option("--protocol", o.protocol, "CO, CV or LOSO (overrides the config)");

  auto* eval = app.add_subcommand("eval", "Evaluate a snapshot on one fold");
  config_opts(eval);
  eval->add_option("--model", o.model, "Parameter snapshot")->required()->check(CLI::ExistingFile);
  eval->add_option("--fold", o.fold, "Fold index");
  eval->add_option("--subset", o.subset, "train, val or test");
  eval->add_option("--out", o.out, "Directory for the confusion CSV (default: next to the model)");

  auto* viz = app.add_subcommand("export-viz", "Write attention, fusion and saliency maps");
  viz->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  viz->add_option("--model", o.model, "Parameter snapshot")->required()->check(CLI::ExistingFile);
  viz->add_option("--fold", o.fold, "Fold index");
  viz->add_option("--subset", o.subset, "train, val or test");
  viz->add_option("--trials", o.trials, "Trial indices within the subset")->delimiter(',');
  viz->add_option("--out", o.out, "Output directory");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic EEGB file");
  synth->add_option("--config", o.config, "Run configuration (data.synth)")->check(CLI::ExistingFile);
  seed_opt(synth, "Generator seed (overrides data.synth_seed)");
  synth->add_option("--out", o.out, "Output EEGB file")->required();

  auto* align = app.add_subcommand("align", "Euclidean alignment per subject");
  align->add_option("--in", o.in, "Input EEGB file")->required()->check(CLI::ExistingFile);
  align->add_option("--out", o.out, "Output EEGB file")->required();

  auto* features = app.add_subcommand("features", "Relative band-power features");
  features->add_option("--config", o.config, "Run configuration (rpsd_params)")->check(CLI::ExistingFile);
  features->add_option("--in", o.in, "Input EEGB file")->required()->check(CLI::ExistingFile);
  features->add_option("--out", o.out, "Output EEGB file")->required();

  auto* split = app.add_subcommand("split", "Print or write a split plan as CSV");
  split->add_option("--config", o.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  split->add_option("--in", o.in, "EEGB file (default: the configured data)")->check(CLI::ExistingFile);
  split->add_option("--protocol", o.protocol, "CO, CV or LOSO");
  split->add_option("--out", o.out, "CSV file (default: stdout)");

  auto* grad = app.add_subcommand("grad-check", "Finite-difference check of the full network");
  grad->add_flag("--tiny", o.tiny, "Use random tiny configurations")->required();
  grad->add_option("--configs", o.configs, "Number of random configurations")->check(CLI::PositiveNumber);
  grad->add_option("--seed", o.seed, "Seed for configuration draws");

  auto* count = app.add_subcommand("count", "Print parameter and FLOP counts");
  config_opts(count);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << app.help();
    return fail(err, "usage", e.what(), kUsage);
  }

  try {
    if (*train) return cmd_train(o, out, err);
    if (*eval) return cmd_eval(o, out);
    if (*viz) return cmd_export_viz(o, out);
    if (*synth) return cmd_synth(o, out);
    if (*align) return cmd_align(o, out);
    if (*features) return cmd_features(o, out);
    if (*split) return cmd_split(o, out);
    if (*grad) return cmd_grad_check(o, out);
    if (*count) return cmd_count(o, out);
  } catch (const ConfigError& e) {
    return fail(err, "usage", e.what(), kUsage);
  } catch (const NumericError& e) {
    return fail(err, "numeric", e.what(), kNumericAbort);
  } catch (const DataError& e) {
    return fail(err, "data", e.what(), kDataError);
  } catch (const DimensionError& e) {
    return fail(err, "data", e.what(), kDataError);
  } catch (const fs::filesystem_error& e) {
    return fail(err, "data", e.what(), kDataError);
  }
  return fail(err, "usage", "no subcommand", kUsage);
}

}  // namespace lidsn::cli
