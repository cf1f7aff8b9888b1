#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "commands.hpp"
#include "lidsn/data/epochs.hpp"
#include "lidsn/error.hpp"
#include "run_config.hpp"

using namespace lidsn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lidsn");
  std::ostringstream out, err;
  const int code = cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lidsn_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

constexpr const char* kQuick = R"({
  "train": {"max_epochs": 3, "patience": 3},
  "data": {"synth": {"n_subjects": 2, "trials_per_subject": 20}},
  "seeds": [7]
})";

}  // namespace

TEST_CASE("dispatch and exit codes") {
  const Run count = run({"count"});
  CHECK(count.code == 0);
  CHECK(count.out == "params=130065 flops=11969374\n");

  const Run unknown_flag = run({"count", "--verbose"});
  CHECK(unknown_flag.code == 1);
  CHECK(unknown_flag.err.find("error[usage]: ") != std::string::npos);

  const Run unknown_cmd = run({"fly"});
  CHECK(unknown_cmd.code == 1);
  CHECK(unknown_cmd.err.find("Subcommands:") != std::string::npos);
  CHECK(run({}).code == 1);
  CHECK(run({"grad-check"}).code == 1);
  CHECK(run({"--help"}).code == 0);

  const fs::path dir = scratch("codes");
  write(dir / "junk.eegb", "EEGX\x01");
  const Run bad = run({"align", "--in", (dir / "junk.eegb").string(), "--out", (dir / "o.eegb").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.rfind("error[data]: bad magic", 0) == 0);

  write(dir / "blowup.json", R"({"train": {"max_epochs": 2, "patience": 2, "learning_rate": 1e300},
    "data": {"synth": {"n_subjects": 2, "trials_per_subject": 10}}})");
  const Run nan = run({"train", "--config", (dir / "blowup.json").string(), "--out", (dir / "nan").string()});
  CHECK(nan.code == 3);
  CHECK(nan.err.rfind("error[numeric]: ", 0) == 0);
}

TEST_CASE("run configuration") {
  SUBCASE("defaults and echo round trip") {
    const cli::RunConfig d = cli::parse_run_config("{}");
    CHECK(d.train.learning_rate == 1e-3);
    CHECK(d.train.batch_size == 32);
    CHECK(d.train.max_epochs == 100);
    CHECK(d.train.patience == 20);
    CHECK(d.model.n_channels == 22);
    const std::string echo = cli::run_config_json(d);
    CHECK(cli::run_config_json(cli::parse_run_config(echo)) == echo);

    const std::string custom = R"({"model": {"integration": "BIDIR", "fusion": "mean-concat", "dropout": 0.1},
      "train": {"class_weights": "uniform", "learning_rate": 3.3e-4},
      "data": {"synth_seed": 5, "synth": {"classes": [{"freq_hz": 9.5, "channels": [0, 1], "amplitude": 2},
                                                     {"freq_hz": 13, "channels": [4], "amplitude": 1}]}},
      "preprocessing": {"rpsd": true, "rpsd_params": {"bands": [[1, 4], [4, 8]]}},
      "protocol": "LOSO", "seeds": [1, 2, 3]})";
    const std::string e1 = cli::run_config_json(cli::parse_run_config(custom));
    CHECK(cli::run_config_json(cli::parse_run_config(e1)) == e1);
    const cli::RunConfig c = cli::parse_run_config(e1);
    CHECK(c.model.integration == model::IntegrationMode::bidir);
    CHECK(c.data.synth.classes[0].freq_hz == 9.5);
    CHECK(c.preprocessing.rpsd_params.bands.size() == 2);
    CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3});

    const fs::path dir = scratch("echo");
    write(dir / "c.json", custom);
    const Run printed = run({"train", "--config", (dir / "c.json").string(), "--print-config"});
    CHECK(printed.code == 0);
    write(dir / "echo.json", printed.out);
    CHECK(run({"count", "--config", (dir / "echo.json").string(), "--print-config"}).out == printed.out);
  }
  SUBCASE("unknown keys and bad values are rejected by name") {
    auto message = [](const char* text) {
      try {
        cli::parse_run_config(text);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("accepted");
    };
    CHECK(message(R"({"modle": {}})").find("config modle: unknown key") != std::string::npos);
    CHECK(message(R"({"data": {"synth": {"classes": [{"freq_hz": 3, "phase": 1}]}}})")
              .find("data.synth.classes[0].phase") != std::string::npos);
    CHECK(message(R"({"model": {"n_heads": -2}})").find("model.n_heads") != std::string::npos);
    CHECK(message(R"({"model": {"integration": "SIDEWAYS"}})").find("model.integration") != std::string::npos);
    CHECK(message(R"({"train": {"patience": 200}})").find("patience") != std::string::npos);
    CHECK(message("{not json").find("not valid JSON") != std::string::npos);
    CHECK(message(R"({"seeds": []})").find("seeds") != std::string::npos);
  }
}

TEST_CASE("data subcommands") {
  const fs::path dir = scratch("data");
  const std::string raw = (dir / "raw.eegb").string();
  REQUIRE(run({"synth", "--seed", "3", "--out", raw}).code == 0);
  const data::EpochSet set = data::load_epochs(raw);
  CHECK(set.n_trials() == 200);
  CHECK(run({"synth", "--seed", "3", "--out", (dir / "again.eegb").string()}).code == 0);
  CHECK(slurp(raw) == slurp(dir / "again.eegb"));

  CHECK(run({"align", "--in", raw, "--out", (dir / "aligned.eegb").string()}).out == "trials=200 subjects=4\n");
  const Run split = run({"split", "--in", raw, "--protocol", "CV"});
  CHECK(split.out.rfind("fold,role,trial\n", 0) == 0);
  CHECK(std::count(split.out.begin(), split.out.end(), '\n') == 1 + 5 * 200);
  write(dir / "f.json", R"({"preprocessing": {"rpsd_params": {"outer_seconds": 2, "inner_seconds": 1}}})");
  CHECK(run({"features", "--config", (dir / "f.json").string(), "--in", raw, "--out", (dir / "f.eegb").string()})
            .out == "trials=1200 channels=8 features=35\n");
}

TEST_CASE("train, eval and export") {
  const fs::path dir = scratch("train");
  write(dir / "quick.json", kQuick);
  const std::string cfg = (dir / "quick.json").string();
  const Run a = run({"train", "--config", cfg, "--out", (dir / "a").string()});
  REQUIRE(a.code == 0);
  for (const char* f : {"report.json", "curves.csv", "model.bin", "seed_7/fold_0/model.bin",
                        "seed_7/fold_0/report.json", "seed_7/fold_0/curves.csv"})
    CHECK(fs::exists(dir / "a" / f));

  REQUIRE(run({"train", "--config", cfg, "--out", (dir / "b").string()}).code == 0);
  CHECK(slurp(dir / "a" / "report.json") == slurp(dir / "b" / "report.json"));
  CHECK(slurp(dir / "a" / "model.bin") == slurp(dir / "b" / "model.bin"));
  CHECK(slurp(dir / "a" / "curves.csv").rfind("seed,fold,epoch,train_loss,val_loss,val_acc\n", 0) == 0);

  const auto report = nlohmann::json::parse(slurp(dir / "a" / "report.json"));
  const double train_acc = report["runs"][0]["folds"][0]["train"]["accuracy"].get<double>();
  const Run ev = run({"eval", "--config", cfg, "--model", (dir / "a" / "model.bin").string(), "--subset", "train"});
  REQUIRE(ev.code == 0);
  const auto at = ev.out.find("acc=") + 4;
  CHECK(std::abs(std::stod(ev.out.substr(at)) - train_acc) <= 1e-12);
  CHECK(fs::exists(dir / "a" / "confusion_train.csv"));

  const Run viz = run({"export-viz", "--config", cfg, "--model", (dir / "a" / "model.bin").string(),
                       "--trials", "0,2", "--out", (dir / "viz").string()});
  REQUIRE(viz.code == 0);
  std::size_t sacm = 0, saliency = 0;
  for (const auto& e : fs::directory_iterator(dir / "viz")) {
    const std::string n = e.path().filename().string();
    if (n.rfind("sacm_", 0) == 0 && e.path().extension() == ".csv") ++sacm;
    if (n.rfind("saliency_", 0) == 0 && e.path().extension() == ".svg") ++saliency;
  }
  CHECK(sacm == 12);
  CHECK(saliency == 2);

  write(dir / "wide.json", R"({"model": {"embed_dim": 16}, "data": {"synth": {"n_subjects": 2, "trials_per_subject": 20}}})");
  const Run mismatch = run({"eval", "--config", (dir / "wide.json").string(), "--model",
                            (dir / "a" / "model.bin").string()});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("[40x8]") != std::string::npos);
}

TEST_CASE("grad-check subcommand") {
  const Run r = run({"grad-check", "--tiny", "--configs", "2", "--seed", "4"});
  CHECK(r.code == 0);
  CHECK(r.out.find("threshold=1e-4 PASS") != std::string::npos);
}
