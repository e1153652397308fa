#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "trackforge/harness.hpp"

namespace tf = trackforge;

namespace {

struct CommonFlags {
  std::string scenario;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool has_seed = false;
};

tf::ScenarioConfig load_scenario(const std::string& path, const CommonFlags& flags,
                                 bool literal_confidence) {
  tf::ScenarioConfig cfg = tf::load_scenario_file(path);
  if (flags.has_seed) cfg.seed = flags.seed;
  if (literal_confidence) cfg.literal_confidence = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trackforge: multisensor tracking with online-learned 3D human classification"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool literal_confidence = false;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", flags.scenario, "scenario file")->required();
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--seed", flags.seed, "override the scenario seed")
        ->each([&](const std::string&) { flags.has_seed = true; });
  };

  // simulate
  auto* sim = app.add_subcommand("simulate", "write detection and ground-truth logs");
  add_common(sim, true);
  sim->add_flag("--literal-confidence", literal_confidence,
                "static detections report exactly 0.5");

  // learn
  auto* learn = app.add_subcommand("learn", "run the online transfer-learning loop");
  std::string learn_log, sensors = "camera,2d", test_log;
  double sigma_t = 0.7;
  int batch_size = 300, max_iterations = 7;
  bool async_retrain = false;
  add_common(learn, false);
  learn->add_option("--scenario", flags.scenario, "scenario file (live simulation)");
  learn->add_option("--log", learn_log, "recorded log directory (replay)");
  learn->add_option("--sensors", sensors,
                    "detector streams: comma list of camera,2d,prior (or 'none')");
  learn->add_option("--sigma-t", sigma_t, "trajectory probability threshold");
  learn->add_option("--batch-size", batch_size, "positives and negatives per training batch");
  learn->add_option("--max-iterations", max_iterations, "retraining iteration cap");
  learn->add_option("--test-log", test_log, "annotated log dir for post-run reporting");
  learn->add_flag("--literal-confidence", literal_confidence,
                  "static detections report exactly 0.5 (live simulation only)");
  learn->add_flag("--async-retrain", async_retrain, "train in the background between frames");

  // train-offline
  auto* offline = app.add_subcommand("train-offline", "train the ground-truth baseline");
  std::string offline_log;
  int per_class = 2100;
  add_common(offline, false);
  offline->add_option("--log", offline_log, "recorded log directory")->required();
  offline->add_option("--per-class", per_class, "samples per class");

  // eval
  auto* eval = app.add_subcommand("eval", "score models on an annotated test log");
  std::vector<std::string> model_paths;
  std::string eval_log;
  add_common(eval, false);
  eval->add_option("--model", model_paths, "model file (repeatable)")->required();
  eval->add_option("--log", eval_log, "annotated test log directory")->required();

  // report
  auto* report = app.add_subcommand("report", "full protocol: all combinations + offline baseline");
  std::string test_scenario;
  add_common(report, true);
  report->add_option("--test-scenario", test_scenario, "held-out test scenario file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto result = tf::cmd_simulate(load_scenario(flags.scenario, flags, literal_confidence),
                                           flags.out);
      std::printf("wrote %ld frames to %s\n", result.frames, flags.out.c_str());
    } else if (learn->parsed()) {
      tf::LearnOptions opts;
      opts.out_dir = flags.out;
      opts.run.sensors = tf::parse_sensors(sensors);
      opts.run.label_cfg.sigma_t = sigma_t;
      opts.run.label_cfg.pos_batch = batch_size;
      opts.run.label_cfg.neg_batch = batch_size;
      opts.run.label_cfg.max_iterations = max_iterations;
      opts.run.async_retrain = async_retrain;
      if (flags.has_seed) opts.run.seed = flags.seed;
      if (!test_log.empty()) opts.test_log_dir = test_log;
      if (!learn_log.empty())
        opts.log_dir = learn_log;
      else if (!flags.scenario.empty())
        opts.scenario = load_scenario(flags.scenario, flags, literal_confidence);
      else
        throw tf::Error(tf::Errc::BadScenario, "learn needs --scenario or --log");
      if (opts.scenario && !flags.has_seed) opts.run.seed = opts.scenario->seed;
      const auto out = tf::cmd_learn(opts);
      std::printf("learned %zu iterations over %ld frames (store %zu+/%zu-)\n",
                  out.result.iterations.size(), out.result.frames_processed,
                  out.result.store.positives(), out.result.store.negatives());
    } else if (offline->parsed()) {
      tf::fs::create_directories(flags.out);
      const auto model = tf::cmd_train_offline(offline_log, tf::fs::path(flags.out) / "model_offline.tfm",
                                               per_class, flags.has_seed ? flags.seed : 1,
                                               tf::ClassifierConfig{});
      std::printf("offline baseline trained (%zu SVs)\n", model.support_vectors.size());
    } else if (eval->parsed()) {
      std::vector<tf::EvalEntry> entries;
      for (const auto& p : model_paths)
        entries.push_back({tf::fs::path(p).stem().string(), tf::load_model_file(p), "-"});
      tf::cmd_eval(entries, eval_log, flags.out);
      std::printf("metrics written to %s\n", (tf::fs::path(flags.out) / "metrics.csv").c_str());
    } else if (report->parsed()) {
      tf::RunConfig run;
      const auto train_scn = load_scenario(flags.scenario, flags, literal_confidence);
      run.seed = train_scn.seed;
      tf::cmd_report(train_scn, tf::load_scenario_file(test_scenario), flags.out, run);
      std::printf("report written to %s\n", (tf::fs::path(flags.out) / "metrics.csv").c_str());
    }
  } catch (const tf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
