#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "trackforge/classifier.hpp"
#include "trackforge/evaluation.hpp"
#include "trackforge/fusion.hpp"
#include "trackforge/logging.hpp"
#include "trackforge/logio.hpp"
#include "trackforge/pipeline.hpp"
#include "trackforge/simulator.hpp"

namespace trackforge {

namespace fs = std::filesystem;

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void save_model_file(const ClassifierModel& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoFailure, "cannot write " + path.string());
  const std::string blob = serialize_model(m);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
}

inline ClassifierModel load_model_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot read " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(blob);
}

inline ScenarioConfig load_scenario_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot read scenario file " + path.string());
  return parse_scenario(in);
}

// --- evaluation sets ------------------------------------------------------

// Per-frame cluster proposals (features + spatial box from the payload
// points) aligned with the ground-truth human boxes of the same timestamp.
struct EvalFrame {
  std::vector<FeatureVector> features;
  std::vector<Box3> boxes;
  std::vector<Box3> gt_boxes;
};

struct EvalSet {
  std::vector<EvalFrame> frames;
  int total_ground_truth = 0;
};

inline EvalSet build_eval_set(const std::vector<DetectionLogFrame>& detections,
                              const std::vector<GroundTruthFrame>& ground_truth,
                              const Vec3& sensor_origin) {
  EvalSet set;
  std::size_t di = 0;
  for (const auto& gt : ground_truth) {
    EvalFrame frame;
    for (const auto& a : gt.agents) {
      if (!is_human(a.kind)) continue;
      frame.gt_boxes.push_back(box_from_center(a.x, a.y, 0.0, a.dims));
    }
    while (di < detections.size() && detections[di].stamp.seconds < gt.stamp.seconds) ++di;
    if (di < detections.size() && detections[di].stamp.seconds == gt.stamp.seconds) {
      for (const auto& c : detections[di].clusters) {
        if (!c.detection.cluster) continue;
        frame.features.push_back(extract_features(*c.detection.cluster, sensor_origin));
        const Aabb box = compute_aabb(c.detection.cluster->points);
        frame.boxes.push_back({box.min, box.max});
      }
    }
    set.total_ground_truth += static_cast<int>(frame.gt_boxes.size());
    set.frames.push_back(std::move(frame));
  }
  return set;
}

struct ModelMetrics {
  double ap = 0.0;
  double acc = 0.0;
  std::vector<std::pair<double, double>> pr;  // (recall, precision)
};

inline ModelMetrics evaluate_model(const ClassifierModel& model, const EvalSet& set) {
  MatchResult merged;
  std::vector<std::pair<double, bool>> labeled_scores;
  for (const auto& frame : set.frames) {
    std::vector<ScoredBox> preds;
    preds.reserve(frame.features.size());
    for (std::size_t i = 0; i < frame.features.size(); ++i)
      preds.push_back({frame.boxes[i], predict_proba(model, frame.features[i])});
    merged.merge(match_frame(preds, frame.gt_boxes));
    const auto labeled = label_proposals_by_iou(preds, frame.gt_boxes);
    labeled_scores.insert(labeled_scores.end(), labeled.begin(), labeled.end());
  }
  ModelMetrics m;
  m.ap = average_precision(merged);
  m.acc = accuracy(labeled_scores);
  m.pr = pr_curve(merged);
  return m;
}

// Scores per-proposal truth labels for validation-style stability counts.
inline std::vector<LabeledSample> validation_samples(const EvalSet& set) {
  std::vector<LabeledSample> samples;
  for (const auto& frame : set.frames) {
    std::vector<ScoredBox> boxes;
    for (std::size_t i = 0; i < frame.boxes.size(); ++i) boxes.push_back({frame.boxes[i], 0.0});
    const auto labeled = label_proposals_by_iou(boxes, frame.gt_boxes);
    for (std::size_t i = 0; i < frame.features.size(); ++i) {
      samples.push_back({frame.features[i],
                         labeled[i].second ? BinaryLabel::Human : BinaryLabel::NonHuman,
                         std::nullopt, Timestamp{}});
    }
  }
  return samples;
}

// AP of each iteration's frozen model on a fixed test set; row 0 is the
// untrained neutral scorer.
inline std::vector<std::pair<int, double>> learning_curve(std::span<const IterationRecord> iterations,
                                                          const EvalSet& set) {
  std::vector<std::pair<int, double>> rows;
  rows.emplace_back(0, evaluate_model(ClassifierModel{}, set).ap);
  for (const auto& rec : iterations) rows.emplace_back(rec.iteration, evaluate_model(rec.model, set).ap);
  return rows;
}

// --- commands -------------------------------------------------------------

struct SimulateResult {
  fs::path detections;
  fs::path ground_truth;
  long frames = 0;
};

inline SimulateResult cmd_simulate(const ScenarioConfig& scenario, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  SimulateResult result{out_dir / "detections.jsonl", out_dir / "ground_truth.jsonl", 0};
  std::ofstream det(result.detections, std::ios::binary);
  std::ofstream gt(result.ground_truth, std::ios::binary);
  if (!det || !gt) throw Error(Errc::IoFailure, "cannot write logs under " + out_dir.string());
  Simulator sim(scenario);
  while (auto frame = sim.next()) {
    write_detection_log_frame(det, *frame);
    write_ground_truth_frame(gt, frame->truth);
    ++result.frames;
  }
  return result;
}

struct LearnOptions {
  // Exactly one of scenario / log_dir drives the run.
  std::optional<ScenarioConfig> scenario;
  std::optional<fs::path> log_dir;
  fs::path out_dir;
  // Optional annotated test log for post-loop reporting (learning curve and
  // stability); the loop itself never reads it.
  std::optional<fs::path> test_log_dir;
  RunConfig run;
};

struct LearnOutputs {
  LearnResult result;
  std::vector<fs::path> model_files;
  fs::path curve_csv;
  fs::path stability_csv;
  fs::path counts_csv;
};

inline EvalSet load_eval_set(const fs::path& log_dir, const Vec3& sensor_origin) {
  std::ifstream det(log_dir / "detections.jsonl");
  if (!det) throw Error(Errc::IoFailure, "cannot read " + (log_dir / "detections.jsonl").string());
  std::ifstream gt(log_dir / "ground_truth.jsonl");
  if (!gt) throw Error(Errc::IoFailure, "cannot read " + (log_dir / "ground_truth.jsonl").string());
  return build_eval_set(read_detection_log(det), read_ground_truth_log(gt), sensor_origin);
}

inline LearnOutputs cmd_learn(const LearnOptions& opts) {
  fs::create_directories(opts.out_dir);
  LearnOutputs out;

  RunConfig run = opts.run;
  std::unique_ptr<FrameSource> source;
  if (opts.scenario) {
    run.sensor_origin = opts.scenario->sensor_origin();
    source = std::make_unique<SimFrameSource>(*opts.scenario);
  } else if (opts.log_dir) {
    std::ifstream det(*opts.log_dir / "detections.jsonl");
    if (!det)
      throw Error(Errc::IoFailure, "cannot read " + (*opts.log_dir / "detections.jsonl").string());
    source = std::make_unique<LogFrameSource>(read_detection_log(det));
  } else {
    throw Error(Errc::BadScenario, "learn needs a scenario or a recorded log");
  }

  out.result = run_online_learning(*source, run);

  for (const auto& rec : out.result.iterations) {
    char name[32];
    std::snprintf(name, sizeof(name), "model_%d.tfm", rec.iteration);
    const fs::path path = opts.out_dir / name;
    save_model_file(rec.model, path);
    out.model_files.push_back(path);
  }

  out.counts_csv = opts.out_dir / "store_counts.csv";
  {
    std::ofstream csv(out.counts_csv, std::ios::binary);
    csv << "iteration,store_positives,store_negatives,trained_at\n";
    for (const auto& rec : out.result.iterations)
      csv << rec.iteration << ',' << rec.store_positives << ',' << rec.store_negatives << ','
          << format_double(rec.trained_at) << '\n';
  }

  const std::string sensors = to_string(run.sensors);
  out.curve_csv = opts.out_dir / "learning_curve.csv";
  out.stability_csv = opts.out_dir / "stability.csv";
  std::ofstream curve(out.curve_csv, std::ios::binary);
  curve << "iteration,sensors,ap\n";
  std::ofstream stability(out.stability_csv, std::ios::binary);
  stability << "iteration,u,stability\n";
  if (opts.test_log_dir) {
    const EvalSet set = load_eval_set(*opts.test_log_dir, run.sensor_origin);
    for (const auto& [iteration, ap] : learning_curve(out.result.iterations, set))
      curve << iteration << ',' << sensors << ',' << format_double(ap) << '\n';
    const std::vector<LabeledSample> validation = validation_samples(set);
    StabilityRecord record;
    record_iteration(record, ClassifierModel{}, validation);
    for (const auto& rec : out.result.iterations)
      record_iteration(record, rec.model, validation);
    int running = 0;
    for (std::size_t i = 0; i < record.correct_counts.size(); ++i) {
      if (i > 0) running += record.increments[i - 1];
      stability << i << ',' << record.correct_counts[i] << ',' << running << '\n';
    }
  }
  return out;
}

// Trains the offline baseline from ground-truth-labeled clusters: up to
// per_class samples of each class, sampled with a seeded generator.
inline ClassifierModel cmd_train_offline(const fs::path& log_dir, const fs::path& out_file,
                                         int per_class, std::uint64_t seed,
                                         const ClassifierConfig& config,
                                         const Vec3& sensor_origin = {0.0, 0.0, 0.8}) {
  std::ifstream det_in(log_dir / "detections.jsonl");
  if (!det_in) throw Error(Errc::IoFailure, "cannot read " + (log_dir / "detections.jsonl").string());
  std::ifstream gt_in(log_dir / "ground_truth.jsonl");
  if (!gt_in) throw Error(Errc::IoFailure, "cannot read " + (log_dir / "ground_truth.jsonl").string());
  const auto detections = read_detection_log(det_in);
  const auto gt_frames = read_ground_truth_log(gt_in);

  std::unordered_map<int, AgentKind> kind_of;
  for (const auto& frame : gt_frames)
    for (const auto& a : frame.agents) kind_of.emplace(a.id, a.kind);

  std::vector<LabeledSample> pos, neg;
  for (const auto& frame : detections) {
    for (const auto& c : frame.clusters) {
      if (!c.detection.cluster) continue;
      const auto it = kind_of.find(c.source_agent);
      const bool human = c.source_agent >= 0 && it != kind_of.end() && is_human(it->second);
      LabeledSample s{extract_features(*c.detection.cluster, sensor_origin),
                      human ? BinaryLabel::Human : BinaryLabel::NonHuman, std::nullopt,
                      c.detection.stamp};
      (human ? pos : neg).push_back(std::move(s));
    }
  }
  if (pos.empty() || neg.empty())
    throw Error(Errc::InsufficientData, "offline training needs both classes in the log");

  std::mt19937_64 rng(seed);
  const auto take = [&](std::vector<LabeledSample>& v, std::size_t k) {
    if (v.size() <= k) return;
    std::vector<LabeledSample> chosen;
    chosen.reserve(k);
    std::sample(v.begin(), v.end(), std::back_inserter(chosen), k, rng);
    v = std::move(chosen);
  };
  take(pos, static_cast<std::size_t>(per_class));
  take(neg, static_cast<std::size_t>(per_class));

  SampleStore store;
  store.add(pos);
  store.add(neg);
  ClassifierModel model = train(store, config, rng);
  save_model_file(model, out_file);
  return model;
}

struct EvalEntry {
  std::string name;
  ClassifierModel model;
  std::string sensors = "-";
};

// Writes metrics.csv (model,iteration,sensors,ap,acc) and pr_curve.csv
// (model,recall,precision) for every entry on one test log.
inline std::vector<ModelMetrics> cmd_eval(const std::vector<EvalEntry>& entries,
                                          const fs::path& log_dir, const fs::path& out_dir,
                                          const Vec3& sensor_origin = {0.0, 0.0, 0.8}) {
  fs::create_directories(out_dir);
  const EvalSet set = load_eval_set(log_dir, sensor_origin);
  std::ofstream metrics(out_dir / "metrics.csv", std::ios::binary);
  metrics << "model,iteration,sensors,ap,acc\n";
  std::ofstream pr(out_dir / "pr_curve.csv", std::ios::binary);
  pr << "model,recall,precision\n";
  std::vector<ModelMetrics> results;
  for (const auto& entry : entries) {
    const ModelMetrics m = evaluate_model(entry.model, set);
    metrics << entry.name << ',' << entry.model.iteration << ',' << entry.sensors << ','
            << format_double(m.ap) << ',' << format_double(m.acc) << '\n';
    for (const auto& [recall, precision] : m.pr)
      pr << entry.name << ',' << format_double(recall) << ',' << format_double(precision) << '\n';
    results.push_back(m);
  }
  return results;
}

// Full experiment: simulate, learn every sensor combination from the same
// recorded log, train the offline baseline, evaluate everything on the test
// log. Mirrors the paper-style five-way comparison.
inline void cmd_report(const ScenarioConfig& train_scenario, const ScenarioConfig& test_scenario,
                       const fs::path& out_dir, const RunConfig& base_run) {
  fs::create_directories(out_dir);
  const SimulateResult train_log = cmd_simulate(train_scenario, out_dir / "train_log");
  cmd_simulate(test_scenario, out_dir / "test_log");

  const std::vector<SensorCombination> combos = {
      {false, false, true},  // 3d only, trajectory prior
      {true, false, false},  // with camera
      {false, true, false},  // with 2d lidar
      {true, true, false},   // with both
  };

  std::vector<EvalEntry> entries;
  std::ofstream curves(out_dir / "learning_curves.csv", std::ios::binary);
  curves << "iteration,sensors,ap\n";
  for (const auto& combo : combos) {
    LearnOptions opts;
    opts.log_dir = out_dir / "train_log";
    opts.out_dir = out_dir / ("run_" + to_string(combo));
    opts.test_log_dir = out_dir / "test_log";
    opts.run = base_run;
    opts.run.sensors = combo;
    opts.run.sensor_origin = train_scenario.sensor_origin();
    const LearnOutputs learn = cmd_learn(opts);
    if (!learn.result.iterations.empty())
      entries.push_back({to_string(combo), learn.result.iterations.back().model, to_string(combo)});
    std::ifstream curve_in(learn.curve_csv);
    std::string line;
    std::getline(curve_in, line);  // drop header
    while (std::getline(curve_in, line)) curves << line << '\n';
  }

  const ClassifierModel offline =
      cmd_train_offline(out_dir / "train_log", out_dir / "model_offline.tfm", 2100, base_run.seed,
                        base_run.classifier_cfg, train_scenario.sensor_origin());
  entries.push_back({"offline", offline, "offline"});

  cmd_eval(entries, out_dir / "test_log", out_dir, test_scenario.sensor_origin());
}

}  // namespace trackforge
