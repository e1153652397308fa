#pragma once

#include <chrono>
#include <deque>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "trackforge/classifier.hpp"
#include "trackforge/core.hpp"
#include "trackforge/features.hpp"
#include "trackforge/fusion.hpp"
#include "trackforge/logging.hpp"
#include "trackforge/logio.hpp"
#include "trackforge/simulator.hpp"
#include "trackforge/tracker.hpp"

namespace trackforge {

// Which detector streams feed the learner. The 3D cluster stream is always
// on; the trajectory prior realizes the "3D LiDAR only, learned from
// trajectories" configuration.
struct SensorCombination {
  bool upper_body = true;
  bool leg = true;
  bool trajectory_prior = false;
};

inline std::string to_string(const SensorCombination& s) {
  std::string out = "3d";
  if (s.upper_body) out += "+camera";
  if (s.leg) out += "+2d";
  if (s.trajectory_prior) out += "+prior";
  return out;
}

inline SensorCombination parse_sensors(std::string_view text) {
  SensorCombination combo{false, false, false};
  std::string token;
  const auto apply = [&](const std::string& tok) {
    if (tok.empty() || tok == "3d" || tok == "none") return;
    if (tok == "camera" || tok == "upper_body")
      combo.upper_body = true;
    else if (tok == "2d" || tok == "leg")
      combo.leg = true;
    else if (tok == "prior" || tok == "trajectory_prior")
      combo.trajectory_prior = true;
    else
      throw Error(Errc::BadScenario, "unknown sensor token '" + tok + "'");
  };
  for (const char c : text) {
    if (c == ',' || c == '+') {
      apply(token);
      token.clear();
    } else {
      token.push_back(c);
    }
  }
  apply(token);
  return combo;
}

struct RunConfig {
  SensorCombination sensors{true, true, false};
  LabelGenConfig label_cfg;
  ClassifierConfig classifier_cfg;
  TrackerParams tracker_params;
  std::uint64_t seed = 1;
  bool async_retrain = false;
  Vec3 sensor_origin{0.0, 0.0, 0.8};
  // Trajectory prior: per-frame motion evidence on confirmed tracks.
  double prior_confidence = 0.7;
  double prior_speed_min = 0.3;
  double prior_speed_max = 3.0;
};

// What the learner is allowed to see: detections only, no ground truth.
struct LearnFrame {
  Timestamp stamp;
  std::vector<Detection> upper_body;
  std::vector<Detection> leg;
  std::vector<Detection> clusters;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<LearnFrame> next() = 0;
};

class SimFrameSource final : public FrameSource {
 public:
  explicit SimFrameSource(ScenarioConfig cfg) : sim_(std::move(cfg)) {}

  const ScenarioConfig& scenario() const { return sim_.config(); }

  std::optional<LearnFrame> next() override {
    auto frame = sim_.next();
    if (!frame) return std::nullopt;
    LearnFrame out;
    out.stamp = frame->truth.stamp;
    for (auto& d : frame->upper_body) out.upper_body.push_back(std::move(d.detection));
    for (auto& d : frame->leg) out.leg.push_back(std::move(d.detection));
    for (auto& d : frame->clusters) out.clusters.push_back(std::move(d.detection));
    return out;
  }

 private:
  Simulator sim_;
};

class LogFrameSource final : public FrameSource {
 public:
  explicit LogFrameSource(std::vector<DetectionLogFrame> frames) : frames_(std::move(frames)) {}

  std::optional<LearnFrame> next() override {
    if (index_ >= frames_.size()) return std::nullopt;
    auto& f = frames_[index_++];
    LearnFrame out;
    out.stamp = f.stamp;
    for (auto& d : f.upper_body) out.upper_body.push_back(std::move(d.detection));
    for (auto& d : f.leg) out.leg.push_back(std::move(d.detection));
    for (auto& d : f.clusters) out.clusters.push_back(std::move(d.detection));
    return out;
  }

 private:
  std::vector<DetectionLogFrame> frames_;
  std::size_t index_ = 0;
};

struct IterationRecord {
  int iteration = 0;
  ClassifierModel model;
  std::size_t store_positives = 0;
  std::size_t store_negatives = 0;
  double trained_at = 0.0;  // stream time when the batch triggered
};

struct LearnResult {
  std::vector<IterationRecord> iterations;
  SampleStore store;
  long frames_processed = 0;
  bool reached_iteration_cap = false;
  std::size_t positive_labels = 0;
  std::size_t negative_labels = 0;
  // Cluster uids labeled positive, in order; lets tests audit label
  // soundness against the generating scenario.
  std::vector<std::uint64_t> positive_uids;
};

// Runs the closed learning loop: cluster -> featurize -> classify -> track ->
// fuse/label -> batch -> retrain, halting at the iteration cap. Training is
// synchronous by default; with async_retrain a batch trains on a snapshot in
// the background and the new model is adopted at a frame boundary.
inline LearnResult run_online_learning(FrameSource& source, const RunConfig& cfg) {
  Tracker tracker(cfg.tracker_params);
  LabelGenerator labeler(cfg.label_cfg);
  LearnResult result;
  StabilityRecord no_validation;  // the loop itself never sees ground truth
  ClassifierModel model;          // untrained: the neutral 0.5 scorer

  std::unordered_map<TrackId, double> next_eval_due;
  std::uint64_t frame_index = 0;
  double last_stamp = 0.0;
  bool stop = false;

  // One deterministic child generator per training call; balanced batches
  // draw nothing from it, so live and replayed runs train identically.
  const auto training_rng = [&](int iteration) {
    return std::mt19937_64(cfg.seed ^ (0x9e3779b97f4a7c15ull * (iteration + 1)));
  };

  std::future<ClassifierModel> pending_training;
  int launched_trainings = 0;
  int adopted_trainings = 0;
  std::deque<double> batch_stamps;  // stream time of each batch awaiting adoption

  const auto launch_training = [&](double at) {
    ++launched_trainings;
    const int iteration = launched_trainings;
    SampleStore snapshot = result.store;
    const ClassifierModel base = model;
    ClassifierConfig ccfg = cfg.classifier_cfg;
    auto rng = training_rng(iteration);
    batch_stamps.push_back(at);
    pending_training = std::async(std::launch::async, [snapshot = std::move(snapshot), ccfg, rng,
                                                       base]() mutable {
      return train(snapshot, ccfg, rng, base.trained() ? &base : nullptr);
    });
  };

  const auto adopt_model = [&](ClassifierModel&& m) {
    ++adopted_trainings;
    model = std::move(m);
    const double at = batch_stamps.front();
    batch_stamps.pop_front();
    result.iterations.push_back(
        {model.iteration, model, result.store.positives(), result.store.negatives(), at});
    TF_LOG_INFO("iteration %d trained (%zu SVs, store %zu+/%zu-)", model.iteration,
                model.support_vectors.size(), result.store.positives(), result.store.negatives());
    if (halted(adopted_trainings, no_validation, cfg.label_cfg)) {
      result.reached_iteration_cap = true;
      stop = true;
    }
  };

  std::deque<double> queued_batches;  // assembled while a training is in flight

  while (!stop) {
    auto maybe_frame = source.next();
    if (!maybe_frame) break;
    LearnFrame frame = std::move(*maybe_frame);
    ++result.frames_processed;
    const Timestamp now = frame.stamp;
    last_stamp = now.seconds;

    if (cfg.async_retrain && pending_training.valid() &&
        pending_training.wait_for(std::chrono::seconds(0)) == std::future_status::ready) {
      adopt_model(pending_training.get());
      if (!stop && !queued_batches.empty()) {
        queued_batches.pop_front();
        launch_training(now.seconds);
      }
      if (stop) break;
    }

    if (!cfg.sensors.upper_body) frame.upper_body.clear();
    if (!cfg.sensors.leg) frame.leg.clear();

    Frame tracker_frame;
    tracker_frame.stamp = now;
    tracker_frame.upper_body = std::move(frame.upper_body);
    tracker_frame.leg = std::move(frame.leg);
    tracker_frame.clusters.reserve(frame.clusters.size());
    for (std::size_t i = 0; i < frame.clusters.size(); ++i) {
      Detection& det = frame.clusters[i];
      if (!det.cluster) throw Error(Errc::MissingCluster, "cluster detection without payload");
      ClusterDetection cd;
      cd.uid = frame_index * 1024 + i;
      cd.features = extract_features(*det.cluster, cfg.sensor_origin);
      det.confidence = clamp_confidence(predict_proba(model, cd.features));
      cd.detection = std::move(det);
      tracker_frame.clusters.push_back(std::move(cd));
    }
    ++frame_index;

    StepResult step = tracker.step(tracker_frame);

    if (cfg.sensors.trajectory_prior) {
      for (const auto& t : tracker.tracks()) {
        if (!t.confirmed) continue;
        const double speed = smoothed_speed(t);
        const double p = (speed >= cfg.prior_speed_min && speed <= cfg.prior_speed_max)
                             ? cfg.prior_confidence
                             : 0.5;
        tracker.append_evidence(t.id, now, DetectorId::TrajectoryPrior, p);
      }
    }

    // Positive labels: closed trajectories always, active confirmed tracks
    // on a fixed re-evaluation period.
    for (const auto& t : step.closed) {
      result.positive_labels += labeler.harvest_track(t);
      next_eval_due.erase(t.id);
    }
    for (const auto& t : tracker.tracks()) {
      if (!t.confirmed) continue;
      auto [it, inserted] =
          next_eval_due.try_emplace(t.id, t.first_seen.seconds + cfg.label_cfg.active_eval_period);
      if (now.seconds < it->second) continue;
      it->second = now.seconds + cfg.label_cfg.active_eval_period;
      result.positive_labels += labeler.harvest_track(t);
    }

    // Volume-filter negatives, skipping clusters on human-probable tracks.
    std::vector<bool> exempt(tracker_frame.clusters.size(), false);
    for (std::size_t i = 0; i < tracker_frame.clusters.size(); ++i) {
      if (!step.cluster_track[i]) continue;
      if (const Track* t = tracker.find(*step.cluster_track[i]))
        exempt[i] = trajectory_probability(*t) >= cfg.label_cfg.sigma_t;
    }
    result.negative_labels += labeler.harvest_volume_negatives(tracker_frame.clusters, exempt);

    while (!stop) {
      auto batch = labeler.assemble_batch();
      if (!batch) break;
      result.store.add(batch->samples);
      if (cfg.async_retrain) {
        if (pending_training.valid() &&
            pending_training.wait_for(std::chrono::seconds(0)) != std::future_status::ready) {
          queued_batches.push_back(now.seconds);
        } else {
          if (pending_training.valid()) {
            adopt_model(pending_training.get());
            if (stop) break;
          }
          launch_training(now.seconds);
        }
      } else {
        ++launched_trainings;
        auto rng = training_rng(launched_trainings);
        ClassifierModel next =
            train(result.store, cfg.classifier_cfg, rng, model.trained() ? &model : nullptr);
        batch_stamps.push_back(now.seconds);
        adopt_model(std::move(next));
      }
    }
  }

  // Drain asynchronous trainings so every assembled batch yields a model.
  while (!stop && cfg.async_retrain && pending_training.valid()) {
    adopt_model(pending_training.get());
    if (stop) break;
    if (!queued_batches.empty()) {
      const double at = queued_batches.front();
      queued_batches.pop_front();
      launch_training(at);
    }
  }
  if (pending_training.valid()) pending_training.wait();

  // End of stream: remaining trajectories are closed and harvested, which
  // may complete one final batch.
  if (!stop) {
    for (const auto& t : tracker.close_all()) result.positive_labels += labeler.harvest_track(t);
    while (!stop) {
      auto batch = labeler.assemble_batch();
      if (!batch) break;
      result.store.add(batch->samples);
      ++launched_trainings;
      auto rng = training_rng(launched_trainings);
      ClassifierModel next =
          train(result.store, cfg.classifier_cfg, rng, model.trained() ? &model : nullptr);
      batch_stamps.push_back(last_stamp);
      adopt_model(std::move(next));
    }
  }

  result.positive_uids = labeler.positive_uids();
  return result;
}

}  // namespace trackforge
