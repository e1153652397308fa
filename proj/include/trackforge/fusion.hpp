#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "trackforge/classifier.hpp"
#include "trackforge/core.hpp"
#include "trackforge/tracker.hpp"

namespace trackforge {

struct LabelGenConfig {
  double sigma_t = 0.7;  // trajectory probability threshold for positives
  int pos_batch = 300;
  int neg_batch = 300;
  int max_iterations = 7;
  Vec3 volume_min{0.2, 0.2, 0.2};  // human-like bounds, inclusive
  Vec3 volume_max{1.0, 1.0, 2.0};
  // Active confirmed tracks are re-evaluated for labeling at this period;
  // closed tracks are always evaluated.
  double active_eval_period = 5.0;
};

inline double observation_odds(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw Error(Errc::DomainError, "odds are defined on (0,1) only");
  return p / (1.0 - p);
}

inline double log_odds(double p) {
  if (!(p > 0.0) || !(p < 1.0))
    throw Error(Errc::DomainError, "odds are defined on (0,1) only");
  return std::log(p) - std::log1p(-p);
}

// Fuses independent per-observation confidences by multiplying their odds,
// in log space. An empty list is the neutral element 0.5. The result is
// clamped to [1e-9, 1-1e-9].
inline double fuse_confidences(std::span<const double> confidences) {
  double l = 0.0;
  for (const double p : confidences) l += log_odds(p);
  // probability = odds/(1+odds) = 1/(1+exp(-l))
  double prob;
  if (l >= 0)
    prob = 1.0 / (1.0 + std::exp(-l));
  else
    prob = std::exp(l) / (1.0 + std::exp(l));
  return std::min(1.0 - 1e-9, std::max(1e-9, prob));
}

namespace detail {

inline double logistic_clamped(double log_odds_sum) {
  double prob;
  if (log_odds_sum >= 0)
    prob = 1.0 / (1.0 + std::exp(-log_odds_sum));
  else
    prob = std::exp(log_odds_sum) / (1.0 + std::exp(log_odds_sum));
  return std::min(1.0 - 1e-9, std::max(1e-9, prob));
}

}  // namespace detail

// Probability that the whole trajectory was generated by a human: the odds
// product over every stored (observation, detector) pair, accumulated in
// log space as evidence arrives. Detectors that produced no detection at a
// frame contribute nothing (odds 1).
inline double trajectory_probability(const Track& track) {
  return detail::logistic_clamped(track.evidence_log_odds);
}

// Same quantity recomputed from the stored evidence lists; tests check it
// agrees with the incremental sum.
inline double trajectory_probability_recomputed(const Track& track) {
  double l = 0.0;
  for (const auto& per_detector : track.detections_by_detector)
    for (const auto& [stamp, confidence] : per_detector) l += log_odds(confidence);
  return detail::logistic_clamped(l);
}

// A cluster is non-human-like iff any bounding dimension falls outside its
// human range. Boundary values are inside (not negatives).
inline bool outside_human_volume(const Vec3& bounds, const LabelGenConfig& cfg) {
  return bounds.x < cfg.volume_min.x || bounds.x > cfg.volume_max.x ||
         bounds.y < cfg.volume_min.y || bounds.y > cfg.volume_max.y ||
         bounds.z < cfg.volume_min.z || bounds.z > cfg.volume_max.z;
}

// Per-iteration validation bookkeeping: u_i counts correctly classified
// validation examples, stability accumulates |u_i - u_{i+1}|.
struct StabilityRecord {
  std::vector<int> correct_counts;
  std::vector<int> increments;
  int stability = 0;

  bool has_validation() const { return !correct_counts.empty(); }
};

struct TrainingBatch {
  std::vector<LabeledSample> samples;  // pos_batch positives then neg_batch negatives
  int positives = 0;
  int negatives = 0;
};

// Generates training labels from trajectories (positives, Eq.-style odds
// threshold) and from the volume filter (negatives), deduplicating cluster
// instances, and assembles fixed-size training batches.
class LabelGenerator {
 public:
  explicit LabelGenerator(LabelGenConfig cfg = {}) : cfg_(cfg) {}

  const LabelGenConfig& config() const { return cfg_; }

  // Labels every not-yet-labeled cluster on the track as Human when the
  // trajectory probability reaches sigma_t. Returns the number of new labels.
  std::size_t harvest_track(const Track& track) {
    if (track.clusters.empty()) return 0;
    if (trajectory_probability(track) < cfg_.sigma_t) return 0;
    std::size_t added = 0;
    for (const auto& c : track.clusters) {
      if (!labeled_uids_.insert(c.uid).second) continue;
      pending_pos_.push_back({c.features, BinaryLabel::Human, track.id, c.stamp});
      positive_uids_.push_back(c.uid);
      ++added;
    }
    return added;
  }

  // Volume-filter negatives for one frame's cluster detections. A cluster
  // currently associated to a trajectory at or above sigma_t is exempt.
  std::size_t harvest_volume_negatives(const std::vector<ClusterDetection>& clusters,
                                       const std::vector<bool>& exempt) {
    std::size_t added = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      if (i < exempt.size() && exempt[i]) continue;
      const ClusterDetection& c = clusters[i];
      if (!c.detection.cluster) continue;
      if (!outside_human_volume(c.detection.cluster->bounds, cfg_)) continue;
      if (labeled_uids_.count(c.uid)) continue;
      labeled_uids_.insert(c.uid);
      pending_neg_.push_back({c.features, BinaryLabel::NonHuman, std::nullopt, c.detection.stamp});
      ++added;
    }
    return added;
  }

  std::size_t pending_positives() const { return pending_pos_.size(); }
  std::size_t pending_negatives() const { return pending_neg_.size(); }

  // Emits a batch exactly when both quotas are met; emitted samples leave
  // the pending queues in arrival order.
  std::optional<TrainingBatch> assemble_batch() {
    if (pending_pos_.size() < static_cast<std::size_t>(cfg_.pos_batch) ||
        pending_neg_.size() < static_cast<std::size_t>(cfg_.neg_batch))
      return std::nullopt;
    TrainingBatch batch;
    batch.positives = cfg_.pos_batch;
    batch.negatives = cfg_.neg_batch;
    for (int i = 0; i < cfg_.pos_batch; ++i) {
      batch.samples.push_back(std::move(pending_pos_.front()));
      pending_pos_.pop_front();
    }
    for (int i = 0; i < cfg_.neg_batch; ++i) {
      batch.samples.push_back(std::move(pending_neg_.front()));
      pending_neg_.pop_front();
    }
    return batch;
  }

  // Cluster uids labeled positive so far, in labeling order.
  const std::vector<std::uint64_t>& positive_uids() const { return positive_uids_; }

 private:
  LabelGenConfig cfg_;
  std::deque<LabeledSample> pending_pos_;
  std::deque<LabeledSample> pending_neg_;
  std::unordered_set<std::uint64_t> labeled_uids_;
  std::vector<std::uint64_t> positive_uids_;
};

// Appends a raw correct count to the record, updating the increments and
// the cumulative stability.
inline void record_count(StabilityRecord& record, int u) {
  if (!record.correct_counts.empty()) {
    const int inc = std::abs(record.correct_counts.back() - u);
    record.increments.push_back(inc);
    record.stability += inc;
  }
  record.correct_counts.push_back(u);
}

// Scores a model on a labeled validation set (psi thresholds at 0.5) and
// appends the result to the record.
inline void record_iteration(StabilityRecord& record, const ClassifierModel& model,
                             std::span<const LabeledSample> validation) {
  if (validation.empty())
    throw Error(Errc::EmptyValidationSet, "stability needs a non-empty validation set");
  int u = 0;
  for (const auto& s : validation) {
    const double p = predict_proba(model, s.features);
    if (s.label == BinaryLabel::Human ? p > 0.5 : p <= 0.5) ++u;
  }
  record_count(record, u);
}

// Halts at the iteration cap, or earlier when a validation set is present
// and the stability has stopped increasing for two consecutive iterations.
inline bool halted(int iteration, const StabilityRecord& record, const LabelGenConfig& cfg) {
  if (iteration >= cfg.max_iterations) return true;
  if (!record.has_validation()) return false;
  const auto& inc = record.increments;
  return inc.size() >= 2 && inc[inc.size() - 1] == 0 && inc[inc.size() - 2] == 0;
}

}  // namespace trackforge
