#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "trackforge/core.hpp"

namespace trackforge {

struct Box3 {
  Vec3 min, max;
};

inline Box3 box_from_center(double x, double y, double z_base, const Vec3& dims) {
  return {{x - dims.x / 2.0, y - dims.y / 2.0, z_base},
          {x + dims.x / 2.0, y + dims.y / 2.0, z_base + dims.z}};
}

inline double iou_3d(const Box3& a, const Box3& b) {
  const double ix = std::min(a.max.x, b.max.x) - std::max(a.min.x, b.min.x);
  const double iy = std::min(a.max.y, b.max.y) - std::max(a.min.y, b.min.y);
  const double iz = std::min(a.max.z, b.max.z) - std::max(a.min.z, b.min.z);
  if (ix <= 0 || iy <= 0 || iz <= 0) return 0.0;
  const double inter = ix * iy * iz;
  const double va = (a.max.x - a.min.x) * (a.max.y - a.min.y) * (a.max.z - a.min.z);
  const double vb = (b.max.x - b.min.x) * (b.max.y - b.min.y) * (b.max.z - b.min.z);
  return inter / (va + vb - inter);
}

struct ScoredBox {
  Box3 box;
  double score = 0.0;
};

// Accumulated matching outcome: (score, was-a-true-positive) per prediction
// plus the ground-truth count; mergeable across frames.
struct MatchResult {
  std::vector<std::pair<double, bool>> scored;
  int num_ground_truth = 0;

  void merge(const MatchResult& other) {
    scored.insert(scored.end(), other.scored.begin(), other.scored.end());
    num_ground_truth += other.num_ground_truth;
  }
};

namespace detail {

inline bool scored_box_before(const ScoredBox& a, const ScoredBox& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.box.min.x != b.box.min.x) return a.box.min.x < b.box.min.x;
  if (a.box.min.y != b.box.min.y) return a.box.min.y < b.box.min.y;
  return a.box.min.z < b.box.min.z;
}

}  // namespace detail

// Greedy matching in descending score order (ties broken by box position so
// the result does not depend on input order). A prediction is a true
// positive iff its IoU with a still-unmatched ground-truth box exceeds 0.5.
inline MatchResult match_frame(std::vector<ScoredBox> predictions,
                               const std::vector<Box3>& ground_truth) {
  std::sort(predictions.begin(), predictions.end(), detail::scored_box_before);
  MatchResult result;
  result.num_ground_truth = static_cast<int>(ground_truth.size());
  std::vector<char> gt_used(ground_truth.size(), 0);
  for (const auto& pred : predictions) {
    int best = -1;
    double best_iou = 0.5;  // strictly more than 50% overlap
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (gt_used[g]) continue;
      const double iou = iou_3d(pred.box, ground_truth[g]);
      if (iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) gt_used[best] = 1;
    result.scored.emplace_back(pred.score, best >= 0);
  }
  return result;
}

// All-point average precision over score-ranked predictions.
inline double average_precision(const MatchResult& matches) {
  if (matches.num_ground_truth <= 0)
    throw Error(Errc::NoPositives, "average precision needs at least one ground-truth positive");
  std::vector<std::pair<double, bool>> ranked = matches.scored;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  double ap = 0.0;
  int tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (!ranked[k].second) continue;
    ++tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
    ap += precision / matches.num_ground_truth;
  }
  return ap;
}

// Precision-recall points swept over every prefix of the ranking, one row
// per true positive.
inline std::vector<std::pair<double, double>> pr_curve(const MatchResult& matches) {
  std::vector<std::pair<double, bool>> ranked = matches.scored;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::pair<double, double>> points;  // (recall, precision)
  int tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    if (!ranked[k].second) continue;
    ++tp;
    points.emplace_back(static_cast<double>(tp) / std::max(1, matches.num_ground_truth),
                        static_cast<double>(tp) / static_cast<double>(k + 1));
  }
  return points;
}

struct ConfusionCounts {
  int tp = 0, tn = 0, fp = 0, fn = 0;
};

// Classification accuracy of scored, truth-labeled samples at a probability
// threshold: (TP+TN)/(TP+TN+FP+FN).
inline double accuracy(std::span<const std::pair<double, bool>> labeled_scores,
                       double probability_threshold = 0.5) {
  if (labeled_scores.empty()) throw Error(Errc::EmptySet, "accuracy over an empty set");
  ConfusionCounts c;
  for (const auto& [score, is_human] : labeled_scores) {
    const bool predicted = score > probability_threshold;
    if (predicted && is_human)
      ++c.tp;
    else if (predicted && !is_human)
      ++c.fp;
    else if (!predicted && is_human)
      ++c.fn;
    else
      ++c.tn;
  }
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(labeled_scores.size());
}

// Assigns a human/non-human truth value to each scored proposal by greedy
// IoU matching against ground-truth boxes (score-independent: highest IoU
// first, one proposal per ground-truth box). Used for accuracy, where the
// rejected proposals need truth values too.
inline std::vector<std::pair<double, bool>> label_proposals_by_iou(
    const std::vector<ScoredBox>& proposals, const std::vector<Box3>& ground_truth) {
  struct Cand {
    double iou;
    std::size_t p, g;
  };
  std::vector<Cand> cands;
  for (std::size_t p = 0; p < proposals.size(); ++p)
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      const double iou = iou_3d(proposals[p].box, ground_truth[g]);
      if (iou > 0.5) cands.push_back({iou, p, g});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<char> p_used(proposals.size(), 0), g_used(ground_truth.size(), 0);
  std::vector<std::pair<double, bool>> labeled;
  labeled.reserve(proposals.size());
  for (std::size_t p = 0; p < proposals.size(); ++p)
    labeled.emplace_back(proposals[p].score, false);
  for (const auto& c : cands) {
    if (p_used[c.p] || g_used[c.g]) continue;
    p_used[c.p] = g_used[c.g] = 1;
    labeled[c.p].second = true;
  }
  return labeled;
}

}  // namespace trackforge
