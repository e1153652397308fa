#pragma once

#include <Eigen/Dense>
#include <array>
#include <limits>
#include <optional>
#include <vector>

#include "trackforge/core.hpp"
#include "trackforge/features.hpp"

namespace trackforge {

struct TrackerParams {
  double accel_noise_std = 1.0;  // m/s^2, white-acceleration process noise
  double gate_chi2 = 9.21;       // chi-square 99% with 2 dof
  int init_hits = 2;             // frames with a detection before confirmation
  double delete_after = 1.0;     // seconds unseen before a track is closed
  // Position observation noise per DetectorId (TrajectoryPrior unused).
  std::array<double, kDetectorCount> obs_noise_std{0.15, 0.10, 0.20, 0.0};
  double initial_speed_std = 2.0;  // m/s prior on an unobserved velocity
};

// Constant-velocity state: mean (x, y, vx, vy), covariance SPD.
struct TrackState {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Identity();
  Timestamp last_update;
};

inline TrackState predict(const TrackState& s, double dt, const TrackerParams& params) {
  TrackState out = s;
  if (dt <= 0.0) return out;
  Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  const double q = params.accel_noise_std * params.accel_noise_std;
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Q(0, 0) = Q(1, 1) = q * dt4 / 4.0;
  Q(2, 2) = Q(3, 3) = q * dt2;
  Q(0, 2) = Q(2, 0) = Q(1, 3) = Q(3, 1) = q * dt3 / 2.0;
  out.mean = F * s.mean;
  out.covariance = F * s.covariance * F.transpose() + Q;
  out.last_update.seconds = s.last_update.seconds + dt;
  return out;
}

namespace detail {

inline Eigen::Matrix2d innovation_covariance(const TrackState& s, double obs_std) {
  Eigen::Matrix2d S = s.covariance.topLeftCorner<2, 2>();
  S(0, 0) += obs_std * obs_std;
  S(1, 1) += obs_std * obs_std;
  return S;
}

}  // namespace detail

// Squared Mahalanobis distance of a position observation from the track's
// predicted position, normalized by the innovation covariance.
inline double mahalanobis2(const TrackState& s, const Detection& det, const TrackerParams& params) {
  const Eigen::Matrix2d S = detail::innovation_covariance(s, params.obs_noise_std[static_cast<int>(det.detector)]);
  const Eigen::Vector2d nu(det.x - s.mean(0), det.y - s.mean(1));
  return nu.dot(S.inverse() * nu);
}

// Position-only Kalman update in Joseph form, keeping the covariance SPD.
inline TrackState update(const TrackState& s, const Detection& det, const TrackerParams& params) {
  const double obs_std = params.obs_noise_std[static_cast<int>(det.detector)];
  const Eigen::Matrix2d S = detail::innovation_covariance(s, obs_std);
  const double det_s = S.determinant();
  if (!(det_s > 0.0) || !std::isfinite(det_s))
    throw Error(Errc::NumericalBreakdown, "innovation covariance is not invertible");

  Eigen::Matrix<double, 4, 2> H_t = Eigen::Matrix<double, 4, 2>::Zero();
  H_t(0, 0) = 1.0;
  H_t(1, 1) = 1.0;
  const Eigen::Matrix<double, 4, 2> K = s.covariance * H_t * S.inverse();
  const Eigen::Vector2d nu(det.x - s.mean(0), det.y - s.mean(1));

  TrackState out = s;
  out.mean = s.mean + K * nu;
  Eigen::Matrix4d I_KH = Eigen::Matrix4d::Identity();
  I_KH.topLeftCorner<4, 2>() -= K;  // K*H zero-pads columns 2,3
  const Eigen::Matrix2d R = Eigen::Matrix2d::Identity() * (obs_std * obs_std);
  out.covariance = I_KH * s.covariance * I_KH.transpose() + K * R * K.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose().eval());
  out.last_update = det.stamp;
  return out;
}

struct TrackStateSnapshot {
  Timestamp stamp;
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
};

// Reduced record of an associated 3D cluster detection; raw points are not
// retained on tracks, only what labeling needs.
struct ClusterObservation {
  Timestamp stamp;
  std::uint64_t uid = 0;
  FeatureVector features;
  Vec3 bounds;
};

struct Track {
  TrackId id = 0;
  TrackState state;
  std::vector<TrackStateSnapshot> history;
  // Ordered (timestamp, confidence) evidence per detector, the raw material
  // of the trajectory probability.
  std::array<std::vector<std::pair<Timestamp, double>>, kDetectorCount> detections_by_detector;
  std::vector<ClusterObservation> clusters;
  // Running sum of log-odds over all evidence; kept in sync by add_evidence
  // so the trajectory probability is O(1) per query.
  double evidence_log_odds = 0.0;
  int hits = 0;
  int misses = 0;
  bool confirmed = false;
  Timestamp first_seen;
  Timestamp last_seen;

  void add_evidence(Timestamp stamp, DetectorId detector, double confidence) {
    detections_by_detector[static_cast<int>(detector)].emplace_back(stamp, confidence);
    evidence_log_odds += std::log(confidence) - std::log1p(-confidence);
  }
};

inline double path_length(const Track& t) {
  double len = 0.0;
  for (std::size_t i = 1; i < t.history.size(); ++i) {
    const double dx = t.history[i].x - t.history[i - 1].x;
    const double dy = t.history[i].y - t.history[i - 1].y;
    len += std::sqrt(dx * dx + dy * dy);
  }
  return len;
}

// Mean speed of the filter state over a trailing window of the history.
inline double smoothed_speed(const Track& t, double window_seconds = 1.0) {
  if (t.history.empty()) return 0.0;
  const double cutoff = t.history.back().stamp.seconds - window_seconds;
  double sum = 0.0;
  int n = 0;
  for (auto it = t.history.rbegin(); it != t.history.rend(); ++it) {
    if (it->stamp.seconds < cutoff) break;
    sum += std::sqrt(it->vx * it->vx + it->vy * it->vy);
    ++n;
  }
  return n ? sum / n : 0.0;
}

namespace detail {

// Classic O(n^3) min-cost assignment on a square matrix (potentials +
// augmenting paths). Returns row -> column.
inline std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

struct Association {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unassigned_detections;
};

// Global nearest neighbor on squared Mahalanobis distance: pairs beyond
// gate_chi2 are excluded, match cardinality is maximized, and total distance
// is minimized among the gated pairs (so the two-track/two-detection case
// agrees with brute-force enumeration of both assignments).
inline Association associate(const std::vector<const TrackState*>& tracks,
                             const std::vector<Detection>& detections,
                             const TrackerParams& params) {
  Association out;
  const int nt = static_cast<int>(tracks.size());
  const int nd = static_cast<int>(detections.size());
  if (nd == 0) return out;
  if (nt == 0) {
    for (int j = 0; j < nd; ++j) out.unassigned_detections.push_back(j);
    return out;
  }

  // Square cost matrix with per-row/column dummies for "unassigned".
  // Leaving a gated pair unmatched costs two dummy entries, which always
  // exceeds any single gated cost, so cardinality is maximized first.
  const int n = nt + nd;
  const double kForbid = 1e12;
  const double kDummy = params.gate_chi2;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nd; ++j) {
      const double m2 = mahalanobis2(*tracks[i], detections[j], params);
      cost[i][j] = (m2 <= params.gate_chi2) ? m2 : kForbid;
    }
  for (int i = 0; i < nt; ++i)
    for (int j = nd; j < n; ++j) cost[i][j] = (j - nd == i) ? kDummy : kForbid;
  for (int i = nt; i < n; ++i)
    for (int j = 0; j < nd; ++j) cost[i][j] = (i - nt == j) ? kDummy : kForbid;

  const std::vector<int> row_to_col = detail::min_cost_assignment(cost);
  std::vector<char> det_matched(nd, 0);
  for (int i = 0; i < nt; ++i) {
    const int j = row_to_col[i];
    if (j >= 0 && j < nd && cost[i][j] < kForbid) {
      out.matches.emplace_back(i, j);
      det_matched[j] = 1;
    }
  }
  for (int j = 0; j < nd; ++j)
    if (!det_matched[j]) out.unassigned_detections.push_back(j);
  return out;
}

// A 3D cluster detection enriched at ingestion with a stable per-run id and
// its extracted feature vector.
struct ClusterDetection {
  Detection detection;
  std::uint64_t uid = 0;
  FeatureVector features;
};

struct Frame {
  Timestamp stamp;
  std::vector<Detection> upper_body;
  std::vector<Detection> leg;
  std::vector<ClusterDetection> clusters;
};

struct StepResult {
  std::vector<Track> closed;  // confirmed tracks whose lifetime ended this step
  // Track each input cluster detection was associated with, if any;
  // parallel to Frame::clusters.
  std::vector<std::optional<TrackId>> cluster_track;
};

// Multisensor multi-target tracker. Detectors are applied sequentially in a
// fixed order (Leg, UpperBody, Cluster3D) for determinism; unassigned
// detections spawn candidate tracks that confirm after init_hits frames.
class Tracker {
 public:
  explicit Tracker(TrackerParams params = {}) : params_(params) {}

  const TrackerParams& params() const { return params_; }
  const std::vector<Track>& tracks() const { return tracks_; }

  Track* find(TrackId id) {
    for (auto& t : tracks_)
      if (t.id == id) return &t;
    return nullptr;
  }

  // Appends pseudo-detector evidence (no state update); used for the
  // trajectory prior.
  void append_evidence(TrackId id, Timestamp stamp, DetectorId detector, double confidence) {
    if (Track* t = find(id)) t->add_evidence(stamp, detector, confidence);
  }

  StepResult step(const Frame& frame) {
    const Timestamp now = frame.stamp;
    StepResult result;
    result.cluster_track.assign(frame.clusters.size(), std::nullopt);

    for (auto& t : tracks_) {
      const double dt = now.seconds - t.state.last_update.seconds;
      t.state = predict(t.state, dt, params_);
      t.state.last_update = now;
    }
    std::vector<char> updated(tracks_.size(), 0);

    const auto run_detector = [&](DetectorId d, const std::vector<Detection>& dets,
                                  const std::vector<ClusterDetection>* clusters) {
      std::vector<const TrackState*> states;
      states.reserve(tracks_.size());
      for (const auto& t : tracks_) states.push_back(&t.state);
      const Association assoc = associate(states, dets, params_);
      for (const auto& [ti, dj] : assoc.matches) {
        Track& t = tracks_[ti];
        t.state = update(t.state, dets[dj], params_);
        t.add_evidence(now, d, dets[dj].confidence);
        if (clusters) {
          const ClusterDetection& c = (*clusters)[dj];
          t.clusters.push_back({now, c.uid, c.features, c.detection.cluster->bounds});
          result.cluster_track[dj] = t.id;
        }
        if (ti < static_cast<int>(updated.size())) updated[ti] = 1;
      }
      for (const int dj : assoc.unassigned_detections) {
        Track t;
        t.id = next_id_++;
        t.state.mean << dets[dj].x, dets[dj].y, 0.0, 0.0;
        const double obs = params_.obs_noise_std[static_cast<int>(d)];
        t.state.covariance = Eigen::Matrix4d::Zero();
        t.state.covariance(0, 0) = t.state.covariance(1, 1) = obs * obs;
        t.state.covariance(2, 2) = t.state.covariance(3, 3) =
            params_.initial_speed_std * params_.initial_speed_std;
        t.state.last_update = now;
        t.first_seen = t.last_seen = now;
        t.add_evidence(now, d, dets[dj].confidence);
        if (clusters) {
          const ClusterDetection& c = (*clusters)[dj];
          t.clusters.push_back({now, c.uid, c.features, c.detection.cluster->bounds});
          result.cluster_track[dj] = t.id;
        }
        tracks_.push_back(std::move(t));
        updated.push_back(1);
      }
    };

    run_detector(DetectorId::Leg, frame.leg, nullptr);
    run_detector(DetectorId::UpperBody, frame.upper_body, nullptr);
    std::vector<Detection> cluster_dets;
    cluster_dets.reserve(frame.clusters.size());
    for (const auto& c : frame.clusters) cluster_dets.push_back(c.detection);
    run_detector(DetectorId::Cluster3D, cluster_dets, &frame.clusters);

    for (std::size_t i = 0; i < tracks_.size(); ++i) {
      Track& t = tracks_[i];
      if (updated[i]) {
        ++t.hits;
        t.misses = 0;
        t.last_seen = now;
        if (t.hits >= params_.init_hits) t.confirmed = true;
      } else {
        ++t.misses;
      }
      t.history.push_back({now, t.state.mean(0), t.state.mean(1), t.state.mean(2), t.state.mean(3)});
    }

    std::vector<Track> kept;
    kept.reserve(tracks_.size());
    for (auto& t : tracks_) {
      if (now.seconds - t.last_seen.seconds > params_.delete_after) {
        if (t.confirmed) result.closed.push_back(std::move(t));
      } else {
        kept.push_back(std::move(t));
      }
    }
    tracks_ = std::move(kept);
    return result;
  }

  // Flushes every remaining confirmed track at end of stream.
  std::vector<Track> close_all() {
    std::vector<Track> closed;
    for (auto& t : tracks_)
      if (t.confirmed) closed.push_back(std::move(t));
    tracks_.clear();
    return closed;
  }

 private:
  TrackerParams params_;
  std::vector<Track> tracks_;
  TrackId next_id_ = 1;
};

}  // namespace trackforge
