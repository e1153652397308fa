#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace trackforge {

inline constexpr int kFeatureDim = 61;

// Confidences live in the open interval (0,1); odds diverge at the endpoints,
// so everything entering the system is clamped to this band.
inline constexpr double kMinConfidence = 1e-6;
inline constexpr double kMaxConfidence = 1.0 - 1e-6;

enum class Errc {
  ConfidenceOutOfRange,
  MissingCluster,
  InvalidCluster,
  EmptyCluster,
  EmptyInput,
  DimensionMismatch,
  SingleClass,
  DegenerateFeatures,
  CorruptModel,
  NumericalBreakdown,
  DomainError,
  EmptyValidationSet,
  EmptySet,
  NoPositives,
  InsufficientData,
  BadScenario,
  IoFailure,
};

inline const char* to_string(Errc e) {
  switch (e) {
    case Errc::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case Errc::MissingCluster: return "MissingCluster";
    case Errc::InvalidCluster: return "InvalidCluster";
    case Errc::EmptyCluster: return "EmptyCluster";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::SingleClass: return "SingleClass";
    case Errc::DegenerateFeatures: return "DegenerateFeatures";
    case Errc::CorruptModel: return "CorruptModel";
    case Errc::NumericalBreakdown: return "NumericalBreakdown";
    case Errc::DomainError: return "DomainError";
    case Errc::EmptyValidationSet: return "EmptyValidationSet";
    case Errc::EmptySet: return "EmptySet";
    case Errc::NoPositives: return "NoPositives";
    case Errc::InsufficientData: return "InsufficientData";
    case Errc::BadScenario: return "BadScenario";
    case Errc::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Seconds since scenario start. Non-decreasing within any stream.
struct Timestamp {
  double seconds = 0.0;
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

enum class DetectorId : std::uint8_t {
  UpperBody = 0,
  Leg = 1,
  Cluster3D = 2,
  TrajectoryPrior = 3,
};

inline constexpr int kDetectorCount = 4;

inline const char* to_string(DetectorId d) {
  switch (d) {
    case DetectorId::UpperBody: return "upper_body";
    case DetectorId::Leg: return "leg";
    case DetectorId::Cluster3D: return "cluster3d";
    case DetectorId::TrajectoryPrior: return "trajectory_prior";
  }
  return "?";
}

inline std::optional<DetectorId> detector_from_string(std::string_view s) {
  if (s == "upper_body") return DetectorId::UpperBody;
  if (s == "leg") return DetectorId::Leg;
  if (s == "cluster3d") return DetectorId::Cluster3D;
  if (s == "trajectory_prior") return DetectorId::TrajectoryPrior;
  return std::nullopt;
}

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
  double intensity = 0.0;  // unitless, in [0,1]
};

struct PointCloud3D {
  std::vector<Point3> points;
};

// One segmented object proposal. bounds = (w,d,h) extents of the
// axis-aligned box around the points; centroid = mean of the points.
struct Cluster {
  PointCloud3D points;
  Vec3 centroid;
  Vec3 bounds;
};

inline Vec3 compute_centroid(const PointCloud3D& pc) {
  Vec3 c;
  for (const auto& p : pc.points) {
    c.x += p.x;
    c.y += p.y;
    c.z += p.z;
  }
  const double n = static_cast<double>(pc.points.size());
  if (n > 0) {
    c.x /= n;
    c.y /= n;
    c.z /= n;
  }
  return c;
}

struct Aabb {
  Vec3 min, max;
};

inline Aabb compute_aabb(const PointCloud3D& pc) {
  Aabb box{{0, 0, 0}, {0, 0, 0}};
  if (pc.points.empty()) return box;
  box.min = {pc.points[0].x, pc.points[0].y, pc.points[0].z};
  box.max = box.min;
  for (const auto& p : pc.points) {
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.min.z = std::min(box.min.z, p.z);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
    box.max.z = std::max(box.max.z, p.z);
  }
  return box;
}

// Builds a cluster from raw points, filling centroid and bounds.
// Degenerate extents are floored at 1e-6 so bounds stay strictly positive.
inline Cluster make_cluster(PointCloud3D pc) {
  Cluster c;
  c.centroid = compute_centroid(pc);
  const Aabb box = compute_aabb(pc);
  c.bounds = {std::max(box.max.x - box.min.x, 1e-6), std::max(box.max.y - box.min.y, 1e-6),
              std::max(box.max.z - box.min.z, 1e-6)};
  c.points = std::move(pc);
  return c;
}

// One sensor's observation of a candidate at a timestamp. Position is in the
// fixed 2D world frame; cluster payload present iff detector == Cluster3D.
struct Detection {
  Timestamp stamp;
  DetectorId detector = DetectorId::Leg;
  double x = 0.0, y = 0.0;
  double confidence = 0.5;
  std::optional<Cluster> cluster;
};

enum class BinaryLabel : std::uint8_t { NonHuman = 0, Human = 1 };

struct FeatureVector {
  std::array<double, kFeatureDim> values{};

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

using TrackId = std::uint64_t;

struct LabeledSample {
  FeatureVector features;
  BinaryLabel label = BinaryLabel::NonHuman;
  std::optional<TrackId> source_track;
  Timestamp stamp;
};

inline double clamp_confidence(double p) {
  return std::min(kMaxConfidence, std::max(kMinConfidence, p));
}

inline bool cluster_is_valid(const Cluster& c) {
  if (c.points.points.empty()) return false;
  if (!(c.bounds.x > 0.0) || !(c.bounds.y > 0.0) || !(c.bounds.z > 0.0)) return false;
  for (const auto& p : c.points.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) return false;
  }
  const Aabb box = compute_aabb(c.points);
  const double tol = 1e-9;
  return c.centroid.x >= box.min.x - tol && c.centroid.x <= box.max.x + tol &&
         c.centroid.y >= box.min.y - tol && c.centroid.y <= box.max.y + tol &&
         c.centroid.z >= box.min.z - tol && c.centroid.z <= box.max.z + tol;
}

// nullopt means the detection satisfies every invariant.
inline std::optional<Errc> validate_detection(const Detection& d) {
  if (!std::isfinite(d.confidence) || d.confidence <= 0.0 || d.confidence >= 1.0)
    return Errc::ConfidenceOutOfRange;
  if (!std::isfinite(d.x) || !std::isfinite(d.y) || !std::isfinite(d.stamp.seconds) ||
      d.stamp.seconds < 0.0)
    return Errc::InvalidCluster;
  if (d.detector == DetectorId::Cluster3D) {
    if (!d.cluster) return Errc::MissingCluster;
    if (!cluster_is_valid(*d.cluster)) return Errc::InvalidCluster;
  } else if (d.cluster) {
    return Errc::InvalidCluster;
  }
  return std::nullopt;
}

}  // namespace trackforge
