#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "trackforge/core.hpp"

namespace trackforge {

// 61-dimensional cluster descriptor. Fixed layout:
//   [0]      f1  point count
//   [1]      f2  min Euclidean distance from any point to the sensor origin
//   [2..7]   f3  3D covariance of the points about the centroid, upper
//                triangle (xx, xy, xz, yy, yz, zz), normalized by count
//   [8..13]  f4  moment-of-inertia tensor about the centroid, upper triangle,
//                normalized by count
//   [14..33] f5  (width, depth) of 10 equal-height vertical slices of
//                [z_min, z_max], bottom to top; empty slices contribute (0,0)
//   [34..60] f6  intensity mean, std, and a 25-bin histogram over [0,1]
//                normalized to sum 1
inline constexpr int kSliceCount = 10;
inline constexpr int kIntensityBins = 25;

inline FeatureVector extract_features(const Cluster& cluster, const Vec3& sensor_origin) {
  const auto& pts = cluster.points.points;
  if (pts.empty()) throw Error(Errc::EmptyCluster, "cannot extract features from an empty cluster");

  FeatureVector f;
  const double n = static_cast<double>(pts.size());
  f[0] = n;

  double min_d2 = std::numeric_limits<double>::max();
  for (const auto& p : pts) {
    const double dx = p.x - sensor_origin.x;
    const double dy = p.y - sensor_origin.y;
    const double dz = p.z - sensor_origin.z;
    min_d2 = std::min(min_d2, dx * dx + dy * dy + dz * dz);
  }
  f[1] = std::sqrt(min_d2);

  const Vec3 c = cluster.centroid;
  double cov[6] = {0, 0, 0, 0, 0, 0};   // xx xy xz yy yz zz
  double moi[6] = {0, 0, 0, 0, 0, 0};   // Ixx Ixy Ixz Iyy Iyz Izz
  for (const auto& p : pts) {
    const double x = p.x - c.x, y = p.y - c.y, z = p.z - c.z;
    cov[0] += x * x;
    cov[1] += x * y;
    cov[2] += x * z;
    cov[3] += y * y;
    cov[4] += y * z;
    cov[5] += z * z;
    moi[0] += y * y + z * z;
    moi[1] -= x * y;
    moi[2] -= x * z;
    moi[3] += x * x + z * z;
    moi[4] -= y * z;
    moi[5] += x * x + y * y;
  }
  for (int i = 0; i < 6; ++i) {
    f[2 + i] = cov[i] / n;
    f[8 + i] = moi[i] / n;
  }

  // f5: axis-aligned slice extents over 10 equal z bands. A flat cluster
  // (zero z extent) puts every point in the bottom band.
  const Aabb box = compute_aabb(cluster.points);
  const double z_span = box.max.z - box.min.z;
  double slice_min[kSliceCount][2];
  double slice_max[kSliceCount][2];
  bool slice_used[kSliceCount] = {};
  for (const auto& p : pts) {
    int band = 0;
    if (z_span > 0.0)
      band = std::min(kSliceCount - 1, static_cast<int>((p.z - box.min.z) / z_span * kSliceCount));
    if (!slice_used[band]) {
      slice_used[band] = true;
      slice_min[band][0] = slice_max[band][0] = p.x;
      slice_min[band][1] = slice_max[band][1] = p.y;
    } else {
      slice_min[band][0] = std::min(slice_min[band][0], p.x);
      slice_min[band][1] = std::min(slice_min[band][1], p.y);
      slice_max[band][0] = std::max(slice_max[band][0], p.x);
      slice_max[band][1] = std::max(slice_max[band][1], p.y);
    }
  }
  for (int b = 0; b < kSliceCount; ++b) {
    f[14 + 2 * b] = slice_used[b] ? slice_max[b][0] - slice_min[b][0] : 0.0;
    f[14 + 2 * b + 1] = slice_used[b] ? slice_max[b][1] - slice_min[b][1] : 0.0;
  }

  double mean = 0.0;
  for (const auto& p : pts) mean += p.intensity;
  mean /= n;
  double var = 0.0;
  double hist[kIntensityBins] = {};
  for (const auto& p : pts) {
    var += (p.intensity - mean) * (p.intensity - mean);
    const double clamped = std::clamp(p.intensity, 0.0, 1.0);
    const int bin = std::min(kIntensityBins - 1, static_cast<int>(clamped * kIntensityBins));
    hist[bin] += 1.0;
  }
  f[34] = mean;
  f[35] = std::sqrt(var / n);
  for (int b = 0; b < kIntensityBins; ++b) f[36 + b] = hist[b] / n;

  return f;
}

// Per-dimension min/max observed on a fitting set. Dimensions where
// min == max are degenerate and map to 0 under apply_scaler.
struct FeatureScaler {
  std::array<double, kFeatureDim> min{};
  std::array<double, kFeatureDim> max{};

  bool degenerate(int dim) const { return min[dim] == max[dim]; }
  friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;
};

inline FeatureScaler fit_scaler(std::span<const FeatureVector> samples) {
  if (samples.empty()) throw Error(Errc::EmptyInput, "scaler needs at least one sample");
  FeatureScaler s;
  s.min = samples[0].values;
  s.max = samples[0].values;
  for (const auto& v : samples) {
    for (int i = 0; i < kFeatureDim; ++i) {
      s.min[i] = std::min(s.min[i], v[i]);
      s.max[i] = std::max(s.max[i], v[i]);
    }
  }
  return s;
}

// Maps each dimension through 2*(x-min)/(max-min) - 1 and clamps to [-1,1].
inline FeatureVector apply_scaler(const FeatureScaler& s, const FeatureVector& v) {
  FeatureVector out;
  for (int i = 0; i < kFeatureDim; ++i) {
    if (s.degenerate(i)) {
      out[i] = 0.0;
    } else {
      const double t = 2.0 * (v[i] - s.min[i]) / (s.max[i] - s.min[i]) - 1.0;
      out[i] = std::clamp(t, -1.0, 1.0);
    }
  }
  return out;
}

}  // namespace trackforge
