#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "trackforge/core.hpp"

namespace trackforge {

// Range-adaptive Euclidean clustering. Two points may join the same cluster
// through a chain whose consecutive gaps are each at most
// base_tolerance + tolerance_gain * min(range of the two endpoints).
struct ClusteringParams {
  double base_tolerance = 0.3;   // meters
  double tolerance_gain = 0.02;  // meters of extra tolerance per meter of range
  int min_points = 5;
  int max_points = 5000;
  double ground_z_cut = 0.1;  // points at or below this height are dropped
  Vec3 sensor_origin{0.0, 0.0, 0.0};
};

// Segments a scan into clusters. Points are sorted lexicographically before
// region growing so the output ordering is a pure function of the input set.
// Clusters outside [min_points, max_points] are discarded.
inline std::vector<Cluster> segment(const PointCloud3D& scan, const ClusteringParams& params) {
  std::vector<Point3> pts;
  pts.reserve(scan.points.size());
  for (const auto& p : scan.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) continue;
    if (p.z <= params.ground_z_cut) continue;
    pts.push_back(p);
  }
  std::sort(pts.begin(), pts.end(), [](const Point3& a, const Point3& b) {
    if (a.x != b.x) return a.x < b.x;
    if (a.y != b.y) return a.y < b.y;
    if (a.z != b.z) return a.z < b.z;
    return a.intensity < b.intensity;
  });

  const std::size_t n = pts.size();
  std::vector<double> range(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pts[i].x - params.sensor_origin.x;
    const double dy = pts[i].y - params.sensor_origin.y;
    const double dz = pts[i].z - params.sensor_origin.z;
    range[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
  }

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };

  const double max_range = n ? *std::max_element(range.begin(), range.end()) : 0.0;
  const double max_tol = params.base_tolerance + params.tolerance_gain * max_range;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = pts[j].x - pts[i].x;
      if (dx > max_tol) break;  // points sorted by x; nothing further can link to i
      const double tol =
          params.base_tolerance + params.tolerance_gain * std::min(range[i], range[j]);
      const double dy = pts[j].y - pts[i].y;
      const double dz = pts[j].z - pts[i].z;
      if (dx * dx + dy * dy + dz * dz <= tol * tol) {
        const int ri = find(static_cast<int>(i));
        const int rj = find(static_cast<int>(j));
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  }

  // Group by root, preserving the sorted order.
  std::vector<std::vector<Point3>> groups;
  std::vector<int> group_of(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int root = find(static_cast<int>(i));
    if (group_of[root] < 0) {
      group_of[root] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[group_of[root]].push_back(pts[i]);
  }

  std::vector<Cluster> clusters;
  for (auto& g : groups) {
    const int count = static_cast<int>(g.size());
    if (count < params.min_points || count > params.max_points) continue;
    clusters.push_back(make_cluster(PointCloud3D{std::move(g)}));
  }
  return clusters;
}

}  // namespace trackforge
