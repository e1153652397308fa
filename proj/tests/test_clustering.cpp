#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <set>

#include "trackforge/clustering.hpp"

using namespace trackforge;

namespace {

// A compact blob of points around a center, dense enough to stay connected.
void add_blob(PointCloud3D& scan, Vec3 center, int n, double spread, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(-spread, spread);
  for (int i = 0; i < n; ++i)
    scan.points.push_back({center.x + off(rng), center.y + off(rng),
                           std::max(0.2, center.z + off(rng)), 0.5});
}

std::multiset<std::tuple<double, double, double>> point_set(const PointCloud3D& pc) {
  std::multiset<std::tuple<double, double, double>> s;
  for (const auto& p : pc.points) s.insert({p.x, p.y, p.z});
  return s;
}

}  // namespace

TEST_CASE("empty scan yields no clusters") {
  CHECK(segment(PointCloud3D{}, ClusteringParams{}).empty());
}

TEST_CASE("well separated groups stay separate") {
  std::mt19937_64 rng(1);
  PointCloud3D scan;
  add_blob(scan, {5.0, 0.0, 1.0}, 30, 0.15, rng);
  add_blob(scan, {5.0, 2.0, 1.0}, 30, 0.15, rng);  // 2 m apart at ~5 m range
  ClusteringParams params;
  params.base_tolerance = 0.4;
  params.tolerance_gain = 0.0;
  CHECK(segment(scan, params).size() == 2);
}

TEST_CASE("range-adaptive tolerance merges distant groups") {
  // Two groups 0.5 m apart: at 15 m range the adaptive tolerance is
  // 0.3 + 0.02 * 15 = 0.6, so they merge; at 5 m it is 0.4 and they do not.
  std::mt19937_64 rng(2);
  ClusteringParams params;  // base 0.3, gain 0.02

  PointCloud3D near_scan;
  add_blob(near_scan, {5.0, 0.0, 1.0}, 25, 0.1, rng);
  add_blob(near_scan, {5.0, 0.7, 1.0}, 25, 0.1, rng);  // min gap ~0.5
  CHECK(segment(near_scan, params).size() == 2);

  PointCloud3D far_scan;
  for (const auto& p : near_scan.points) far_scan.points.push_back({p.x + 10.0, p.y, p.z, 0.5});
  CHECK(segment(far_scan, params).size() == 1);
}

TEST_CASE("exact chain condition on two points") {
  ClusteringParams params;
  params.min_points = 1;
  // Ranges ~10 m: tolerance = 0.3 + 0.02*10 = 0.5.
  PointCloud3D scan;
  scan.points = {{10.0, 0.0, 1.0, 0.5}, {10.0, 0.49, 1.0, 0.5}};
  CHECK(segment(scan, params).size() == 1);
  scan.points[1].y = 0.52;
  CHECK(segment(scan, params).size() == 2);
}

TEST_CASE("output is a disjoint partition of the kept input points") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    PointCloud3D scan;
    std::uniform_real_distribution<double> coord(-8.0, 8.0);
    std::uniform_real_distribution<double> z(0.2, 2.0);
    const int n = 80 + static_cast<int>(rng() % 120);
    for (int i = 0; i < n; ++i) scan.points.push_back({coord(rng), coord(rng), z(rng), 0.5});
    ClusteringParams params;
    params.min_points = 1;

    const auto clusters = segment(scan, params);
    const auto input = point_set(scan);
    std::multiset<std::tuple<double, double, double>> output;
    std::size_t total = 0;
    for (const auto& c : clusters) {
      total += c.points.points.size();
      for (const auto& p : c.points.points) output.insert({p.x, p.y, p.z});
    }
    CHECK(total == output.size());  // pairwise disjoint
    for (const auto& p : output) CHECK(input.count(p) >= 1);
    CHECK(output.size() == scan.points.size());  // min_points=1, nothing dropped
  }
}

TEST_CASE("increasing base tolerance never increases the cluster count") {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    PointCloud3D scan;
    std::uniform_real_distribution<double> coord(-6.0, 6.0);
    std::uniform_real_distribution<double> z(0.2, 1.8);
    for (int i = 0; i < 120; ++i) scan.points.push_back({coord(rng), coord(rng), z(rng), 0.5});
    ClusteringParams params;
    params.min_points = 1;
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double tol : {0.2, 0.4, 0.6, 0.9, 1.3, 2.0}) {
      params.base_tolerance = tol;
      const std::size_t count = segment(scan, params).size();
      CHECK(count <= prev);
      prev = count;
    }
  }
}

TEST_CASE("segmentation is independent of input point order") {
  std::mt19937_64 rng(5);
  PointCloud3D scan;
  add_blob(scan, {3.0, 1.0, 1.0}, 40, 0.2, rng);
  add_blob(scan, {-2.0, 4.0, 1.0}, 25, 0.2, rng);
  add_blob(scan, {6.0, -3.0, 0.8}, 15, 0.15, rng);

  ClusteringParams params;
  const auto a = segment(scan, params);
  std::shuffle(scan.points.begin(), scan.points.end(), rng);
  const auto b = segment(scan, params);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].points.points.size() == b[i].points.points.size());
    for (std::size_t j = 0; j < a[i].points.points.size(); ++j) {
      CHECK(a[i].points.points[j].x == b[i].points.points[j].x);
      CHECK(a[i].points.points[j].y == b[i].points.points[j].y);
      CHECK(a[i].points.points[j].z == b[i].points.points[j].z);
    }
  }
}

TEST_CASE("ground cut and size limits filter points and clusters") {
  std::mt19937_64 rng(6);
  PointCloud3D scan;
  add_blob(scan, {2.0, 0.0, 1.0}, 30, 0.2, rng);
  for (int i = 0; i < 50; ++i)  // ground plane
    scan.points.push_back({0.1 * i, 0.05 * i, 0.05, 0.3});
  scan.points.push_back({-4.0, -4.0, 1.0, 0.5});  // lone point, below min_points

  ClusteringParams params;  // min_points 5, ground_z_cut 0.1
  const auto clusters = segment(scan, params);
  REQUIRE(clusters.size() == 1);
  CHECK(clusters[0].points.points.size() == 30);
  for (const auto& p : clusters[0].points.points) CHECK(p.z > params.ground_z_cut);

  params.max_points = 10;
  CHECK(segment(scan, params).empty());
}

TEST_CASE("cluster geometry fields are populated") {
  std::mt19937_64 rng(7);
  PointCloud3D scan;
  add_blob(scan, {3.0, -1.0, 1.0}, 40, 0.25, rng);
  const auto clusters = segment(scan, ClusteringParams{});
  REQUIRE(clusters.size() == 1);
  const Cluster& c = clusters[0];
  CHECK(c.bounds.x > 0.0);
  CHECK(c.bounds.y > 0.0);
  CHECK(c.bounds.z > 0.0);
  const Aabb box = compute_aabb(c.points);
  CHECK(c.centroid.x >= box.min.x);
  CHECK(c.centroid.x <= box.max.x);
  CHECK(c.bounds.x == Catch::Approx(box.max.x - box.min.x));
}
