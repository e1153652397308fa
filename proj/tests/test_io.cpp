#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <sstream>

#include "trackforge/logio.hpp"

using namespace trackforge;

namespace {

SimFrame random_frame(std::mt19937_64& rng, double t) {
  std::uniform_real_distribution<double> pos(-10.0, 10.0);
  std::uniform_real_distribution<double> conf(0.01, 0.99);
  std::uniform_real_distribution<double> inten(0.0, 1.0);
  SimFrame frame;
  frame.truth.stamp = Timestamp{t};

  const auto detection = [&](DetectorId id) {
    Detection d;
    d.stamp = Timestamp{t};
    d.detector = id;
    d.x = pos(rng);
    d.y = pos(rng);
    d.confidence = conf(rng);
    return d;
  };
  for (int i = 0; i < static_cast<int>(rng() % 3); ++i)
    frame.upper_body.push_back({detection(DetectorId::UpperBody), static_cast<int>(rng() % 4) - 1});
  for (int i = 0; i < static_cast<int>(rng() % 3); ++i)
    frame.leg.push_back({detection(DetectorId::Leg), static_cast<int>(rng() % 4) - 1});
  for (int i = 0; i < 1 + static_cast<int>(rng() % 3); ++i) {
    Detection d = detection(DetectorId::Cluster3D);
    PointCloud3D pc;
    const int n = 3 + static_cast<int>(rng() % 40);
    for (int k = 0; k < n; ++k)
      pc.points.push_back({d.x + pos(rng) * 0.05, d.y + pos(rng) * 0.05,
                           0.1 + inten(rng) * 1.7, inten(rng)});
    d.cluster = make_cluster(std::move(pc));
    frame.clusters.push_back({std::move(d), static_cast<int>(rng() % 4) - 1});
  }

  for (int i = 0; i < 2; ++i) {
    AgentState a;
    a.id = i;
    a.kind = i == 0 ? AgentKind::Walker : AgentKind::Clutter;
    a.x = pos(rng);
    a.y = pos(rng);
    a.dims = {0.5, 0.4, 1.7};
    frame.truth.agents.push_back(a);
  }
  return frame;
}

}  // namespace

TEST_CASE("detection log round trip is a fixed point") {
  std::mt19937_64 rng(41);
  std::ostringstream first;
  std::vector<SimFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(random_frame(rng, 0.1 * i));
  for (const auto& f : frames) write_detection_log_frame(first, f);

  std::istringstream in(first.str());
  const auto read_back = read_detection_log(in);
  REQUIRE(read_back.size() == frames.size());

  // Writing what was read reproduces the bytes exactly.
  std::ostringstream second;
  for (const auto& f : read_back) {
    for (const auto& d : f.upper_body) write_detection_row(second, d.detection, d.source_agent);
    for (const auto& d : f.leg) write_detection_row(second, d.detection, d.source_agent);
    for (const auto& d : f.clusters) write_detection_row(second, d.detection, d.source_agent);
  }
  CHECK(second.str() == first.str());

  // Non-payload fields survive exactly; quantized points survive within 5e-5.
  for (std::size_t i = 0; i < frames.size(); ++i) {
    REQUIRE(read_back[i].clusters.size() == frames[i].clusters.size());
    for (std::size_t c = 0; c < frames[i].clusters.size(); ++c) {
      const auto& orig = frames[i].clusters[c];
      const auto& back = read_back[i].clusters[c];
      CHECK(back.detection.x == orig.detection.x);
      CHECK(back.detection.confidence == orig.detection.confidence);
      CHECK(back.source_agent == orig.source_agent);
      CHECK(back.detection.cluster->bounds.x == orig.detection.cluster->bounds.x);
      REQUIRE(back.detection.cluster->points.points.size() ==
              orig.detection.cluster->points.points.size());
      for (std::size_t k = 0; k < orig.detection.cluster->points.points.size(); ++k) {
        CHECK(back.detection.cluster->points.points[k].x ==
              Catch::Approx(orig.detection.cluster->points.points[k].x).margin(5.0e-5));
        CHECK(back.detection.cluster->points.points[k].intensity ==
              Catch::Approx(orig.detection.cluster->points.points[k].intensity).margin(5.0e-5));
      }
    }
  }
}

TEST_CASE("ground truth log round trip") {
  std::mt19937_64 rng(42);
  std::ostringstream out;
  std::vector<SimFrame> frames;
  for (int i = 0; i < 5; ++i) {
    frames.push_back(random_frame(rng, 0.1 * i));
    write_ground_truth_frame(out, frames.back().truth);
  }
  std::istringstream in(out.str());
  const auto read_back = read_ground_truth_log(in);
  REQUIRE(read_back.size() == frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    REQUIRE(read_back[i].agents.size() == frames[i].truth.agents.size());
    CHECK(read_back[i].stamp.seconds == frames[i].truth.stamp.seconds);
    for (std::size_t a = 0; a < frames[i].truth.agents.size(); ++a) {
      CHECK(read_back[i].agents[a].id == frames[i].truth.agents[a].id);
      CHECK(read_back[i].agents[a].kind == frames[i].truth.agents[a].kind);
      CHECK(read_back[i].agents[a].x == frames[i].truth.agents[a].x);
      CHECK(read_back[i].agents[a].dims.z == frames[i].truth.agents[a].dims.z);
    }
  }
}

TEST_CASE("log reader clamps confidences into the open interval") {
  std::istringstream in(
      R"({"confidence":1.0,"detector":"leg","t":0.1,"x":1.0,"y":2.0})"
      "\n"
      R"({"confidence":0.0,"detector":"leg","t":0.1,"x":1.0,"y":2.0})");
  const auto frames = read_detection_log(in);
  REQUIRE(frames.size() == 1);
  REQUIRE(frames[0].leg.size() == 2);
  CHECK(frames[0].leg[0].detection.confidence == kMaxConfidence);
  CHECK(frames[0].leg[1].detection.confidence == kMinConfidence);
}

TEST_CASE("malformed log lines raise IoFailure with the line number") {
  std::istringstream bad_json("this is not json\n");
  CHECK_THROWS_AS(read_detection_log(bad_json), Error);

  std::istringstream missing_key(R"({"detector":"leg","t":0.1})" "\n");
  try {
    read_detection_log(missing_key);
    FAIL("expected IoFailure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IoFailure);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  std::istringstream bad_detector(
      R"({"confidence":0.5,"detector":"sonar","t":0.1,"x":0,"y":0})" "\n");
  CHECK_THROWS_AS(read_detection_log(bad_detector), Error);
}

TEST_CASE("detections missing the agent key default to false positive") {
  std::istringstream in(R"({"confidence":0.5,"detector":"leg","t":0.1,"x":1.0,"y":2.0})" "\n");
  const auto frames = read_detection_log(in);
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].leg[0].source_agent == -1);
}
