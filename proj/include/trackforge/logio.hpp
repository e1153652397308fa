#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackforge/core.hpp"
#include "trackforge/simulator.hpp"

namespace trackforge {

// Line-delimited JSON logs, one object per row.
//
// Detection rows: {t, detector, x, y, confidence, agent?, cluster?}
//   cluster: {points: [[x,y,z,intensity], ...], bounds: [w,d,h]}
//   agent: generating agent id, -1 for false positives (absent in foreign
//   logs; never consulted by the learning loop).
// Ground-truth rows: {t, agent_id, kind, x, y, dims: [w,d,h]}
//
// Point coordinates and intensities are quantized to 1e-4 on write to keep
// cluster payloads compact; all other fields round-trip exactly.

namespace detail {

inline double quantize(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace detail

inline void write_detection_row(std::ostream& out, const Detection& d, int source_agent) {
  nlohmann::json row;
  row["t"] = d.stamp.seconds;
  row["detector"] = to_string(d.detector);
  row["x"] = d.x;
  row["y"] = d.y;
  row["confidence"] = d.confidence;
  row["agent"] = source_agent;
  if (d.cluster) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : d.cluster->points.points)
      points.push_back({detail::quantize(p.x), detail::quantize(p.y), detail::quantize(p.z),
                        detail::quantize(p.intensity)});
    row["cluster"] = {{"points", std::move(points)},
                      {"bounds", {d.cluster->bounds.x, d.cluster->bounds.y, d.cluster->bounds.z}}};
  }
  out << row.dump() << '\n';
}

inline void write_detection_log_frame(std::ostream& out, const SimFrame& frame) {
  for (const auto& d : frame.upper_body) write_detection_row(out, d.detection, d.source_agent);
  for (const auto& d : frame.leg) write_detection_row(out, d.detection, d.source_agent);
  for (const auto& d : frame.clusters) write_detection_row(out, d.detection, d.source_agent);
}

inline void write_ground_truth_frame(std::ostream& out, const GroundTruthFrame& frame) {
  for (const auto& a : frame.agents) {
    nlohmann::json row;
    row["t"] = frame.stamp.seconds;
    row["agent_id"] = a.id;
    row["kind"] = to_string(a.kind);
    row["x"] = a.x;
    row["y"] = a.y;
    row["dims"] = {a.dims.x, a.dims.y, a.dims.z};
    out << row.dump() << '\n';
  }
}

struct DetectionLogFrame {
  Timestamp stamp;
  std::vector<SimDetection> upper_body;
  std::vector<SimDetection> leg;
  std::vector<SimDetection> clusters;
};

namespace detail {

inline Detection parse_detection_row(const nlohmann::json& row, int line_no, int* source_agent) {
  try {
    Detection d;
    d.stamp.seconds = row.at("t").get<double>();
    const auto det = detector_from_string(row.at("detector").get<std::string>());
    if (!det) throw Error(Errc::IoFailure, "unknown detector");
    d.detector = *det;
    d.x = row.at("x").get<double>();
    d.y = row.at("y").get<double>();
    d.confidence = clamp_confidence(row.at("confidence").get<double>());
    *source_agent = row.value("agent", -1);
    if (row.contains("cluster")) {
      const auto& c = row.at("cluster");
      PointCloud3D pc;
      for (const auto& p : c.at("points")) {
        if (p.size() != 4) throw Error(Errc::IoFailure, "point needs 4 numbers");
        pc.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(),
                             p[3].get<double>()});
      }
      d.cluster = make_cluster(std::move(pc));
      const auto& b = c.at("bounds");
      if (b.size() != 3) throw Error(Errc::IoFailure, "bounds needs 3 numbers");
      d.cluster->bounds = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
    }
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoFailure,
                "detection log line " + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace detail

inline std::vector<DetectionLogFrame> read_detection_log(std::istream& in) {
  std::vector<DetectionLogFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::IoFailure, "detection log line " + std::to_string(line_no) + ": " + e.what());
    }
    int source = -1;
    Detection d = detail::parse_detection_row(row, line_no, &source);
    if (frames.empty() || frames.back().stamp.seconds != d.stamp.seconds)
      frames.push_back({d.stamp, {}, {}, {}});
    auto& frame = frames.back();
    switch (d.detector) {
      case DetectorId::UpperBody: frame.upper_body.push_back({std::move(d), source}); break;
      case DetectorId::Leg: frame.leg.push_back({std::move(d), source}); break;
      case DetectorId::Cluster3D: frame.clusters.push_back({std::move(d), source}); break;
      default:
        throw Error(Errc::IoFailure,
                    "detection log line " + std::to_string(line_no) + ": unexpected detector");
    }
  }
  return frames;
}

inline std::vector<GroundTruthFrame> read_ground_truth_log(std::istream& in) {
  std::vector<GroundTruthFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const nlohmann::json row = nlohmann::json::parse(line);
      AgentState a;
      const double t = row.at("t").get<double>();
      a.id = row.at("agent_id").get<int>();
      const auto kind = agent_kind_from_string(row.at("kind").get<std::string>());
      if (!kind) throw Error(Errc::IoFailure, "unknown agent kind");
      a.kind = *kind;
      a.x = row.at("x").get<double>();
      a.y = row.at("y").get<double>();
      const auto& dims = row.at("dims");
      a.dims = {dims[0].get<double>(), dims[1].get<double>(), dims[2].get<double>()};
      if (frames.empty() || frames.back().stamp.seconds != t)
        frames.push_back({Timestamp{t}, {}});
      frames.back().agents.push_back(a);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::IoFailure,
                  "ground truth log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return frames;
}

}  // namespace trackforge
