#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "trackforge/core.hpp"

namespace trackforge {

enum class AgentKind : std::uint8_t { Walker, Stander, Sitter, Clutter };

inline const char* to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Walker: return "walker";
    case AgentKind::Stander: return "stander";
    case AgentKind::Sitter: return "sitter";
    case AgentKind::Clutter: return "clutter";
  }
  return "?";
}

inline std::optional<AgentKind> agent_kind_from_string(std::string_view s) {
  if (s == "walker") return AgentKind::Walker;
  if (s == "stander") return AgentKind::Stander;
  if (s == "sitter") return AgentKind::Sitter;
  if (s == "clutter") return AgentKind::Clutter;
  return std::nullopt;
}

inline bool is_human(AgentKind k) { return k != AgentKind::Clutter; }

struct Agent {
  AgentKind kind = AgentKind::Stander;
  std::vector<std::pair<double, double>> waypoints;  // walkers loop over these
  double speed = 0.0;
  Vec3 dims{0.5, 0.4, 1.7};
  bool random_dims = false;  // clutter: draw dims at scenario setup
};

struct SensorModel {
  double fov_deg = 360.0;
  double min_range = 0.1;
  double max_range = 20.0;
  double detect_prob = 0.9;
  // Optional per-kind overrides; negative means "use detect_prob".
  double detect_prob_walker = -1.0;
  double detect_prob_stander = -1.0;
  double detect_prob_sitter = -1.0;
  double false_pos_rate = 0.0;  // expected false positives per frame
  double position_noise_std = 0.05;

  double prob_for(AgentKind k) const {
    const double o = k == AgentKind::Walker    ? detect_prob_walker
                     : k == AgentKind::Stander ? detect_prob_stander
                     : k == AgentKind::Sitter  ? detect_prob_sitter
                                               : -1.0;
    return o >= 0.0 ? o : detect_prob;
  }
};

// Synthetic 3D cluster generation knobs. Human-like volume bounds are used
// when drawing random clutter dims.
struct ClusterSynthesis {
  double points_at_2m = 150.0;
  int min_points = 10;
  int max_points = 250;
  double dim_noise_std = 0.02;  // truncated at +-0.05 m
  Vec3 human_volume_min{0.2, 0.2, 0.2};
  Vec3 human_volume_max{1.0, 1.0, 2.0};
  double clutter_outside_prob = 0.7;
};

struct ScenarioConfig {
  double duration = 60.0;
  double frame_rate = 10.0;
  std::uint64_t seed = 1;
  double robot_x = 0.0, robot_y = 0.0, robot_yaw = 0.0;  // radians
  double sensor_height = 0.8;
  // Paper-literal mode: every static detection reports exactly 0.5.
  bool literal_confidence = false;
  SensorModel upper_body{58.0, 0.5, 5.0, 0.8, -1, -1, -1, 0.0, 0.05};
  SensorModel leg{270.0, 0.1, 15.0, 0.7, -1, -1, -1, 0.0, 0.05};
  SensorModel cluster3d{360.0, 0.5, 20.0, 0.95, -1, -1, -1, 0.0, 0.05};
  ClusterSynthesis synthesis;
  double ub_conf_base = 0.95, ub_conf_slope = 0.08, ub_conf_floor = 0.55;
  double leg_confidence = 0.6;
  std::vector<Agent> agents;

  Vec3 sensor_origin() const { return {robot_x, robot_y, sensor_height}; }
};

// Deterministic RNG helpers built on a single engine so every stochastic
// draw of a run pulls from one stream in a fixed order. Normal and Poisson
// draws are implemented directly to stay independent of library internals.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed) : engine_(seed) {}

  std::mt19937_64& engine() { return engine_; }

  double unit() {
    return (engine_() >> 11) * 0x1.0p-53;  // [0,1)
  }
  double uniform(double a, double b) { return a + (b - a) * unit(); }
  bool bernoulli(double p) { return unit() < p; }
  double normal(double std_dev) {
    const double u1 = std::max(unit(), 1e-300);
    const double u2 = unit();
    return std_dev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  double truncated_normal(double std_dev, double bound) {
    return std::clamp(normal(std_dev), -bound, bound);
  }
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= unit();
    } while (p > limit);
    return k - 1;
  }
  int uniform_int(int n) { return std::min(n - 1, static_cast<int>(unit() * n)); }

 private:
  std::mt19937_64 engine_;
};

struct AgentState {
  int id = 0;
  AgentKind kind = AgentKind::Stander;
  double x = 0.0, y = 0.0, vx = 0.0, vy = 0.0;
  Vec3 dims;
};

struct GroundTruthFrame {
  Timestamp stamp;
  std::vector<AgentState> agents;
};

namespace detail {

inline std::pair<AgentState, bool> agent_pose_at(const Agent& a, int id, double t) {
  AgentState s;
  s.id = id;
  s.kind = a.kind;
  s.dims = a.dims;
  if (a.waypoints.empty()) return {s, false};
  s.x = a.waypoints[0].first;
  s.y = a.waypoints[0].second;
  // Walkers and dynamic clutter follow their loop; standers and sitters are
  // stationary regardless of other fields.
  const bool moves = a.speed > 0.0 && a.waypoints.size() >= 2 &&
                     (a.kind == AgentKind::Walker || a.kind == AgentKind::Clutter);
  if (!moves) return {s, true};
  // Closed polyline loop traversed at constant speed; pose is a pure
  // function of t.
  std::vector<double> seg_len;
  double total = 0.0;
  const std::size_t n = a.waypoints.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = a.waypoints[i];
    const auto& q = a.waypoints[(i + 1) % n];
    const double len = std::hypot(q.first - p.first, q.second - p.second);
    seg_len.push_back(len);
    total += len;
  }
  if (total <= 0.0) return {s, true};
  double dist = std::fmod(a.speed * t, total);
  for (std::size_t i = 0; i < n; ++i) {
    if (dist <= seg_len[i] || i == n - 1) {
      const auto& p = a.waypoints[i];
      const auto& q = a.waypoints[(i + 1) % n];
      const double f = seg_len[i] > 0 ? dist / seg_len[i] : 0.0;
      s.x = p.first + f * (q.first - p.first);
      s.y = p.second + f * (q.second - p.second);
      if (seg_len[i] > 0) {
        s.vx = a.speed * (q.first - p.first) / seg_len[i];
        s.vy = a.speed * (q.second - p.second) / seg_len[i];
      }
      break;
    }
    dist -= seg_len[i];
  }
  return {s, true};
}

}  // namespace detail

// Advances agent poses to time t. Walkers (and moving clutter) follow their
// waypoint loop at constant speed; everything else is stationary.
inline GroundTruthFrame step_world(const ScenarioConfig& cfg, double t) {
  GroundTruthFrame frame;
  frame.stamp = Timestamp{t};
  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    auto [state, ok] = detail::agent_pose_at(cfg.agents[i], static_cast<int>(i), t);
    if (ok) frame.agents.push_back(state);
  }
  return frame;
}

struct SimDetection {
  Detection detection;
  int source_agent = -1;  // -1 flags a false positive
};

struct SimFrame {
  GroundTruthFrame truth;
  std::vector<SimDetection> upper_body;
  std::vector<SimDetection> leg;
  std::vector<SimDetection> clusters;  // detections carry cluster payloads
};

namespace detail {

inline double wrap_angle(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

inline bool in_sensor_view(const ScenarioConfig& cfg, const SensorModel& sensor, double x,
                           double y, double* range_out) {
  const double dx = x - cfg.robot_x;
  const double dy = y - cfg.robot_y;
  const double range = std::hypot(dx, dy);
  if (range_out) *range_out = range;
  if (range < sensor.min_range || range > sensor.max_range) return false;
  if (sensor.fov_deg < 360.0) {
    const double bearing = wrap_angle(std::atan2(dy, dx) - cfg.robot_yaw);
    if (std::abs(bearing) > sensor.fov_deg * M_PI / 360.0) return false;
  }
  return true;
}

inline Vec3 draw_clutter_dims(const ClusterSynthesis& syn, SimRng& rng) {
  const Vec3& lo = syn.human_volume_min;
  const Vec3& hi = syn.human_volume_max;
  Vec3 d{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
  if (rng.bernoulli(syn.clutter_outside_prob)) {
    const int axis = rng.uniform_int(3);
    const bool low_side = rng.bernoulli(0.5);
    double* v = axis == 0 ? &d.x : axis == 1 ? &d.y : &d.z;
    const double amin = axis == 0 ? lo.x : axis == 1 ? lo.y : lo.z;
    const double amax = axis == 0 ? hi.x : axis == 1 ? hi.y : hi.z;
    *v = low_side ? rng.uniform(0.05, amin - 0.01) : rng.uniform(amax + 0.05, amax + 1.0);
  }
  return d;
}

}  // namespace detail

// Samples a synthetic cluster for a target: uniform points in the body box,
// rescaled per axis so the bounds match the observed dims exactly; point
// density falls with range; intensity is bimodal for humans and uniform for
// clutter so the classes are learnable.
inline Cluster synthesize_cluster(AgentKind kind, double cx, double cy, const Vec3& observed_dims,
                                  double range, const ClusterSynthesis& syn, SimRng& rng) {
  const double scale = 2.0 / std::max(range, 0.5);
  const int n = std::clamp(static_cast<int>(std::lround(syn.points_at_2m * scale * scale)),
                           syn.min_points, syn.max_points);
  PointCloud3D pc;
  pc.points.resize(n);
  for (auto& p : pc.points) {
    p.x = rng.unit();
    p.y = rng.unit();
    p.z = rng.unit();
    if (kind != AgentKind::Clutter) {
      const bool hi = rng.bernoulli(0.5);
      p.intensity = std::clamp((hi ? 0.75 : 0.35) + rng.normal(0.08), 0.0, 1.0);
    } else {
      p.intensity = rng.unit();
    }
  }
  // Normalize each axis to span exactly the observed extent.
  for (int axis = 0; axis < 3; ++axis) {
    const auto get = [axis](Point3& p) -> double& { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; };
    double lo = 1.0, hi = 0.0;
    for (auto& p : pc.points) {
      lo = std::min(lo, get(p));
      hi = std::max(hi, get(p));
    }
    const double span = std::max(hi - lo, 1e-12);
    const double extent = axis == 0 ? observed_dims.x : axis == 1 ? observed_dims.y : observed_dims.z;
    const double base = axis == 0 ? cx - extent / 2.0 : axis == 1 ? cy - extent / 2.0 : 0.0;
    for (auto& p : pc.points) get(p) = base + (get(p) - lo) / span * extent;
  }
  return make_cluster(std::move(pc));
}

// Generates one frame's detections. Draw order is fixed: upper body, leg,
// then 3D clusters; per sensor, agents in index order, then false positives.
inline SimFrame sense(const GroundTruthFrame& truth, const ScenarioConfig& cfg, SimRng& rng) {
  SimFrame frame;
  frame.truth = truth;

  const auto static_detector = [&](const SensorModel& sensor, DetectorId id,
                                   std::vector<SimDetection>& out) {
    for (const auto& agent : truth.agents) {
      if (!is_human(agent.kind)) continue;  // static detectors fire on humans only
      double range = 0.0;
      if (!detail::in_sensor_view(cfg, sensor, agent.x, agent.y, &range)) continue;
      if (!rng.bernoulli(sensor.prob_for(agent.kind))) continue;
      Detection d;
      d.stamp = truth.stamp;
      d.detector = id;
      d.x = agent.x + rng.normal(sensor.position_noise_std);
      d.y = agent.y + rng.normal(sensor.position_noise_std);
      if (cfg.literal_confidence) {
        d.confidence = 0.5;
      } else if (id == DetectorId::UpperBody) {
        d.confidence = std::clamp(cfg.ub_conf_base - cfg.ub_conf_slope * range, cfg.ub_conf_floor,
                                  cfg.ub_conf_base);
      } else {
        d.confidence = cfg.leg_confidence;
      }
      d.confidence = clamp_confidence(d.confidence);
      out.push_back({d, agent.id});
    }
    const int n_fp = rng.poisson(sensor.false_pos_rate);
    for (int k = 0; k < n_fp; ++k) {
      const double bearing = cfg.robot_yaw + rng.uniform(-1.0, 1.0) * sensor.fov_deg * M_PI / 360.0;
      const double range = rng.uniform(sensor.min_range, sensor.max_range);
      Detection d;
      d.stamp = truth.stamp;
      d.detector = id;
      d.x = cfg.robot_x + range * std::cos(bearing);
      d.y = cfg.robot_y + range * std::sin(bearing);
      if (cfg.literal_confidence) {
        d.confidence = 0.5;
      } else if (id == DetectorId::UpperBody) {
        d.confidence = std::clamp(cfg.ub_conf_base - cfg.ub_conf_slope * range, cfg.ub_conf_floor,
                                  cfg.ub_conf_base);
      } else {
        d.confidence = cfg.leg_confidence;
      }
      d.confidence = clamp_confidence(d.confidence);
      out.push_back({d, -1});
    }
  };

  static_detector(cfg.upper_body, DetectorId::UpperBody, frame.upper_body);
  static_detector(cfg.leg, DetectorId::Leg, frame.leg);

  // 3D cluster proposals are class-agnostic: all agents and clutter.
  for (const auto& agent : truth.agents) {
    double range = 0.0;
    if (!detail::in_sensor_view(cfg, cfg.cluster3d, agent.x, agent.y, &range)) continue;
    if (!rng.bernoulli(cfg.cluster3d.prob_for(agent.kind))) continue;
    Detection d;
    d.stamp = truth.stamp;
    d.detector = DetectorId::Cluster3D;
    d.x = agent.x + rng.normal(cfg.cluster3d.position_noise_std);
    d.y = agent.y + rng.normal(cfg.cluster3d.position_noise_std);
    d.confidence = 0.5;  // replaced by the current classifier at ingestion
    Vec3 dims = agent.dims;
    dims.x = std::max(0.05, dims.x + rng.truncated_normal(cfg.synthesis.dim_noise_std, 0.05));
    dims.y = std::max(0.05, dims.y + rng.truncated_normal(cfg.synthesis.dim_noise_std, 0.05));
    dims.z = std::max(0.05, dims.z + rng.truncated_normal(cfg.synthesis.dim_noise_std, 0.05));
    d.cluster = synthesize_cluster(agent.kind, d.x, d.y, dims, range, cfg.synthesis, rng);
    frame.clusters.push_back({std::move(d), agent.id});
  }
  const int n_fp = rng.poisson(cfg.cluster3d.false_pos_rate);
  for (int k = 0; k < n_fp; ++k) {
    const double bearing = rng.uniform(-M_PI, M_PI);
    const double range = rng.uniform(cfg.cluster3d.min_range, cfg.cluster3d.max_range);
    Detection d;
    d.stamp = truth.stamp;
    d.detector = DetectorId::Cluster3D;
    d.x = cfg.robot_x + range * std::cos(bearing);
    d.y = cfg.robot_y + range * std::sin(bearing);
    d.confidence = 0.5;
    const Vec3 dims = detail::draw_clutter_dims(cfg.synthesis, rng);
    d.cluster = synthesize_cluster(AgentKind::Clutter, d.x, d.y, dims, range, cfg.synthesis, rng);
    frame.clusters.push_back({std::move(d), -1});
  }
  return frame;
}

// Resolves `dims = random` clutter agents with the run RNG. Must run once,
// before any frame is generated, so the draw order is fixed.
inline void resolve_random_dims(ScenarioConfig& cfg, SimRng& rng) {
  for (auto& a : cfg.agents) {
    if (a.random_dims) {
      a.dims = detail::draw_clutter_dims(cfg.synthesis, rng);
      a.random_dims = false;
    }
  }
}

// Drives a scenario: one seeded generator, frames at t = i / frame_rate for
// i in [0, duration * frame_rate).
class Simulator {
 public:
  explicit Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    resolve_random_dims(cfg_, rng_);
    total_frames_ = static_cast<long>(std::lround(cfg_.duration * cfg_.frame_rate));
  }

  const ScenarioConfig& config() const { return cfg_; }
  long total_frames() const { return total_frames_; }

  std::optional<SimFrame> next() {
    if (frame_ >= total_frames_) return std::nullopt;
    const double t = static_cast<double>(frame_) / cfg_.frame_rate;
    ++frame_;
    return sense(step_world(cfg_, t), cfg_, rng_);
  }

 private:
  ScenarioConfig cfg_;
  SimRng rng_;
  long frame_ = 0;
  long total_frames_ = 0;
};

// Zeroes every noise source: detection misses, position noise, and false
// positives. Dim noise is kept (bounds still reflect true dims closely).
inline ScenarioConfig make_noiseless(ScenarioConfig cfg) {
  for (SensorModel* s : {&cfg.upper_body, &cfg.leg, &cfg.cluster3d}) {
    s->detect_prob = 1.0;
    s->detect_prob_walker = s->detect_prob_stander = s->detect_prob_sitter = -1.0;
    s->false_pos_rate = 0.0;
    s->position_noise_std = 0.0;
  }
  return cfg;
}

// --- scenario file parsing ----------------------------------------------
//
// Plain-text key = value lines with [section] headers; '#' starts a comment.
// Sections: [robot], [sensor upper_body|leg|cluster3d], [synthesis], and one
// [agent] per agent. Unknown keys are rejected.

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v, int line) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw Error(Errc::BadScenario, "line " + std::to_string(line) + ": bad number '" + v + "'");
  }
  if (used != v.size())
    throw Error(Errc::BadScenario, "line " + std::to_string(line) + ": bad number '" + v + "'");
  return d;
}

inline bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(Errc::BadScenario, "line " + std::to_string(line) + ": bad bool '" + v + "'");
}

inline std::vector<double> parse_numbers(const std::string& v, int line) {
  std::vector<double> out;
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) out.push_back(parse_double(tok, line));
  return out;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(std::istream& in) {
  ScenarioConfig cfg;
  std::string section;
  SensorModel* sensor = nullptr;
  Agent* agent = nullptr;
  std::string line;
  int line_no = 0;

  const auto fail = [&](const std::string& msg) -> void {
    throw Error(Errc::BadScenario, "line " + std::to_string(line_no) + ": " + msg);
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      sensor = nullptr;
      agent = nullptr;
      if (section == "robot" || section == "synthesis") {
        // handled by key dispatch
      } else if (section.rfind("sensor ", 0) == 0) {
        const std::string name = detail::trim(section.substr(7));
        if (name == "upper_body")
          sensor = &cfg.upper_body;
        else if (name == "leg")
          sensor = &cfg.leg;
        else if (name == "cluster3d")
          sensor = &cfg.cluster3d;
        else
          fail("unknown sensor '" + name + "'");
      } else if (section == "agent") {
        cfg.agents.emplace_back();
        agent = &cfg.agents.back();
      } else {
        fail("unknown section '" + section + "'");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (section.empty()) {
      if (key == "duration")
        cfg.duration = detail::parse_double(value, line_no);
      else if (key == "frame_rate")
        cfg.frame_rate = detail::parse_double(value, line_no);
      else if (key == "seed")
        cfg.seed = static_cast<std::uint64_t>(detail::parse_double(value, line_no));
      else if (key == "literal_confidence")
        cfg.literal_confidence = detail::parse_bool(value, line_no);
      else
        fail("unknown key '" + key + "'");
    } else if (section == "robot") {
      if (key == "x")
        cfg.robot_x = detail::parse_double(value, line_no);
      else if (key == "y")
        cfg.robot_y = detail::parse_double(value, line_no);
      else if (key == "yaw_deg")
        cfg.robot_yaw = detail::parse_double(value, line_no) * M_PI / 180.0;
      else if (key == "sensor_height")
        cfg.sensor_height = detail::parse_double(value, line_no);
      else
        fail("unknown key '" + key + "'");
    } else if (sensor) {
      if (key == "fov_deg")
        sensor->fov_deg = detail::parse_double(value, line_no);
      else if (key == "min_range")
        sensor->min_range = detail::parse_double(value, line_no);
      else if (key == "max_range")
        sensor->max_range = detail::parse_double(value, line_no);
      else if (key == "detect_prob")
        sensor->detect_prob = detail::parse_double(value, line_no);
      else if (key == "detect_prob_walker")
        sensor->detect_prob_walker = detail::parse_double(value, line_no);
      else if (key == "detect_prob_stander")
        sensor->detect_prob_stander = detail::parse_double(value, line_no);
      else if (key == "detect_prob_sitter")
        sensor->detect_prob_sitter = detail::parse_double(value, line_no);
      else if (key == "false_pos_rate")
        sensor->false_pos_rate = detail::parse_double(value, line_no);
      else if (key == "position_noise_std")
        sensor->position_noise_std = detail::parse_double(value, line_no);
      else if (key == "confidence" && sensor == &cfg.leg)
        cfg.leg_confidence = detail::parse_double(value, line_no);
      else if (key == "confidence_base" && sensor == &cfg.upper_body)
        cfg.ub_conf_base = detail::parse_double(value, line_no);
      else if (key == "confidence_slope" && sensor == &cfg.upper_body)
        cfg.ub_conf_slope = detail::parse_double(value, line_no);
      else if (key == "confidence_floor" && sensor == &cfg.upper_body)
        cfg.ub_conf_floor = detail::parse_double(value, line_no);
      else
        fail("unknown key '" + key + "'");
    } else if (section == "synthesis") {
      if (key == "points_at_2m")
        cfg.synthesis.points_at_2m = detail::parse_double(value, line_no);
      else if (key == "min_points")
        cfg.synthesis.min_points = static_cast<int>(detail::parse_double(value, line_no));
      else if (key == "max_points")
        cfg.synthesis.max_points = static_cast<int>(detail::parse_double(value, line_no));
      else if (key == "dim_noise_std")
        cfg.synthesis.dim_noise_std = detail::parse_double(value, line_no);
      else
        fail("unknown key '" + key + "'");
    } else if (agent) {
      if (key == "kind") {
        const auto k = agent_kind_from_string(value);
        if (!k) fail("unknown agent kind '" + value + "'");
        agent->kind = *k;
      } else if (key == "speed") {
        agent->speed = detail::parse_double(value, line_no);
      } else if (key == "dims") {
        if (value == "random") {
          agent->random_dims = true;
        } else {
          const auto d = detail::parse_numbers(value, line_no);
          if (d.size() != 3) fail("dims needs three numbers");
          agent->dims = {d[0], d[1], d[2]};
        }
      } else if (key == "position") {
        const auto p = detail::parse_numbers(value, line_no);
        if (p.size() != 2) fail("position needs two numbers");
        agent->waypoints = {{p[0], p[1]}};
      } else if (key == "waypoints") {
        agent->waypoints.clear();
        std::string rest = value;
        std::size_t pos = 0;
        while (pos <= rest.size()) {
          const auto bar = rest.find('|', pos);
          const std::string part =
              detail::trim(rest.substr(pos, bar == std::string::npos ? std::string::npos : bar - pos));
          if (!part.empty()) {
            const auto p = detail::parse_numbers(part, line_no);
            if (p.size() != 2) fail("each waypoint needs two numbers");
            agent->waypoints.emplace_back(p[0], p[1]);
          }
          if (bar == std::string::npos) break;
          pos = bar + 1;
        }
        if (agent->waypoints.empty()) fail("waypoints list is empty");
      } else {
        fail("unknown key '" + key + "'");
      }
    } else {
      fail("key outside a known section");
    }
  }

  if (cfg.duration <= 0) throw Error(Errc::BadScenario, "duration must be positive");
  if (cfg.frame_rate <= 0) throw Error(Errc::BadScenario, "frame_rate must be positive");
  for (const auto& a : cfg.agents)
    if (a.waypoints.empty())
      throw Error(Errc::BadScenario, "every agent needs a position or waypoints");
  return cfg;
}

inline ScenarioConfig parse_scenario_string(const std::string& text) {
  std::istringstream ss(text);
  return parse_scenario(ss);
}

}  // namespace trackforge
