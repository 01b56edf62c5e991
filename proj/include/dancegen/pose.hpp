#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/error.hpp"

namespace dancegen {

inline constexpr int kNumJoints = 14;
inline constexpr int kPoseDim = 2 * kNumJoints;  // 28
inline constexpr int kDefaultFps = 15;

// Fixed joint order: nose, neck, L/R shoulder, L/R elbow, L/R wrist,
// L/R hip, L/R knee, L/R ankle.
enum Joint {
  kNose = 0, kNeck,
  kLShoulder, kRShoulder,
  kLElbow, kRElbow,
  kLWrist, kRWrist,
  kLHip, kRHip,
  kLKnee, kRKnee,
  kLAnkle, kRAnkle,
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double c, Point p) { return {c * p.x, c * p.y}; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }

/// A 14-joint 2-D skeleton in normalized image coordinates.
struct Pose {
  std::array<Point, kNumJoints> joints{};
  std::array<bool, kNumJoints> missing{};  // true = originally undetected

  bool any_missing() const {
    for (bool m : missing)
      if (m) return true;
    return false;
  }
};

struct PoseSequence {
  std::vector<Pose> frames;
  int fps = kDefaultFps;

  std::size_t size() const { return frames.size(); }
};

inline constexpr int kUnitLen = 32;       // frames per dance unit
inline constexpr int kBeatsPerUnit = 4;   // beats at frames 8, 16, 24, 32 (1-based)
inline constexpr int kBeatSpacing = 8;

/// A temporally normalized 32-frame snippet with beats at fixed positions.
/// Frame j (0-based) sits at normalized time j+1; normalized time 0 is the
/// virtual start anchor shared with the previous unit's last frame.
struct DanceUnit {
  std::array<Pose, kUnitLen> frames{};

  static std::array<int, kBeatsPerUnit> beat_positions() {
    return {kBeatSpacing, 2 * kBeatSpacing, 3 * kBeatSpacing, 4 * kBeatSpacing};
  }
};

/// Linear interpolation of missing joints between nearest observed neighbors
/// in time; leading/trailing gaps filled by nearest-value extension.
inline PoseSequence fill_missing(const PoseSequence& seq) {
  PoseSequence out = seq;
  const std::size_t n = seq.frames.size();
  for (int j = 0; j < kNumJoints; ++j) {
    std::vector<std::size_t> obs;
    for (std::size_t t = 0; t < n; ++t)
      if (!seq.frames[t].missing[j]) obs.push_back(t);
    if (obs.empty())
      throw insufficient_error("joint " + std::to_string(j) +
                               " missing in all frames");
    for (std::size_t t = 0; t < n; ++t) {
      if (!seq.frames[t].missing[j]) continue;
      // nearest observed neighbors around t
      auto it = std::lower_bound(obs.begin(), obs.end(), t);
      if (it == obs.begin()) {
        out.frames[t].joints[j] = seq.frames[obs.front()].joints[j];
      } else if (it == obs.end()) {
        out.frames[t].joints[j] = seq.frames[obs.back()].joints[j];
      } else {
        std::size_t hi = *it, lo = *(it - 1);
        double w = double(t - lo) / double(hi - lo);
        out.frames[t].joints[j] =
            (1.0 - w) * seq.frames[lo].joints[j] + w * seq.frames[hi].joints[j];
      }
      out.frames[t].missing[j] = false;
    }
  }
  return out;
}

inline Pose shift_pose(const Pose& p, Point delta) {
  Pose out = p;
  for (auto& j : out.joints) j = j + delta;
  return out;
}

/// Translate every joint of every frame by delta; beat positions unchanged.
inline DanceUnit spatial_shift(const DanceUnit& u, Point delta) {
  DanceUnit out;
  for (int t = 0; t < kUnitLen; ++t) out.frames[t] = shift_pose(u.frames[t], delta);
  return out;
}

/// 28-dim per-frame vectorization in fixed joint order: (x0,y0,x1,y1,...).
inline std::array<double, kPoseDim> flatten_pose(const Pose& p) {
  std::array<double, kPoseDim> v{};
  for (int j = 0; j < kNumJoints; ++j) {
    v[2 * j] = p.joints[j].x;
    v[2 * j + 1] = p.joints[j].y;
  }
  return v;
}

inline Pose unflatten_pose(const double* v) {
  Pose p;
  for (int j = 0; j < kNumJoints; ++j) {
    p.joints[j].x = v[2 * j];
    p.joints[j].y = v[2 * j + 1];
  }
  return p;
}

inline std::vector<std::array<double, kPoseDim>> flatten(const DanceUnit& u) {
  std::vector<std::array<double, kPoseDim>> out(kUnitLen);
  for (int t = 0; t < kUnitLen; ++t) out[t] = flatten_pose(u.frames[t]);
  return out;
}

inline DanceUnit unflatten(const std::vector<std::array<double, kPoseDim>>& v) {
  if (v.size() != kUnitLen)
    throw contract_error("unflatten: expected 32 frames, got " +
                         std::to_string(v.size()));
  DanceUnit u;
  for (int t = 0; t < kUnitLen; ++t) u.frames[t] = unflatten_pose(v[t].data());
  return u;
}

// ---------------------------------------------------------------------------
// Pose file format: one-line header {"fps": int}, then one JSON object per
// line: {"frame": int, "joints": [[x,y] x14], "missing": [bool x14] (optional)}.

inline void save_pose_jsonl(const PoseSequence& seq, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  f << nlohmann::json{{"fps", seq.fps}}.dump() << "\n";
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const Pose& p = seq.frames[t];
    nlohmann::json joints = nlohmann::json::array();
    for (const auto& pt : p.joints) joints.push_back({pt.x, pt.y});
    nlohmann::json obj{{"frame", t}, {"joints", joints}};
    if (p.any_missing()) {
      nlohmann::json miss = nlohmann::json::array();
      for (bool m : p.missing) miss.push_back(m);
      obj["missing"] = miss;
    }
    f << obj.dump() << "\n";
  }
}

inline PoseSequence load_pose_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw bad_input_error("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line))
    throw bad_input_error("empty pose file: " + path);
  PoseSequence seq;
  try {
    auto header = nlohmann::json::parse(line);
    seq.fps = header.at("fps").get<int>();
    if (seq.fps <= 0) throw bad_input_error("fps must be positive: " + path);
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto obj = nlohmann::json::parse(line);
      const auto& joints = obj.at("joints");
      if (joints.size() != kNumJoints)
        throw bad_input_error("expected 14 joints in " + path);
      Pose p;
      for (int j = 0; j < kNumJoints; ++j) {
        p.joints[j].x = joints[j][0].get<double>();
        p.joints[j].y = joints[j][1].get<double>();
        if (!std::isfinite(p.joints[j].x) || !std::isfinite(p.joints[j].y))
          throw bad_input_error("non-finite coordinate in " + path);
      }
      if (obj.contains("missing")) {
        const auto& miss = obj["missing"];
        for (int j = 0; j < kNumJoints; ++j) p.missing[j] = miss[j].get<bool>();
      }
      seq.frames.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw bad_input_error("malformed pose file " + path + ": " + e.what());
  }
  return seq;
}

}  // namespace dancegen
