#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/audio.hpp"
#include "dancegen/error.hpp"
#include "dancegen/pose.hpp"

namespace dancegen {

namespace detail {

// Linear sample of a pose sequence at a real-valued frame index.
inline Pose sample_pose(const std::vector<Pose>& frames, double t) {
  if (t <= 0) return frames.front();
  if (t >= double(frames.size() - 1)) return frames.back();
  std::size_t lo = std::size_t(t);
  double w = t - double(lo);
  Pose out;
  for (int j = 0; j < kNumJoints; ++j)
    out.joints[j] = (1.0 - w) * frames[lo].joints[j] + w * frames[lo + 1].joints[j];
  return out;
}

}  // namespace detail

/// Cut consecutive 5-beat windows (stride 4, shared boundary beat) and
/// resample each inter-beat span to 8 frames. Unit frame j sits at
/// normalized time j+1; time 0 is the window's first beat.
inline std::vector<DanceUnit> segment(const PoseSequence& seq, const BeatList& kin) {
  const std::size_t need = kBeatsPerUnit + 1;
  if (kin.beats.size() < need)
    throw insufficient_error("segment: need >= 5 kinematic beats, got " +
                             std::to_string(kin.beats.size()));
  std::vector<DanceUnit> units;
  for (std::size_t w = 0; w + need <= kin.beats.size(); w += kBeatsPerUnit) {
    DanceUnit u;
    for (int f = 0; f < kUnitLen; ++f) {
      int T = f + 1;  // normalized time
      int k = (T - 1) / kBeatSpacing;
      double r = double(T - k * kBeatSpacing) / kBeatSpacing;
      double src = double(kin.beats[w + std::size_t(k)]) +
                   r * double(kin.beats[w + std::size_t(k) + 1] - kin.beats[w + std::size_t(k)]);
      u.frames[f] = detail::sample_pose(seq.frames, src);
    }
    units.push_back(u);
  }
  return units;
}

/// Piecewise-linear retiming of concatenated units so that normalized beat
/// times {8, 16, ..., 32n} land on the given musical beats. Accepts either
/// 4n+1 beats (first beat doubles as the start anchor) or 4n beats (anchor
/// extrapolated one inter-beat gap before the first). Frames before the
/// anchor hold the initial pose so output indices stay on the music's grid.
inline PoseSequence beat_warp(const std::vector<DanceUnit>& units, const BeatList& mus) {
  const int n = int(units.size());
  if (n == 0) throw insufficient_error("beat_warp: no units");
  const int n_anchor = 4 * n + 1;
  std::vector<int> anchors;
  if (int(mus.beats.size()) >= n_anchor) {
    anchors.assign(mus.beats.begin(), mus.beats.begin() + n_anchor);
  } else if (int(mus.beats.size()) >= n_anchor - 1) {
    anchors.push_back(std::max(0, 2 * mus.beats[0] - mus.beats[1]));
    anchors.insert(anchors.end(), mus.beats.begin(), mus.beats.begin() + (n_anchor - 1));
    if (anchors[0] >= anchors[1])
      throw contract_error("beat_warp: degenerate anchor extrapolation");
  } else {
    throw insufficient_error("beat_warp: need >= " + std::to_string(n_anchor - 1) +
                             " musical beats, got " + std::to_string(mus.beats.size()));
  }

  // value of the concatenated normalized signal at time T in [0, 32n]
  auto sample_normalized = [&](double T) -> Pose {
    auto at = [&](int j) -> const Pose& {  // j in 1..32n
      return units[std::size_t((j - 1) / kUnitLen)].frames[(j - 1) % kUnitLen];
    };
    const int last = kUnitLen * n;
    if (T >= double(last)) return at(last);
    if (T <= 1.0) {
      // linear extrapolation through the first two frames covers the
      // virtual anchor span exactly for piecewise-linear motion
      Pose p;
      for (int j = 0; j < kNumJoints; ++j)
        p.joints[j] = at(1).joints[j] + (T - 1.0) * (at(2).joints[j] - at(1).joints[j]);
      return p;
    }
    int lo = int(T);
    double w = T - lo;
    if (lo >= last) return at(last);
    Pose p;
    for (int j = 0; j < kNumJoints; ++j)
      p.joints[j] = (1.0 - w) * at(lo).joints[j] + w * at(lo + 1).joints[j];
    return p;
  };

  PoseSequence out;
  out.fps = mus.fps;
  out.frames.resize(std::size_t(anchors.back()) + 1);
  for (int f = 0; f <= anchors.back(); ++f) {
    double T;
    if (f <= anchors.front()) {
      T = 0.0;
    } else {
      int k = 0;
      while (k + 2 < int(anchors.size()) && anchors[std::size_t(k) + 1] <= f) ++k;
      T = kBeatSpacing * (double(k) + double(f - anchors[std::size_t(k)]) /
                                           double(anchors[std::size_t(k) + 1] - anchors[std::size_t(k)]));
    }
    out.frames[std::size_t(f)] = sample_normalized(T);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Unit corpus file: JSON lines, one object per unit.

inline void save_units_jsonl(const std::vector<DanceUnit>& units,
                             const std::string& source, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  for (std::size_t i = 0; i < units.size(); ++i) {
    nlohmann::json frames = nlohmann::json::array();
    for (const auto& p : units[i].frames) {
      nlohmann::json joints = nlohmann::json::array();
      for (const auto& pt : p.joints) joints.push_back({pt.x, pt.y});
      frames.push_back(joints);
    }
    nlohmann::json obj{{"unit_id", i},
                       {"frames", frames},
                       {"source", source},
                       {"beat_positions", DanceUnit::beat_positions()}};
    f << obj.dump() << "\n";
  }
}

inline std::vector<DanceUnit> load_units_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw bad_input_error("cannot open: " + path);
  std::vector<DanceUnit> units;
  std::string line;
  try {
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      auto obj = nlohmann::json::parse(line);
      const auto& frames = obj.at("frames");
      if (frames.size() != kUnitLen)
        throw bad_input_error("unit with wrong frame count in " + path);
      DanceUnit u;
      for (int t = 0; t < kUnitLen; ++t) {
        for (int j = 0; j < kNumJoints; ++j) {
          u.frames[t].joints[j].x = frames[t][j][0].get<double>();
          u.frames[t].joints[j].y = frames[t][j][1].get<double>();
        }
      }
      units.push_back(u);
    }
  } catch (const nlohmann::json::exception& e) {
    throw bad_input_error("malformed unit file " + path + ": " + e.what());
  }
  return units;
}

}  // namespace dancegen
