#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <tuple>
#include <vector>

#include "dancegen/audio.hpp"
#include "dancegen/error.hpp"
#include "dancegen/pose.hpp"

namespace dancegen {

/// Per-(frame, angle-bin) summed motion magnitudes. Row t describes the
/// displacement from frame t to t+1 of the source sequence.
struct MotionAngleMatrix {
  std::vector<std::vector<double>> D;
  int n_bins = 8;
};

inline MotionAngleMatrix motion_angle_matrix(const PoseSequence& seq, int n_bins = 8) {
  if (seq.frames.size() < 2)
    throw insufficient_error("motion_angle_matrix: need >= 2 frames");
  if (n_bins < 1) throw contract_error("n_bins must be positive");
  MotionAngleMatrix m;
  m.n_bins = n_bins;
  m.D.assign(seq.frames.size() - 1, std::vector<double>(std::size_t(n_bins), 0.0));
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    for (int j = 0; j < kNumJoints; ++j) {
      Point d = seq.frames[t].joints[j] - seq.frames[t - 1].joints[j];
      double mag = norm(d);
      if (mag == 0.0) continue;  // zero displacement falls in no bin
      double ang = std::atan2(d.y, d.x);
      if (ang < 0) ang += 2.0 * std::numbers::pi;
      int bin = std::min(n_bins - 1, int(ang / (2.0 * std::numbers::pi) * n_bins));
      m.D[t - 1][std::size_t(bin)] += mag;
    }
  }
  return m;
}

/// Per-frame offset strength: min over bins of D_diff(t, theta). Strongly
/// negative where motion in some direction collapses (stop or reversal).
inline std::vector<double> offset_strength(const MotionAngleMatrix& m) {
  if (m.D.size() < 2)
    throw insufficient_error("offset_strength: need >= 2 rows");
  std::vector<double> s(m.D.size(), 0.0);
  for (std::size_t t = 1; t < m.D.size(); ++t) {
    double mn = 0.0;
    for (int b = 0; b < m.n_bins; ++b)
      mn = std::min(mn, m.D[t][std::size_t(b)] - m.D[t - 1][std::size_t(b)]);
    s[t] = mn;
  }
  return s;
}

struct KinematicBeatConfig {
  std::optional<double> tau;  // absolute threshold; adaptive when unset
  double tau_scale = 0.5;     // adaptive: tau = tau_scale * stddev of negative minima
  int suppress_w = 4;         // non-maximum suppression window (frames)
};

/// Thresholded deceleration detector with non-maximum suppression. Beat frame
/// indices refer to the original pose sequence.
inline BeatList kinematic_beats(const MotionAngleMatrix& m, int fps,
                                const KinematicBeatConfig& cfg = {}) {
  auto s = offset_strength(m);
  double tau;
  if (cfg.tau) {
    tau = *cfg.tau;
  } else {
    double acc = 0;
    int cnt = 0;
    for (double v : s)
      if (v < 0) {
        acc += v * v;
        ++cnt;
      }
    tau = cnt > 0 ? cfg.tau_scale * std::sqrt(acc / cnt) : 0.0;
    if (tau < 1e-12) tau = 0.0;  // rounding noise, not motion
  }

  // candidates: s(t) < -tau; NMS keeps the strongest within suppress_w
  std::vector<std::pair<int, double>> cands;
  for (std::size_t t = 1; t < s.size(); ++t)
    if (s[t] < -tau && tau > 0) cands.push_back({int(t), s[t]});
  std::sort(cands.begin(), cands.end(),
            [](auto& a, auto& b) { return a.second < b.second; });
  std::vector<int> kept;
  for (auto& [t, v] : cands) {
    bool ok = true;
    for (int k : kept)
      if (std::abs(k - t) < cfg.suppress_w) {
        ok = false;
        break;
      }
    if (ok) kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end());
  // row t of D covers displacement into frame t+1; report pose-frame indices
  for (int& t : kept) t += 1;
  return BeatList{std::move(kept), fps};
}

inline BeatList detect_kinematic_beats(const PoseSequence& seq, int n_bins = 8,
                                       const KinematicBeatConfig& cfg = {}) {
  return kinematic_beats(motion_angle_matrix(seq, n_bins), seq.fps, cfg);
}

/// (B_m, B_k, B_a): musical beat count, kinematic beat count, and kinematic
/// beats aligned within +-tol frames (greedy left-to-right, each musical beat
/// used at most once).
inline std::tuple<int, int, int> match_beats(const BeatList& kin,
                                             const BeatList& mus, int tol) {
  if (kin.fps != mus.fps)
    throw contract_error("match_beats: fps mismatch");
  int aligned = 0;
  std::size_t mi = 0;
  for (int k : kin.beats) {
    while (mi < mus.beats.size() && mus.beats[mi] < k - tol) ++mi;
    if (mi < mus.beats.size() && std::abs(mus.beats[mi] - k) <= tol) {
      ++aligned;
      ++mi;
    }
  }
  return {int(mus.beats.size()), int(kin.beats.size()), aligned};
}

/// CSV dump of the per-frame direction-binned difference for plotting:
/// frame, bin_0..bin_{n-1}.
inline void save_ddiff_csv(const MotionAngleMatrix& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  f << "frame";
  for (int b = 0; b < m.n_bins; ++b) f << ",bin_" << b;
  f << "\n";
  for (std::size_t t = 1; t < m.D.size(); ++t) {
    f << t + 1;
    for (int b = 0; b < m.n_bins; ++b)
      f << "," << m.D[t][std::size_t(b)] - m.D[t - 1][std::size_t(b)];
    f << "\n";
  }
}

}  // namespace dancegen
