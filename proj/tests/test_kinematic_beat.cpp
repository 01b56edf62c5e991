#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dancegen/kinematic_beat.hpp"

using namespace dancegen;

namespace {

PoseSequence base_sequence(int n) {
  PoseSequence seq;
  seq.frames.resize(std::size_t(n));
  for (auto& f : seq.frames)
    for (int j = 0; j < kNumJoints; ++j) f.joints[j] = {0.5, 0.5};
  return seq;
}

PoseSequence random_sequence(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  PoseSequence seq;
  seq.frames.resize(std::size_t(n));
  for (auto& f : seq.frames)
    for (int j = 0; j < kNumJoints; ++j) f.joints[j] = {d(rng), d(rng)};
  return seq;
}

// brute force: loop joints x frames, quantize atan2 into bins
std::vector<std::vector<double>> brute_force_D(const PoseSequence& seq, int n_bins) {
  std::vector<std::vector<double>> D(seq.frames.size() - 1,
                                     std::vector<double>(std::size_t(n_bins), 0.0));
  for (std::size_t t = 1; t < seq.frames.size(); ++t)
    for (int j = 0; j < kNumJoints; ++j) {
      double dx = seq.frames[t].joints[j].x - seq.frames[t - 1].joints[j].x;
      double dy = seq.frames[t].joints[j].y - seq.frames[t - 1].joints[j].y;
      double mag = std::sqrt(dx * dx + dy * dy);
      if (mag == 0.0) continue;
      double ang = std::atan2(dy, dx);
      if (ang < 0) ang += 2 * std::numbers::pi;
      int bin = std::min(n_bins - 1, int(ang / (2 * std::numbers::pi) * n_bins));
      D[t - 1][std::size_t(bin)] += mag;
    }
  return D;
}

}  // namespace

TEST_CASE("motion_angle_matrix of a static sequence is all zero") {
  auto seq = base_sequence(10);
  auto m = motion_angle_matrix(seq, 8);
  REQUIRE(m.D.size() == 9);
  for (auto& row : m.D)
    for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("motion_angle_matrix puts rightward motion in the angle-0 bin") {
  auto seq = base_sequence(6);
  for (std::size_t t = 0; t < seq.frames.size(); ++t)
    seq.frames[t].joints[kLWrist].x = 0.1 + 0.1 * double(t);
  auto m = motion_angle_matrix(seq, 8);
  for (auto& row : m.D) {
    CHECK(row[0] == Catch::Approx(0.1));
    for (int b = 1; b < 8; ++b) CHECK(row[std::size_t(b)] == 0.0);
  }
}

TEST_CASE("motion_angle_matrix matches the brute-force oracle") {
  std::mt19937_64 rng(17);
  auto seq = random_sequence(20, rng);
  for (int n_bins : {4, 8, 16}) {
    auto m = motion_angle_matrix(seq, n_bins);
    auto ref = brute_force_D(seq, n_bins);
    for (std::size_t t = 0; t < ref.size(); ++t)
      for (int b = 0; b < n_bins; ++b)
        CHECK(m.D[t][std::size_t(b)] == Catch::Approx(ref[t][std::size_t(b)]).margin(1e-12));
  }
}

TEST_CASE("motion_angle_matrix rejects short sequences") {
  auto seq = base_sequence(1);
  CHECK_THROWS_AS(motion_angle_matrix(seq, 8), Error);
}

TEST_CASE("row sums of D equal total per-frame motion magnitude") {
  std::mt19937_64 rng(23);
  auto seq = random_sequence(15, rng);
  auto m = motion_angle_matrix(seq, 8);
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    double total = 0;
    for (int j = 0; j < kNumJoints; ++j)
      total += norm(seq.frames[t].joints[j] - seq.frames[t - 1].joints[j]);
    double row = 0;
    for (double v : m.D[t - 1]) row += v;
    CHECK(row == Catch::Approx(total).margin(1e-9));
  }
}

TEST_CASE("D is invariant under a global spatial shift of the sequence") {
  std::mt19937_64 rng(29);
  auto seq = random_sequence(12, rng);
  auto shifted = seq;
  for (auto& f : shifted.frames)
    for (auto& j : f.joints) j = j + Point{0.13, -0.07};
  auto a = motion_angle_matrix(seq, 8);
  auto b = motion_angle_matrix(shifted, 8);
  for (std::size_t t = 0; t < a.D.size(); ++t)
    for (int k = 0; k < 8; ++k)
      CHECK(a.D[t][std::size_t(k)] == Catch::Approx(b.D[t][std::size_t(k)]).margin(1e-12));
}

TEST_CASE("scaling coordinates by c scales D by c and preserves beats when tau scales") {
  std::mt19937_64 rng(31);
  auto seq = random_sequence(30, rng);
  const double c = 3.7;
  auto scaled = seq;
  for (auto& f : scaled.frames)
    for (auto& j : f.joints) j = {c * j.x, c * j.y};
  auto a = motion_angle_matrix(seq, 8);
  auto b = motion_angle_matrix(scaled, 8);
  for (std::size_t t = 0; t < a.D.size(); ++t)
    for (int k = 0; k < 8; ++k)
      CHECK(b.D[t][std::size_t(k)] == Catch::Approx(c * a.D[t][std::size_t(k)]).margin(1e-9));

  KinematicBeatConfig cfg_a;
  cfg_a.tau = 0.01;
  KinematicBeatConfig cfg_b;
  cfg_b.tau = 0.01 * c;
  auto beats_a = kinematic_beats(a, 15, cfg_a);
  auto beats_b = kinematic_beats(b, 15, cfg_b);
  CHECK(beats_a.beats == beats_b.beats);
}

TEST_CASE("constant-velocity motion yields no beats") {
  auto seq = base_sequence(20);
  for (std::size_t t = 0; t < seq.frames.size(); ++t)
    for (int j = 0; j < kNumJoints; ++j)
      seq.frames[t].joints[j].x = 0.1 + 0.02 * double(t);
  auto beats = detect_kinematic_beats(seq);
  CHECK(beats.beats.empty());
}

TEST_CASE("a scripted stop produces exactly one beat at the stop frame") {
  auto seq = base_sequence(20);
  // 0.1/frame for 10 frames then frozen
  for (std::size_t t = 0; t < seq.frames.size(); ++t)
    seq.frames[t].joints[kRWrist].x = 0.1 * double(std::min<std::size_t>(t, 10));
  auto beats = detect_kinematic_beats(seq);
  REQUIRE(beats.beats.size() == 1);
  CHECK(std::abs(beats.beats[0] - 10) <= 1);
}

TEST_CASE("a 180 degree reversal at constant speed produces one beat") {
  auto seq = base_sequence(24);
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    double x = t <= 12 ? 0.02 * double(t) : 0.02 * double(24 - t);
    seq.frames[t].joints[kLAnkle].x = 0.1 + x;
    seq.frames[t].joints[kLWrist].x = 0.1 + x;
  }
  auto beats = detect_kinematic_beats(seq);
  REQUIRE(beats.beats.size() == 1);
  CHECK(std::abs(beats.beats[0] - 12) <= 1);
}

TEST_CASE("kinematic beat list is strictly increasing with gaps >= suppress_w") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> d(-0.03, 0.03);
  auto seq = base_sequence(120);
  double x = 0.5;
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    x += d(rng);
    for (int j = 0; j < kNumJoints; ++j)
      seq.frames[t].joints[j].x = x + 0.01 * j;
  }
  KinematicBeatConfig cfg;
  auto beats = detect_kinematic_beats(seq, 8, cfg);
  for (std::size_t i = 1; i < beats.beats.size(); ++i)
    CHECK(beats.beats[i] - beats.beats[i - 1] >= cfg.suppress_w);
}

TEST_CASE("match_beats on identical lists gives full coverage and hit rate") {
  BeatList a{{5, 13, 21, 30}, 15};
  auto [bm, bk, ba] = match_beats(a, a, 2);
  CHECK(bm == 4);
  CHECK(bk == 4);
  CHECK(ba == 4);
}

TEST_CASE("match_beats beyond tolerance hits nothing") {
  BeatList mus{{10, 20, 30}, 15};
  BeatList kin{{13, 23, 33}, 15};
  auto [bm, bk, ba] = match_beats(kin, mus, 2);
  CHECK(bm == 3);
  CHECK(bk == 3);
  CHECK(ba == 0);
}

TEST_CASE("match_beats fps mismatch is rejected") {
  BeatList a{{1, 5}, 15};
  BeatList b{{1, 5}, 30};
  CHECK_THROWS_AS(match_beats(a, b, 2), Error);
}

TEST_CASE("greedy matching equals the exhaustive optimum on small instances") {
  // exhaustive oracle: maximum bipartite matching by brute force over
  // musical-beat subsets (instances <= 10 beats)
  auto optimal = [](const std::vector<int>& kin, const std::vector<int>& mus, int tol) {
    int best = 0;
    std::function<void(std::size_t, std::vector<bool>&, int)> rec =
        [&](std::size_t ki, std::vector<bool>& used, int acc) {
          best = std::max(best, acc);
          if (ki == kin.size()) return;
          rec(ki + 1, used, acc);  // leave kin[ki] unmatched
          for (std::size_t mi = 0; mi < mus.size(); ++mi)
            if (!used[mi] && std::abs(kin[ki] - mus[mi]) <= tol) {
              used[mi] = true;
              rec(ki + 1, used, acc + 1);
              used[mi] = false;
            }
        };
    std::vector<bool> used(mus.size(), false);
    rec(0, used, 0);
    return best;
  };

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    // min inter-beat gap 6, tol 2 <= gap/2: greedy must equal optimal
    std::uniform_int_distribution<int> gap(6, 12);
    std::uniform_int_distribution<int> count(1, 8);
    std::uniform_int_distribution<int> jit(-3, 3);
    std::vector<int> mus;
    int f = 5;
    for (int i = count(rng); i > 0; --i) {
      mus.push_back(f);
      f += gap(rng);
    }
    std::vector<int> kin;
    f = 3;
    for (int i = count(rng); i > 0; --i) {
      kin.push_back(f);
      f += gap(rng);
    }
    auto [bm, bk, ba] = match_beats(BeatList{kin, 15}, BeatList{mus, 15}, 2);
    CHECK(ba == optimal(kin, mus, 2));
  }
}
