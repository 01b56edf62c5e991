#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <random>

#include "dancegen/dance_unit.hpp"
#include "dancegen/kinematic_beat.hpp"

using namespace dancegen;

namespace {

// piecewise-linear motion with kinks exactly at the given beat frames
PoseSequence piecewise_linear_sequence(const std::vector<int>& beats, int n_frames,
                                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.2, 0.8);
  // random waypoints at beats (and at endpoints), linear in between
  std::vector<int> knots;
  knots.push_back(0);
  for (int b : beats)
    if (b > 0 && b < n_frames - 1) knots.push_back(b);
  knots.push_back(n_frames - 1);

  PoseSequence seq;
  seq.frames.resize(std::size_t(n_frames));
  for (int j = 0; j < kNumJoints; ++j) {
    std::vector<Point> wp(knots.size());
    for (auto& p : wp) p = {d(rng), d(rng)};
    for (std::size_t k = 0; k + 1 < knots.size(); ++k)
      for (int t = knots[k]; t <= knots[k + 1]; ++t) {
        double w = knots[k + 1] == knots[k]
                       ? 0.0
                       : double(t - knots[k]) / double(knots[k + 1] - knots[k]);
        seq.frames[std::size_t(t)].joints[j] = (1.0 - w) * wp[k] + w * wp[k + 1];
      }
  }
  return seq;
}

double max_joint_err(const Pose& a, const Pose& b) {
  double e = 0;
  for (int j = 0; j < kNumJoints; ++j) {
    e = std::max(e, std::abs(a.joints[j].x - b.joints[j].x));
    e = std::max(e, std::abs(a.joints[j].y - b.joints[j].y));
  }
  return e;
}

}  // namespace

TEST_CASE("segment with 8-frame beat spacing copies source frames") {
  std::mt19937_64 rng(3);
  std::vector<int> beats = {4, 12, 20, 28, 36};
  auto seq = piecewise_linear_sequence(beats, 45, rng);
  auto units = segment(seq, BeatList{beats, 15});
  REQUIRE(units.size() == 1);
  for (int f = 0; f < kUnitLen; ++f)
    CHECK(max_joint_err(units[0].frames[f], seq.frames[std::size_t(4 + f + 1)]) < 1e-12);
}

TEST_CASE("segment counts: 13 beats give exactly 3 units") {
  std::mt19937_64 rng(5);
  std::vector<int> beats;
  for (int i = 0; i < 13; ++i) beats.push_back(2 + 9 * i);
  auto seq = piecewise_linear_sequence(beats, 130, rng);
  auto units = segment(seq, BeatList{beats, 15});
  CHECK(units.size() == 3);
}

TEST_CASE("segment rejects fewer than 5 beats") {
  std::mt19937_64 rng(7);
  std::vector<int> beats = {4, 12, 20, 28};
  auto seq = piecewise_linear_sequence(beats, 40, rng);
  CHECK_THROWS_AS(segment(seq, BeatList{beats, 15}), Error);
}

TEST_CASE("segment at 16-frame spacing downsamples linear motion exactly") {
  std::mt19937_64 rng(11);
  std::vector<int> beats = {0, 16, 32, 48, 64};
  auto seq = piecewise_linear_sequence(beats, 70, rng);
  auto units = segment(seq, BeatList{beats, 15});
  REQUIRE(units.size() == 1);
  // each resampled joint lies exactly on the source line: unit frame f sits
  // at source frame 2*(f+1)
  for (int f = 0; f < kUnitLen; ++f)
    CHECK(max_joint_err(units[0].frames[f], seq.frames[std::size_t(2 * (f + 1))]) < 1e-9);
}

TEST_CASE("unit count times 32 equals total normalized frames") {
  std::mt19937_64 rng(13);
  std::vector<int> beats;
  for (int i = 0; i < 9; ++i) beats.push_back(3 + 7 * i);
  auto seq = piecewise_linear_sequence(beats, 70, rng);
  auto units = segment(seq, BeatList{beats, 15});
  CHECK(units.size() == 2);
  CHECK(int(units.size()) * kUnitLen == 64);
}

TEST_CASE("beat_warp with 8-frame musical spacing is plain concatenation") {
  std::mt19937_64 rng(17);
  std::vector<int> beats = {0, 8, 16, 24, 32, 40, 48, 56, 64};
  auto seq = piecewise_linear_sequence(beats, 70, rng);
  auto units = segment(seq, BeatList{beats, 15});
  REQUIRE(units.size() == 2);
  auto out = beat_warp(units, BeatList{beats, 15});
  REQUIRE(out.frames.size() == 65);
  for (int f = 1; f <= 64; ++f)
    CHECK(max_joint_err(out.frames[std::size_t(f)],
                        units[std::size_t((f - 1) / kUnitLen)].frames[(f - 1) % kUnitLen]) < 1e-9);
}

TEST_CASE("beat_warp stretches linear motion onto a wider grid") {
  std::mt19937_64 rng(19);
  std::vector<int> src_beats = {0, 8, 16, 24, 32};
  auto seq = piecewise_linear_sequence(src_beats, 40, rng);
  auto units = segment(seq, BeatList{src_beats, 15});
  REQUIRE(units.size() == 1);
  std::vector<int> wide = {0, 12, 24, 36, 48};
  auto out = beat_warp(units, BeatList{wide, 15});
  CHECK(out.frames.size() == 49);  // 1.5x the 32-frame input span
  // anchors sample the unit beat frames exactly
  for (int k = 1; k <= 4; ++k)
    CHECK(max_joint_err(out.frames[std::size_t(wide[std::size_t(k)])],
                        units[0].frames[8 * k - 1]) < 1e-12);
  // between beats, motion is linearly stretched: midpoint of each span
  for (int k = 0; k < 4; ++k) {
    Pose mid;
    const Pose& a = out.frames[std::size_t(wide[std::size_t(k)])];
    const Pose& b = out.frames[std::size_t(wide[std::size_t(k) + 1])];
    for (int j = 0; j < kNumJoints; ++j)
      mid.joints[j] = 0.5 * (a.joints[j] + b.joints[j]);
    CHECK(max_joint_err(out.frames[std::size_t(wide[std::size_t(k)] + 6)], mid) < 1e-9);
  }
}

TEST_CASE("segment then beat_warp reconstructs piecewise-linear sources") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    std::uniform_int_distribution<int> gap(5, 14);
    std::vector<int> beats;
    int f = 0;
    for (int i = 0; i < 9; ++i) {
      beats.push_back(f);
      f += gap(rng);
    }
    int n_frames = beats.back() + 5;
    auto seq = piecewise_linear_sequence(beats, n_frames, rng);
    auto units = segment(seq, BeatList{beats, 15});
    REQUIRE(units.size() == 2);
    auto out = beat_warp(units, BeatList{beats, 15});
    REQUIRE(int(out.frames.size()) == beats.back() + 1);
    for (int t = beats.front(); t <= beats.back(); ++t)
      CHECK(max_joint_err(out.frames[std::size_t(t)], seq.frames[std::size_t(t)]) < 1e-6);
  }
}

TEST_CASE("beat_warp rejects too few musical beats") {
  std::mt19937_64 rng(29);
  std::vector<int> beats = {0, 8, 16, 24, 32};
  auto seq = piecewise_linear_sequence(beats, 40, rng);
  auto units = segment(seq, BeatList{beats, 15});
  CHECK_THROWS_AS(beat_warp(units, BeatList{{0, 10, 20}, 15}), Error);
}

TEST_CASE("warped scripted stops land on target musical beats") {
  // units whose joints reverse direction exactly at normalized beat frames
  std::vector<DanceUnit> units(2);
  auto pose_at = [](double phase) {
    Pose p;
    for (int j = 0; j < kNumJoints; ++j) p.joints[j] = {0.3 + 0.2 * phase, 0.5};
    return p;
  };
  for (int ui = 0; ui < 2; ++ui)
    for (int f = 0; f < kUnitLen; ++f) {
      int T = f + 1;
      // triangle wave with extrema at normalized times 0, 8, 16, 24, 32
      int seg = T / kBeatSpacing;
      double r = double(T - seg * kBeatSpacing) / kBeatSpacing;
      double phase = (seg % 2 == 0) ? r : 1.0 - r;
      units[std::size_t(ui)].frames[f] = pose_at(phase);
    }
  std::vector<int> mus;
  for (int i = 0; i <= 8; ++i) mus.push_back(11 * i);
  auto out = beat_warp(units, BeatList{mus, 15});
  auto kin = detect_kinematic_beats(out);
  auto [bm, bk, ba] = match_beats(kin, BeatList{mus, 15}, 1);
  REQUIRE(bk > 0);
  CHECK(double(ba) / double(bk) == 1.0);
}

TEST_CASE("unit corpus jsonl round trip") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<DanceUnit> units(3);
  for (auto& u : units)
    for (auto& f : u.frames)
      for (auto& j : f.joints) j = {d(rng), d(rng)};
  save_units_jsonl(units, "test_src", "test_units_rt.jsonl");
  auto loaded = load_units_jsonl("test_units_rt.jsonl");
  REQUIRE(loaded.size() == units.size());
  for (std::size_t i = 0; i < units.size(); ++i)
    for (int f = 0; f < kUnitLen; ++f)
      CHECK(max_joint_err(loaded[i].frames[f], units[i].frames[f]) < 1e-12);
  std::remove("test_units_rt.jsonl");
}
