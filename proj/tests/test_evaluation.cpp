#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "dancegen/dance_unit.hpp"
#include "dancegen/evaluation.hpp"

using namespace dancegen;

namespace {

std::vector<std::vector<double>> gaussian_samples(const std::vector<double>& mu,
                                                  const std::vector<double>& sigma,
                                                  int n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) v[j] = mu[j] + sigma[j] * nd(rng);
    out.push_back(std::move(v));
  }
  return out;
}

// sequences whose moving joints depend on the label: separable by a GRU
PoseSequence labeled_motion(int label, int n_frames, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.4, 0.6);
  PoseSequence seq;
  seq.frames.resize(std::size_t(n_frames));
  std::array<Point, kNumJoints> base;
  for (int j = 0; j < kNumJoints; ++j) base[std::size_t(j)] = {d(rng), d(rng)};
  for (int t = 0; t < n_frames; ++t)
    for (int j = 0; j < kNumJoints; ++j) {
      Point p = base[std::size_t(j)];
      double phase = 2.0 * std::numbers::pi * t / (8.0 + 4.0 * label);
      bool moves = (label == 0 && (j == kLWrist || j == kRWrist)) ||
                   (label == 1 && (j == kLKnee || j == kRKnee)) ||
                   (label == 2 && (j == kLElbow || j == kRAnkle));
      if (moves) {
        p.x += 0.15 * std::sin(phase);
        p.y += 0.15 * std::cos(phase);
      }
      seq.frames[std::size_t(t)].joints[j] = p;
    }
  return seq;
}

DanceUnit scripted_stop_unit() {
  DanceUnit u;
  for (int f = 0; f < kUnitLen; ++f) {
    int T = f + 1;
    int seg = T / kBeatSpacing;
    double r = double(T - seg * kBeatSpacing) / kBeatSpacing;
    double phase = (seg % 2 == 0) ? r : 1.0 - r;
    for (int j = 0; j < kNumJoints; ++j)
      u.frames[f].joints[j] = {0.3 + 0.2 * phase, 0.5 + 0.05 * (j % 3)};
  }
  return u;
}

}  // namespace

TEST_CASE("fid of a set against itself is tiny") {
  std::mt19937_64 rng(3);
  auto x = gaussian_samples({0.0, 1.0, -0.5, 0.2}, {1.0, 0.5, 2.0, 0.8}, 30, rng);
  CHECK(fid(x, x) < 1e-6);
}

TEST_CASE("fid matches the closed form for two diagonal Gaussians") {
  std::mt19937_64 rng(5);
  std::vector<double> mu1 = {0.0, 0.5, -1.0, 2.0};
  std::vector<double> s1 = {1.0, 0.7, 1.5, 0.5};
  std::vector<double> mu2 = {0.3, -0.2, 0.0, 1.0};
  std::vector<double> s2 = {0.8, 1.2, 0.6, 1.0};
  auto a = gaussian_samples(mu1, s1, 10000, rng);
  auto b = gaussian_samples(mu2, s2, 10000, rng);
  // diagonal case: ||mu1-mu2||^2 + sum(v1 + v2 - 2 sqrt(v1 v2))
  double expect = 0;
  for (std::size_t j = 0; j < mu1.size(); ++j) {
    double v1 = s1[j] * s1[j], v2 = s2[j] * s2[j];
    expect += (mu1[j] - mu2[j]) * (mu1[j] - mu2[j]) + v1 + v2 - 2.0 * std::sqrt(v1 * v2);
  }
  double got = fid(a, b);
  CHECK(std::abs(got - expect) / expect < 0.05);
}

TEST_CASE("fid is symmetric") {
  std::mt19937_64 rng(7);
  auto a = gaussian_samples({0.0, 1.0}, {1.0, 0.4}, 50, rng);
  auto b = gaussian_samples({0.5, 0.0}, {0.7, 1.1}, 50, rng);
  CHECK(std::abs(fid(a, b) - fid(b, a)) < 1e-9);
}

TEST_CASE("fid rejects bad inputs") {
  std::mt19937_64 rng(11);
  auto a = gaussian_samples({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 3, rng);  // < d+1
  auto b = gaussian_samples({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 10, rng);
  CHECK_THROWS_AS(fid(a, b), Error);
  auto c = gaussian_samples({0.0, 0.0}, {1.0, 1.0}, 10, rng);
  CHECK_THROWS_AS(fid(b, c), Error);
  CHECK_THROWS_AS(fid({}, b), Error);
}

TEST_CASE("jacobi eigendecomposition recovers known eigenvalues") {
  detail::Matrix m = {{2.0, 1.0}, {1.0, 2.0}};
  auto eig = detail::jacobi_eigen(m);
  std::sort(eig.begin(), eig.end());
  CHECK(std::abs(eig[0] - 1.0) < 1e-12);
  CHECK(std::abs(eig[1] - 3.0) < 1e-12);
}

TEST_CASE("psd square root squares back to the original") {
  detail::Matrix m = {{4.0, 2.0, 0.0}, {2.0, 5.0, 1.0}, {0.0, 1.0, 3.0}};
  auto r = detail::sqrt_psd(m);
  auto sq = detail::matmul_sq(r, r);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(sq[std::size_t(i)][std::size_t(j)] -
                                               m[std::size_t(i)][std::size_t(j)]) < 1e-9);
}

TEST_CASE("beat_scores on perfectly warped scripted stops is near 1") {
  std::vector<DanceUnit> units = {scripted_stop_unit(), scripted_stop_unit()};
  std::vector<int> mus;
  for (int i = 0; i <= 8; ++i) mus.push_back(10 * i);
  auto warped = beat_warp(units, BeatList{mus, 15});
  std::vector<std::pair<BeatList, PoseSequence>> pairs = {{BeatList{mus, 15}, warped}};
  auto scores = beat_scores(pairs, 1);
  CHECK(scores.coverage_defined);
  CHECK(scores.hit_rate_defined);
  CHECK(scores.coverage >= 0.75);
  CHECK(scores.hit_rate >= 0.95);
}

TEST_CASE("static dances have no kinematic beats and an undefined hit rate") {
  PoseSequence still;
  still.frames.resize(60);
  for (auto& f : still.frames)
    for (int j = 0; j < kNumJoints; ++j) f.joints[j] = {0.5, 0.5};
  std::vector<std::pair<BeatList, PoseSequence>> pairs = {
      {BeatList{{10, 20, 30, 40}, 15}, still}};
  auto scores = beat_scores(pairs);
  CHECK(scores.bk == 0);
  CHECK_FALSE(scores.hit_rate_defined);
  CHECK(scores.coverage == 0.0);
}

TEST_CASE("beat_scores aggregates counts before dividing") {
  // pair 1: many musical beats, few kinematic; pair 2: the reverse. The
  // sum-then-divide coverage differs from the mean of per-pair ratios.
  std::vector<DanceUnit> units = {scripted_stop_unit()};
  std::vector<int> grid;
  for (int i = 0; i <= 4; ++i) grid.push_back(10 * i);
  auto dance = beat_warp(units, BeatList{grid, 15});

  std::vector<int> dense;
  for (int i = 0; i <= 20; ++i) dense.push_back(2 * i);
  std::vector<std::pair<BeatList, PoseSequence>> pairs = {
      {BeatList{grid, 15}, dance}, {BeatList{dense, 15}, dance}};
  auto scores = beat_scores(pairs, 1);
  auto one = beat_scores({pairs[0]}, 1);
  auto two = beat_scores({pairs[1]}, 1);
  CHECK(scores.bm == one.bm + two.bm);
  CHECK(scores.bk == one.bk + two.bk);
  CHECK(scores.ba == one.ba + two.ba);
  CHECK(std::abs(scores.coverage - double(scores.bk) / double(scores.bm)) < 1e-12);
  double mean_of_ratios = 0.5 * (one.coverage + two.coverage);
  CHECK(std::abs(scores.coverage - mean_of_ratios) > 1e-6);
}

TEST_CASE("diversity of identical features is zero") {
  std::vector<std::vector<double>> feats(50, std::vector<double>{1.0, 2.0, 3.0});
  CHECK(diversity(feats) == 0.0);
}

TEST_CASE("diversity on a small set equals the brute-force all-pairs mean") {
  std::vector<std::vector<double>> feats = {
      {0.0, 0.0}, {1.0, 0.0}, {0.0, 2.0}, {3.0, 3.0}};
  double brute = 0;
  int cnt = 0;
  for (std::size_t i = 0; i < feats.size(); ++i)
    for (std::size_t j = i + 1; j < feats.size(); ++j) {
      double dx = feats[i][0] - feats[j][0], dy = feats[i][1] - feats[j][1];
      brute += std::sqrt(dx * dx + dy * dy);
      ++cnt;
    }
  brute /= cnt;
  CHECK(std::abs(diversity(feats) - brute) < 1e-12);
}

TEST_CASE("diversity is invariant to input ordering") {
  std::mt19937_64 rng(13);
  auto feats = gaussian_samples({0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, 60, rng);
  auto shuffled = feats;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(diversity(feats, 200, 9) == diversity(shuffled, 200, 9));
}

TEST_CASE("diversity rejects degenerate input") {
  CHECK_THROWS_AS(diversity({{1.0}}), Error);
}

TEST_CASE("multimodality basics") {
  std::vector<std::vector<std::vector<double>>> identical(
      3, std::vector<std::vector<double>>(5, {0.5, 0.5}));
  CHECK(multimodality(identical) == 0.0);

  std::vector<std::vector<std::vector<double>>> one_group = {
      {{0.0, 0.0}, {3.0, 4.0}, {0.0, 0.0}}};
  // pairs: (5, 5, 0) -> mean 10/3
  CHECK(std::abs(multimodality(one_group) - 10.0 / 3.0) < 1e-12);
  CHECK_THROWS_AS(multimodality({}), Error);
  CHECK_THROWS_AS(multimodality({{{1.0}}}), Error);
}

TEST_CASE("feature extractor emits the configured dimension deterministically") {
  ActionClassifier clf({}, 17);
  std::mt19937_64 rng(19);
  auto seq = labeled_motion(0, 40, rng);
  auto f1 = clf.features(seq);
  auto f2 = clf.features(seq);
  CHECK(f1.size() == 32);
  CHECK(f1 == f2);
}

TEST_CASE("feature extractor training separates the synthetic classes") {
  ActionClassifierConfig cfg;
  cfg.hidden = 16;
  cfg.feat_dim = 16;
  cfg.steps = 800;
  cfg.batch = 16;
  cfg.seed = 3;
  ActionClassifier clf(cfg, 23);
  std::mt19937_64 rng(29);
  std::vector<LabeledSequence> corpus;
  for (int i = 0; i < 60; ++i)
    corpus.push_back({labeled_motion(i % 3, 48, rng), i % 3});
  auto stats = train_feature_extractor(clf, corpus);
  CHECK(stats.train_accuracy >= 0.9);

  // held-out sequences from the same families
  int correct = 0;
  for (int i = 0; i < 12; ++i)
    if (clf.classify(labeled_motion(i % 3, 48, rng)) == i % 3) ++correct;
  CHECK(correct >= 10);
}

TEST_CASE("feature extractor training rejects single-class input") {
  ActionClassifier clf({}, 31);
  std::mt19937_64 rng(37);
  std::vector<LabeledSequence> corpus;
  for (int i = 0; i < 6; ++i) corpus.push_back({labeled_motion(1, 40, rng), 1});
  CHECK_THROWS_AS(train_feature_extractor(clf, corpus), Error);
  CHECK_THROWS_AS(train_feature_extractor(clf, {}), Error);
}

TEST_CASE("classifier checkpoint round trip") {
  ActionClassifierConfig cfg;
  cfg.hidden = 8;
  cfg.feat_dim = 8;
  ActionClassifier clf(cfg, 41);
  std::mt19937_64 rng(43);
  auto seq = labeled_motion(2, 36, rng);
  clf.save("test_eval_clf.ckpt");
  auto loaded = ActionClassifier::load("test_eval_clf.ckpt");
  CHECK(loaded.config().feat_dim == 8);
  CHECK(loaded.features(seq) == clf.features(seq));
  std::remove("test_eval_clf.ckpt");
  std::remove("test_eval_clf.ckpt.json");
}
