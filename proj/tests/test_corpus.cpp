#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "dancegen/corpus.hpp"
#include "dancegen/kinematic_beat.hpp"

using namespace dancegen;
namespace fs = std::filesystem;

namespace {

double beat_recall(const BeatList& detected, const BeatList& truth, int tol) {
  int hit = 0;
  for (int g : truth.beats) {
    for (int d : detected.beats)
      if (std::abs(d - g) <= tol) {
        ++hit;
        break;
      }
  }
  return truth.beats.empty() ? 0.0 : double(hit) / double(truth.beats.size());
}

}  // namespace

TEST_CASE("gen_pair validates its ranges") {
  CHECK_THROWS_AS(gen_pair("A", 50.0, 6.0, 1), Error);
  CHECK_THROWS_AS(gen_pair("A", 200.0, 6.0, 1), Error);
  CHECK_THROWS_AS(gen_pair("A", 120.0, 3.0, 1), Error);
  CHECK_THROWS_AS(gen_pair("A", 120.0, 12.0, 1), Error);
  CHECK_THROWS_AS(gen_pair("D", 120.0, 6.0, 1), Error);
}

TEST_CASE("gen_pair is deterministic per seed") {
  auto a = gen_pair("B", 110.0, 7.0, 42);
  auto b = gen_pair("B", 110.0, 7.0, 42);
  auto c = gen_pair("B", 110.0, 7.0, 43);
  CHECK(a.beats.beats == b.beats.beats);
  CHECK(a.audio.samples == b.audio.samples);
  REQUIRE(a.dance.frames.size() == b.dance.frames.size());
  bool same = true, diff_seed_same = true;
  for (std::size_t t = 0; t < a.dance.frames.size(); ++t)
    for (int j = 0; j < kNumJoints; ++j) {
      if (a.dance.frames[t].joints[j].x != b.dance.frames[t].joints[j].x) same = false;
      if (t < c.dance.frames.size() &&
          a.dance.frames[t].joints[j].x != c.dance.frames[t].joints[j].x)
        diff_seed_same = false;
    }
  CHECK(same);
  CHECK_FALSE(diff_seed_same);
}

TEST_CASE("pair geometry: frames, beats and features line up") {
  auto p = gen_pair("A", 120.0, 8.0, 7);
  CHECK(p.dance.fps == 15);
  CHECK(p.dance.frames.size() == 120);
  CHECK(p.afeat.frames.size() == p.dance.frames.size());
  // 120 BPM at 15 fps: a beat every 7.5 frames
  REQUIRE(p.beats.beats.size() >= 4);
  for (std::size_t i = 0; i < p.beats.beats.size(); ++i)
    CHECK(std::abs(p.beats.beats[i] - 7.5 * double(i + 1)) <= 0.5 + 1e-9);
}

TEST_CASE("kinematic beats recover the scripted grid for every style") {
  for (const auto& style : corpus_styles()) {
    for (int trial = 0; trial < 5; ++trial) {
      std::mt19937_64 rng(std::uint64_t(trial) * 131 + 17);
      std::uniform_real_distribution<double> bpm(60.0, 180.0);
      std::uniform_real_distribution<double> dur(5.0, 10.0);
      auto p = gen_pair(style, bpm(rng), dur(rng), rng());
      auto detected = detect_kinematic_beats(p.dance);
      INFO("style " << style << " trial " << trial);
      CHECK(beat_recall(detected, p.beats, 1) >= 0.9);
    }
  }
}

TEST_CASE("music beat tracking recovers the click grid") {
  for (int trial = 0; trial < 5; ++trial) {
    std::mt19937_64 rng(std::uint64_t(trial) * 977 + 5);
    std::uniform_real_distribution<double> bpm(70.0, 170.0);
    auto p = gen_pair("C", bpm(rng), 8.0, rng());
    auto onset = onset_envelope_at_fps(p.audio, 15);
    auto tracked = track_music_beats(onset, 15);
    INFO("trial " << trial);
    CHECK(beat_recall(tracked, p.beats, 1) >= 0.9);
  }
}

TEST_CASE("style carriers separate the pooled audio spectra") {
  auto a = gen_pair("A", 100.0, 6.0, 3);
  auto b = gen_pair("B", 100.0, 6.0, 3);
  auto c = gen_pair("C", 100.0, 6.0, 3);
  auto pool = [](const AudioFeatureSequence& f) {
    std::vector<double> out(std::size_t(kAudioFeatDim), 0.0);
    for (const auto& fr : f.frames)
      for (int k = 0; k < kAudioFeatDim; ++k) out[std::size_t(k)] += fr[std::size_t(k)];
    for (double& v : out) v /= double(f.frames.size());
    return out;
  };
  auto dist = [](const std::vector<double>& x, const std::vector<double>& y) {
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(acc);
  };
  auto pa = pool(a.afeat), pb = pool(b.afeat), pc = pool(c.afeat);
  CHECK(dist(pa, pb) > 1.0);
  CHECK(dist(pa, pc) > 1.0);
  CHECK(dist(pb, pc) > 1.0);
}

TEST_CASE("gen_corpus writes a balanced, reloadable corpus") {
  const std::string dir = "test_corpus_dir";
  fs::remove_all(dir);
  auto entries = gen_corpus(dir, 2, 99);
  CHECK(entries.size() == 6);

  auto items = load_corpus(dir);
  REQUIRE(items.size() == 6);
  std::map<std::string, int> counts;
  for (const auto& it : items) counts[it.style]++;
  CHECK(counts["A"] == 2);
  CHECK(counts["B"] == 2);
  CHECK(counts["C"] == 2);
  for (const auto& it : items) {
    CHECK(it.dance.frames.size() >= 75);
    CHECK(it.afeat.frames.size() == it.dance.frames.size());
    CHECK(it.beats.beats.size() >= 2);
  }
  // every manifest entry's files exist
  for (const auto& e : entries) {
    CHECK(fs::exists(e.poses_path));
    CHECK(fs::exists(e.afeat_path));
    CHECK(fs::exists(e.beats_path));
  }
  fs::remove_all(dir);
}

TEST_CASE("gen_corpus is byte-identical across reruns with one seed") {
  const std::string d1 = "test_corpus_r1", d2 = "test_corpus_r2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  gen_corpus(d1, 1, 123);
  gen_corpus(d2, 1, 123);
  for (const auto& style : corpus_styles()) {
    for (const auto& suffix : {".poses.jsonl", ".afeat.json", ".beats.json"}) {
      auto p1 = fs::path(d1) / style / (style + "_000" + suffix);
      auto p2 = fs::path(d2) / style / (style + "_000" + suffix);
      std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
      std::string s1((std::istreambuf_iterator<char>(f1)), {});
      std::string s2((std::istreambuf_iterator<char>(f2)), {});
      CHECK(s1 == s2);
      CHECK_FALSE(s1.empty());
    }
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("pose jsonl round trip preserves generated dances exactly") {
  auto p = gen_pair("C", 90.0, 5.5, 11);
  save_pose_jsonl(p.dance, "test_corpus_rt.jsonl");
  auto loaded = load_pose_jsonl("test_corpus_rt.jsonl");
  REQUIRE(loaded.frames.size() == p.dance.frames.size());
  for (std::size_t t = 0; t < loaded.frames.size(); ++t)
    for (int j = 0; j < kNumJoints; ++j) {
      CHECK(loaded.frames[t].joints[j].x == p.dance.frames[t].joints[j].x);
      CHECK(loaded.frames[t].joints[j].y == p.dance.frames[t].joints[j].y);
    }
  fs::remove("test_corpus_rt.jsonl");
}
