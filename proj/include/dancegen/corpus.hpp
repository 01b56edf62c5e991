#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/audio.hpp"
#include "dancegen/error.hpp"
#include "dancegen/pose.hpp"

namespace dancegen {

struct CorpusConfig {
  int fps = kDefaultFps;
  int sample_rate = 22050;
  double bpm_min = 60.0;
  double bpm_max = 180.0;
  double dur_min = 5.0;
  double dur_max = 10.0;
  double amp = 0.10;  // base motion amplitude, jittered per pair

  nlohmann::json to_json() const {
    return {{"fps", fps},         {"sample_rate", sample_rate},
            {"bpm_min", bpm_min}, {"bpm_max", bpm_max},
            {"dur_min", dur_min}, {"dur_max", dur_max},
            {"amp", amp}};
  }
};

inline const std::vector<std::string>& corpus_styles() {
  static const std::vector<std::string> styles = {"A", "B", "C"};
  return styles;
}

struct SynthPair {
  std::string style;
  int label = 0;
  PoseSequence dance;
  AudioClip audio;
  AudioFeatureSequence afeat;
  BeatList beats;  // shared ground truth for music and motion
};

namespace detail {

/// Canonical standing skeleton in image coordinates (y grows downward).
inline std::array<Point, kNumJoints> base_skeleton() {
  std::array<Point, kNumJoints> s{};
  s[kNose] = {0.50, 0.20};
  s[kNeck] = {0.50, 0.30};
  s[kLShoulder] = {0.42, 0.30};
  s[kRShoulder] = {0.58, 0.30};
  s[kLElbow] = {0.38, 0.42};
  s[kRElbow] = {0.62, 0.42};
  s[kLWrist] = {0.36, 0.54};
  s[kRWrist] = {0.64, 0.54};
  s[kLHip] = {0.45, 0.55};
  s[kRHip] = {0.55, 0.55};
  s[kLKnee] = {0.44, 0.72};
  s[kRKnee] = {0.56, 0.72};
  s[kLAnkle] = {0.44, 0.90};
  s[kRAnkle] = {0.56, 0.90};
  return s;
}

/// Triangle phase over the beat grid: 0 at even anchors, 1 at odd anchors,
/// linear in between. Every beat is a velocity reversal for moving joints.
inline double triangle_phase(int t, const std::vector<int>& anchors) {
  if (anchors.size() < 2) return 0.0;
  std::size_t k = 0;
  while (k + 2 < anchors.size() && t >= anchors[k + 1]) ++k;
  int a = anchors[k], b = anchors[k + 1];
  double r;
  if (t <= a)
    r = 0.0;
  else if (t >= b)
    r = 1.0;
  else
    r = double(t - a) / double(b - a);
  return (k % 2 == 0) ? r : 1.0 - r;
}

}  // namespace detail

/// One paired sample: a parametric dance in one of three style families plus
/// click-and-tone audio sharing the same beat grid.
inline SynthPair gen_pair(const std::string& style, double bpm, double duration_s,
                          std::uint64_t seed, const CorpusConfig& cfg = {}) {
  int label = -1;
  for (std::size_t i = 0; i < corpus_styles().size(); ++i)
    if (corpus_styles()[i] == style) label = int(i);
  if (label < 0) throw bad_input_error("unknown style: " + style);
  if (bpm < cfg.bpm_min || bpm > cfg.bpm_max)
    throw bad_input_error("tempo outside [" + std::to_string(cfg.bpm_min) + ", " +
                          std::to_string(cfg.bpm_max) + "] BPM");
  if (duration_s < cfg.dur_min || duration_s > cfg.dur_max)
    throw bad_input_error("duration outside [" + std::to_string(cfg.dur_min) + ", " +
                          std::to_string(cfg.dur_max) + "] s");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.02, 0.02);
  std::uniform_real_distribution<double> amp_jitter(0.8, 1.2);

  const int n_frames = int(std::lround(duration_s * cfg.fps));
  const double period = cfg.fps * 60.0 / bpm;  // frames per beat

  SynthPair out;
  out.style = style;
  out.label = label;
  out.beats.fps = cfg.fps;
  for (int i = 1;; ++i) {
    int bf = int(std::lround(i * period));
    if (bf > n_frames - 3) break;
    out.beats.beats.push_back(bf);
  }
  if (out.beats.beats.size() < 2)
    throw bad_input_error("tempo/duration combination yields too few beats");

  // phase anchors: frame 0 plus every beat
  std::vector<int> anchors;
  anchors.push_back(0);
  for (int b : out.beats.beats) anchors.push_back(b);

  auto base = detail::base_skeleton();
  for (auto& p : base) {
    p.x += jitter(rng);
    p.y += jitter(rng);
  }
  const double amp = cfg.amp * amp_jitter(rng);

  out.dance.fps = cfg.fps;
  out.dance.frames.resize(std::size_t(n_frames));
  for (int t = 0; t < n_frames; ++t) {
    double ph = detail::triangle_phase(t, anchors);
    double inv = 1.0 - ph;
    Pose& pose = out.dance.frames[std::size_t(t)];
    pose.joints = base;
    switch (label) {
      case 0:  // alternating lateral arm raises
        pose.joints[kLElbow] = pose.joints[kLElbow] + Point{-0.4 * amp * ph, -0.6 * amp * ph};
        pose.joints[kLWrist] = pose.joints[kLWrist] + Point{-0.7 * amp * ph, -1.3 * amp * ph};
        pose.joints[kRElbow] = pose.joints[kRElbow] + Point{0.4 * amp * inv, -0.6 * amp * inv};
        pose.joints[kRWrist] = pose.joints[kRWrist] + Point{0.7 * amp * inv, -1.3 * amp * inv};
        break;
      case 1:  // periodic squats: whole body sinks, knees flare
        for (int j : {kNose, kNeck, kLShoulder, kRShoulder, kLElbow, kRElbow, kLWrist,
                      kRWrist, kLHip, kRHip})
          pose.joints[j] = pose.joints[j] + Point{0.0, 0.9 * amp * ph};
        pose.joints[kLKnee] = pose.joints[kLKnee] + Point{-0.5 * amp * ph, 0.3 * amp * ph};
        pose.joints[kRKnee] = pose.joints[kRKnee] + Point{0.5 * amp * ph, 0.3 * amp * ph};
        break;
      default:  // alternating arm and opposite-leg swings
        pose.joints[kLElbow] = pose.joints[kLElbow] + Point{0.5 * amp * ph, -0.4 * amp * ph};
        pose.joints[kLWrist] = pose.joints[kLWrist] + Point{1.0 * amp * ph, -0.8 * amp * ph};
        pose.joints[kRKnee] = pose.joints[kRKnee] + Point{0.5 * amp * ph, -0.3 * amp * ph};
        pose.joints[kRAnkle] = pose.joints[kRAnkle] + Point{0.9 * amp * ph, -0.6 * amp * ph};
        pose.joints[kRElbow] = pose.joints[kRElbow] + Point{-0.5 * amp * inv, -0.4 * amp * inv};
        pose.joints[kRWrist] = pose.joints[kRWrist] + Point{-1.0 * amp * inv, -0.8 * amp * inv};
        pose.joints[kLKnee] = pose.joints[kLKnee] + Point{-0.5 * amp * inv, -0.3 * amp * inv};
        pose.joints[kLAnkle] = pose.joints[kLAnkle] + Point{-0.9 * amp * inv, -0.6 * amp * inv};
        break;
    }
  }

  // audio: clicks on the beat grid over a style-keyed tone bed
  const int hop = int(std::lround(double(cfg.sample_rate) / cfg.fps));
  const int n_samples = n_frames * hop;
  out.audio.sample_rate = cfg.sample_rate;
  out.audio.samples.assign(std::size_t(n_samples), 0.0);
  const double carrier = 200.0 * std::pow(2.0, label);  // 200 / 400 / 800 Hz
  for (int i = 0; i < n_samples; ++i) {
    double t = double(i) / cfg.sample_rate;
    out.audio.samples[std::size_t(i)] =
        0.08 * std::sin(2.0 * std::numbers::pi * carrier * t) +
        0.05 * std::sin(2.0 * std::numbers::pi * 1.5 * carrier * t);
  }
  const int click_len = cfg.sample_rate / 33;  // ~30 ms
  for (int bf : out.beats.beats) {
    int start = bf * hop;
    for (int k = 0; k < click_len && start + k < n_samples; ++k) {
      double t = double(k) / cfg.sample_rate;
      out.audio.samples[std::size_t(start + k)] +=
          0.9 * std::sin(2.0 * std::numbers::pi * 3000.0 * t) * std::exp(-t / 0.004);
    }
  }
  for (double& s : out.audio.samples) s = std::clamp(s, -1.0, 1.0);

  out.afeat = extract_features(out.audio, cfg.fps);
  return out;
}

// ---------------------------------------------------------------------------
// Corpus directory layout:
//   corpus/{style}/{id}.poses.jsonl  {id}.afeat.json  {id}.beats.json
//   corpus/manifest.json

struct CorpusEntry {
  std::string style;
  int label = 0;
  std::string id;
  std::string poses_path, afeat_path, beats_path;
};

inline std::uint64_t config_hash(const nlohmann::json& j) {
  return std::hash<std::string>{}(j.dump());
}

inline std::vector<CorpusEntry> gen_corpus(const std::string& out_dir, int n_per_style,
                                           std::uint64_t seed,
                                           const CorpusConfig& cfg = {},
                                           bool save_audio = false) {
  namespace fs = std::filesystem;
  if (n_per_style < 1) throw bad_input_error("gen_corpus: n_per_style must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw bad_input_error("cannot create directory " + out_dir + ": " + ec.message());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> bpm(cfg.bpm_min, cfg.bpm_max);
  std::uniform_real_distribution<double> dur(cfg.dur_min, cfg.dur_max);

  std::vector<CorpusEntry> entries;
  nlohmann::json manifest;
  manifest["seed"] = seed;
  manifest["n_per_style"] = n_per_style;
  manifest["config"] = cfg.to_json();
  manifest["config_hash"] = config_hash(cfg.to_json());
  manifest["entries"] = nlohmann::json::array();

  for (std::size_t si = 0; si < corpus_styles().size(); ++si) {
    const std::string& style = corpus_styles()[si];
    fs::create_directories(fs::path(out_dir) / style, ec);
    if (ec)
      throw bad_input_error("cannot create directory " + (fs::path(out_dir) / style).string() +
                            ": " + ec.message());
    for (int i = 0; i < n_per_style; ++i) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%03d", style.c_str(), i);
      std::uint64_t pair_seed = rng();
      SynthPair pair;
      for (;;) {
        // resample until the tempo/duration draw yields a usable beat grid
        try {
          pair = gen_pair(style, bpm(rng), dur(rng), pair_seed, cfg);
          break;
        } catch (const Error&) {
          continue;
        }
      }
      CorpusEntry e;
      e.style = style;
      e.label = int(si);
      e.id = id;
      auto dir = fs::path(out_dir) / style;
      e.poses_path = (dir / (e.id + ".poses.jsonl")).string();
      e.afeat_path = (dir / (e.id + ".afeat.json")).string();
      e.beats_path = (dir / (e.id + ".beats.json")).string();
      save_pose_jsonl(pair.dance, e.poses_path);
      save_afeat_json(pair.afeat, e.afeat_path);
      save_beats_json(pair.beats, e.beats_path);
      if (save_audio) save_wav(pair.audio, (dir / (e.id + ".wav")).string());
      manifest["entries"].push_back({{"style", style},
                                     {"label", e.label},
                                     {"id", e.id},
                                     {"seed", pair_seed}});
      entries.push_back(std::move(e));
    }
  }
  std::ofstream mf((fs::path(out_dir) / "manifest.json").string());
  if (!mf) throw bad_input_error("cannot write manifest in " + out_dir);
  mf << manifest.dump(2) << "\n";
  return entries;
}

struct LoadedCorpusItem {
  std::string style;
  int label = 0;
  std::string id;
  PoseSequence dance;
  AudioFeatureSequence afeat;
  BeatList beats;
};

inline std::vector<LoadedCorpusItem> load_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  auto manifest_path = fs::path(dir) / "manifest.json";
  std::ifstream mf(manifest_path);
  if (!mf) throw bad_input_error("missing corpus manifest: " + manifest_path.string());
  nlohmann::json manifest;
  mf >> manifest;
  std::vector<LoadedCorpusItem> items;
  for (const auto& e : manifest.at("entries")) {
    LoadedCorpusItem it;
    it.style = e.at("style").get<std::string>();
    it.label = e.at("label").get<int>();
    it.id = e.at("id").get<std::string>();
    auto base = fs::path(dir) / it.style / it.id;
    it.dance = load_pose_jsonl(base.string() + ".poses.jsonl");
    it.afeat = load_afeat_json(base.string() + ".afeat.json");
    it.beats = load_beats_json(base.string() + ".beats.json");
    items.push_back(std::move(it));
  }
  return items;
}

}  // namespace dancegen
