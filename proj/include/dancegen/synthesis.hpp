#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/audio.hpp"
#include "dancegen/dance_unit.hpp"
#include "dancegen/duvae.hpp"
#include "dancegen/error.hpp"
#include "dancegen/mmgan.hpp"

namespace dancegen {

struct SynthesisResult {
  PoseSequence dance;
  BeatList beats;  // the musical beats actually consumed by the warp
  std::vector<DanceUnit> units;
  nlohmann::json provenance;
};

/// Core recurrence on already-extracted features and beats: decodes unit i
/// from the previous unit's last frame (mean initial-pose path) and the i-th
/// generated movement code, then warps the unit chain onto the musical beats.
inline SynthesisResult synthesize_from_features(const AudioFeatureSequence& afeat,
                                                const BeatList& mus, const DuVae& duvae,
                                                const MmGan& mmgan, std::uint64_t seed,
                                                const std::string& duvae_ckpt = "",
                                                const std::string& mmgan_ckpt = "") {
  if (mmgan.config().z_mov != duvae.config().z_mov)
    throw incompatible_error("checkpoints disagree on the movement-code dimension (" +
                             std::to_string(mmgan.config().z_mov) + " vs " +
                             std::to_string(duvae.config().z_mov) + ")");
  if (int(mus.beats.size()) < 4)
    throw insufficient_error("clip yields only " + std::to_string(mus.beats.size()) +
                             " musical beats, need >= 4");
  const int fps = mus.fps;

  nn::Rng rng(seed);
  auto style = mmgan.style_extract(afeat);

  std::vector<double> eps(std::size_t(mmgan.config().eps_dim));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& v : eps) v = gauss(rng);
  auto z_dan = mmgan.encode_style(style, eps);

  // one unit per 4 beats, capped by the decoder's trained range; the GRU is
  // unrolled at least n_min steps and the surplus codes are dropped
  const int n_units = std::min(int(mus.beats.size()) / 4, mmgan.config().n_max);
  const int rollout = std::clamp(n_units, mmgan.config().n_min, mmgan.config().n_max);
  auto z_movs = mmgan.decode_dance(z_dan, rollout);
  z_movs.resize(std::size_t(n_units));

  LatentCode z_ini;
  z_ini.space = LatentSpace::initial_pose;
  z_ini.sample.resize(std::size_t(duvae.config().z_ini));
  for (double& v : z_ini.sample) v = gauss(rng);
  z_ini.mean = z_ini.sample;

  SynthesisResult out;
  Point origin = {0.5, 0.5};
  for (int i = 0; i < n_units; ++i) {
    auto unit = duvae.decode_unit(z_ini, z_movs[std::size_t(i)], origin);
    origin = unit.frames[kUnitLen - 1].joints[kNeck];
    z_ini = duvae.encode_initial_pose(unit.frames[kUnitLen - 1]);
    out.units.push_back(std::move(unit));
  }

  // consume 4 beats per unit, plus the preceding beat as the warp anchor
  out.beats.fps = mus.fps;
  const int consumed = std::min<int>(4 * n_units + 1, int(mus.beats.size()));
  out.beats.beats.assign(mus.beats.begin(), mus.beats.begin() + consumed);
  out.dance = beat_warp(out.units, out.beats);
  out.dance.fps = fps;

  out.provenance = {{"seed", seed},
                    {"duvae_checkpoint", duvae_ckpt},
                    {"mmgan_checkpoint", mmgan_ckpt},
                    {"n_units", n_units},
                    {"style_label", style.predicted_label},
                    {"musical_beats", mus.beats},
                    {"consumed_beats", out.beats.beats}};
  return out;
}

/// Music in, beat-warped dance out: feature extraction + beat tracking, then
/// the core recurrence.
inline SynthesisResult synthesize(const AudioClip& clip, const DuVae& duvae,
                                  const MmGan& mmgan, std::uint64_t seed,
                                  const std::string& duvae_ckpt = "",
                                  const std::string& mmgan_ckpt = "",
                                  int fps = kDefaultFps) {
  auto afeat = extract_features(clip, fps);
  auto onset = onset_envelope_at_fps(clip, fps);
  BeatList mus;
  try {
    mus = track_music_beats(onset, fps);
  } catch (const Error&) {
    throw insufficient_error("no musical beats found in the clip");
  }
  return synthesize_from_features(afeat, mus, duvae, mmgan, seed, duvae_ckpt, mmgan_ckpt);
}

}  // namespace dancegen
