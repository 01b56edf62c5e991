#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/error.hpp"

namespace dancegen {

struct AudioClip {
  std::vector<double> samples;  // mono PCM in [-1, 1]
  int sample_rate = 22050;
};

struct AudioFeatureSequence {
  std::vector<std::vector<double>> frames;  // 28-dim per video frame
  int fps = 15;
};

inline constexpr int kAudioFeatDim = 28;  // 13 MFCC + 13 deltas + log energy + zero pad
inline constexpr int kNumMfcc = 13;
inline constexpr int kNumMelFilters = 26;
inline constexpr int kStftWindow = 2048;

struct BeatList {
  std::vector<int> beats;  // strictly increasing frame indices
  int fps = 15;
};

inline void save_beats_json(const BeatList& b, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  f << nlohmann::json{{"fps", b.fps}, {"beats", b.beats}}.dump() << "\n";
}

inline BeatList load_beats_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw bad_input_error("cannot open: " + path);
  try {
    nlohmann::json j;
    f >> j;
    BeatList b;
    b.fps = j.at("fps").get<int>();
    b.beats = j.at("beats").get<std::vector<int>>();
    for (std::size_t i = 1; i < b.beats.size(); ++i)
      if (b.beats[i] <= b.beats[i - 1])
        throw bad_input_error("beats not strictly increasing: " + path);
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw bad_input_error("malformed beat file " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// WAV ingestion: RIFF PCM, 16-bit, 22050 Hz; stereo downmixed by averaging.

inline AudioClip load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw bad_input_error("cannot open: " + path);
  auto read_u32 = [&]() {
    std::uint8_t b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
           (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  };
  auto read_u16 = [&]() {
    std::uint8_t b[2];
    f.read(reinterpret_cast<char*>(b), 2);
    return std::uint16_t(b[0] | (b[1] << 8));
  };
  char tag[4];
  f.read(tag, 4);
  if (!f || std::string(tag, 4) != "RIFF")
    throw bad_input_error("not a RIFF file: " + path);
  read_u32();
  f.read(tag, 4);
  if (std::string(tag, 4) != "WAVE") throw bad_input_error("not a WAVE file: " + path);

  int channels = 0, sample_rate = 0, bits = 0;
  std::vector<double> samples;
  while (f.read(tag, 4)) {
    std::uint32_t chunk_size = read_u32();
    std::string id(tag, 4);
    if (id == "fmt ") {
      std::uint16_t fmt = read_u16();
      channels = read_u16();
      sample_rate = int(read_u32());
      read_u32();  // byte rate
      read_u16();  // block align
      bits = read_u16();
      if (fmt != 1) throw bad_input_error("only PCM WAV supported: " + path);
      if (bits != 16) throw bad_input_error("only 16-bit WAV supported: " + path);
      if (chunk_size > 16) f.seekg(chunk_size - 16, std::ios::cur);
    } else if (id == "data") {
      if (channels == 0) throw bad_input_error("data before fmt chunk: " + path);
      std::size_t n = chunk_size / 2;
      std::vector<std::int16_t> raw(n);
      f.read(reinterpret_cast<char*>(raw.data()), std::streamsize(chunk_size));
      samples.reserve(n / std::size_t(channels));
      for (std::size_t i = 0; i + std::size_t(channels) <= n; i += std::size_t(channels)) {
        double acc = 0;
        for (int c = 0; c < channels; ++c) acc += raw[i + std::size_t(c)] / 32768.0;
        samples.push_back(acc / channels);
      }
    } else {
      f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (sample_rate != 22050)
    throw bad_input_error("expected 22050 Hz WAV, got " +
                          std::to_string(sample_rate) + ": " + path);
  if (samples.empty()) throw bad_input_error("no samples in " + path);
  return AudioClip{std::move(samples), sample_rate};
}

inline void save_wav(const AudioClip& clip, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  auto w32 = [&](std::uint32_t v) {
    char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
    f.write(b, 4);
  };
  auto w16 = [&](std::uint16_t v) {
    char b[2] = {char(v), char(v >> 8)};
    f.write(b, 2);
  };
  std::uint32_t data_size = std::uint32_t(clip.samples.size()) * 2;
  f.write("RIFF", 4);
  w32(36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  w32(16);
  w16(1);  // PCM
  w16(1);  // mono
  w32(std::uint32_t(clip.sample_rate));
  w32(std::uint32_t(clip.sample_rate) * 2);
  w16(2);
  w16(16);
  f.write("data", 4);
  w32(data_size);
  for (double s : clip.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    w16(std::uint16_t(std::int16_t(std::lround(c * 32767.0))));
  }
}

// ---------------------------------------------------------------------------
// FFT + spectrogram

namespace detail {

// In-place iterative radix-2 FFT; n must be a power of two.
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * std::numbers::pi / double(len);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[std::size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

}  // namespace detail

/// Magnitude STFT with Hann windowing. Rows index hops, columns frequency
/// bins 0..window/2.
inline std::vector<std::vector<double>> spectrogram(const AudioClip& clip,
                                                    int window = kStftWindow,
                                                    int hop = 512) {
  if (hop <= 0 || window < hop)
    throw contract_error("spectrogram: need window >= hop > 0");
  if ((window & (window - 1)) != 0)
    throw contract_error("spectrogram: window must be a power of two");
  if (int(clip.samples.size()) < window)
    throw insufficient_error("clip shorter than one analysis window");
  const auto win = detail::hann_window(window);
  const int n_bins = window / 2 + 1;
  const int n_frames = 1 + (int(clip.samples.size()) - window) / hop;
  std::vector<std::vector<double>> S(static_cast<std::size_t>(n_frames),
                                     std::vector<double>(static_cast<std::size_t>(n_bins)));
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(window));
  for (int t = 0; t < n_frames; ++t) {
    for (int i = 0; i < window; ++i)
      buf[std::size_t(i)] = clip.samples[std::size_t(t * hop + i)] * win[std::size_t(i)];
    detail::fft(buf);
    for (int k = 0; k < n_bins; ++k) S[std::size_t(t)][std::size_t(k)] = std::abs(buf[std::size_t(k)]);
  }
  return S;
}

/// Half-wave rectified spectral difference summed over bins; o(0) = 0.
inline std::vector<double> onset_strength(const std::vector<std::vector<double>>& S) {
  if (S.size() < 2) throw insufficient_error("onset_strength: need >= 2 frames");
  std::vector<double> o(S.size(), 0.0);
  for (std::size_t t = 1; t < S.size(); ++t) {
    double acc = 0;
    for (std::size_t k = 0; k < S[t].size(); ++k)
      acc += std::max(S[t][k] - S[t - 1][k], 0.0);
    o[t] = acc;
  }
  return o;
}

// ---------------------------------------------------------------------------
// Dynamic-programming beat tracking over an onset envelope sampled at the
// video frame rate. Tempo from the autocorrelation peak within 60-180 BPM,
// beats maximize sum o(t_i) - lambda * sum log(dt/tau)^2.

struct BeatTrackConfig {
  double lambda_tempo = 100.0;
  double bpm_min = 60.0;
  double bpm_max = 180.0;
};

inline BeatList track_music_beats(const std::vector<double>& onset, int fps,
                                  const BeatTrackConfig& cfg = {}) {
  if (onset.empty()) throw insufficient_error("empty onset envelope");
  const int n = int(onset.size());
  // normalize so lambda_tempo is scale free
  double omax = *std::max_element(onset.begin(), onset.end());
  double omin = *std::min_element(onset.begin(), onset.end());
  if (omax - omin <= 1e-12)
    throw insufficient_error("flat onset envelope: no beats found");
  // peak reward 25 so a real onset always beats the spacing penalty, which
  // reaches ~2 per beat for tempos falling between integer frame periods
  std::vector<double> o(onset.size());
  for (int t = 0; t < n; ++t)
    o[std::size_t(t)] = 25.0 * (onset[std::size_t(t)] - omin) / (omax - omin);

  const int lag_min = std::max(1, int(std::floor(fps * 60.0 / cfg.bpm_max)));
  const int lag_max = std::min(n - 1, int(std::ceil(fps * 60.0 / cfg.bpm_min)));
  if (lag_max <= lag_min)
    throw insufficient_error("envelope too short for tempo estimation");

  std::vector<double> ac(std::size_t(lag_max) + 2, 0.0);
  for (int lag = std::max(1, lag_min - 1); lag <= lag_max + 1 && lag < n; ++lag)
    for (int t = lag; t < n; ++t) ac[std::size_t(lag)] += o[std::size_t(t)] * o[std::size_t(t - lag)];

  // +-1 smoothing re-collects jittered click mass; the log-normal weight
  // centered mid-range breaks octave ties toward the faster tempo
  const double tau0 = fps * 60.0 / std::sqrt(cfg.bpm_min * cfg.bpm_max);
  auto smoothed = [&](int lag) {
    double s = ac[std::size_t(lag)];
    if (lag - 1 >= 1) s += ac[std::size_t(lag) - 1];
    if (lag + 1 < int(ac.size())) s += ac[std::size_t(lag) + 1];
    return s;
  };
  auto weighted = [&](int lag) {
    double oct = std::log2(double(lag) / tau0);
    return smoothed(lag) * std::exp(-0.5 * oct * oct / (0.9 * 0.9));
  };
  int best_lag = lag_min;
  for (int lag = lag_min; lag <= lag_max; ++lag)
    if (weighted(lag) > weighted(best_lag)) best_lag = lag;
  // octave check: non-integer beat periods spread alignment mass, which can
  // hand the peak to the doubled lag; take the half lag while it holds a
  // comparable share of the mass
  while (true) {
    int half = int(std::lround(best_lag / 2.0));
    int h_best = -1;
    for (int h = half - 1; h <= half + 1; ++h) {
      if (h < lag_min || h > lag_max) continue;
      if (h_best < 0 || smoothed(h) > smoothed(h_best)) h_best = h;
    }
    if (h_best < 0 || h_best >= best_lag || smoothed(h_best) < 0.5 * smoothed(best_lag))
      break;
    best_lag = h_best;
  }
  if (ac[std::size_t(best_lag)] + ac[std::size_t(best_lag) + 1] +
          ac[std::size_t(std::max(1, best_lag - 1))] <= 0.0)
    throw insufficient_error("no tempo peak in onset autocorrelation");

  // parabolic refinement of the autocorrelation peak
  double tau = best_lag;
  if (best_lag > lag_min && best_lag < lag_max) {
    double y0 = smoothed(best_lag - 1), y1 = smoothed(best_lag), y2 = smoothed(best_lag + 1);
    double denom = y0 - 2 * y1 + y2;
    if (std::abs(denom) > 1e-12) tau += 0.5 * (y0 - y2) / denom;
  }

  // DP: C(t) = o(t) + max over prev of C(prev) - lambda*log((t-prev)/tau)^2
  const double lam = cfg.lambda_tempo;
  const int dmin = std::max(1, int(std::round(tau / 2)));
  const int dmax = int(std::round(tau * 2));
  std::vector<double> score(o);
  std::vector<int> back(std::size_t(n), -1);
  for (int t = 0; t < n; ++t) {
    double best = 0.0;
    int arg = -1;
    for (int d = dmin; d <= std::min(dmax, t); ++d) {
      double pen = std::log(double(d) / tau);
      double cand = score[std::size_t(t - d)] - lam * pen * pen;
      if (cand > best) {
        best = cand;
        arg = t - d;
      }
    }
    score[std::size_t(t)] = o[std::size_t(t)] + best;
    back[std::size_t(t)] = arg;
  }
  int end = int(std::max_element(score.begin(), score.end()) - score.begin());
  std::vector<int> beats;
  for (int t = end; t >= 0; t = back[std::size_t(t)]) {
    beats.push_back(t);
    if (back[std::size_t(t)] < 0) break;
  }
  std::reverse(beats.begin(), beats.end());
  return BeatList{std::move(beats), fps};
}

// ---------------------------------------------------------------------------
// MFCC feature assembly: one 28-dim vector per video frame.

namespace detail {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular mel filterbank over n_bins FFT bins.
inline std::vector<std::vector<double>> mel_filterbank(int n_filters, int n_bins,
                                                       int sample_rate, int window) {
  double mel_lo = hz_to_mel(0.0);
  double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(static_cast<std::size_t>(n_filters) + 2);
  for (int i = 0; i < n_filters + 2; ++i) {
    double hz = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_filters + 1));
    centers[std::size_t(i)] = hz * window / sample_rate;  // in bin units
  }
  std::vector<std::vector<double>> fb(static_cast<std::size_t>(n_filters),
                                      std::vector<double>(static_cast<std::size_t>(n_bins), 0.0));
  for (int m = 0; m < n_filters; ++m) {
    double lo = centers[std::size_t(m)], mid = centers[std::size_t(m) + 1], hi = centers[std::size_t(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      if (k > lo && k < mid)
        fb[std::size_t(m)][std::size_t(k)] = (k - lo) / (mid - lo);
      else if (k >= mid && k < hi)
        fb[std::size_t(m)][std::size_t(k)] = (hi - k) / (hi - mid);
    }
  }
  return fb;
}

}  // namespace detail

/// 13 MFCCs + 13 central-difference deltas + log mean energy + zero pad,
/// one vector per video frame. Volume pre-normalized to unit RMS.
inline AudioFeatureSequence extract_features(const AudioClip& clip, int fps) {
  if (fps <= 0) throw contract_error("extract_features: fps must be positive");
  const int hop = int(std::lround(double(clip.sample_rate) / fps));
  if (int(clip.samples.size()) < hop)
    throw insufficient_error("clip shorter than one video frame");

  // RMS volume normalization
  double ms = 0;
  for (double s : clip.samples) ms += s * s;
  ms /= double(clip.samples.size());
  AudioClip norm = clip;
  if (ms > 1e-12) {
    double g = 1.0 / std::sqrt(ms);
    for (double& s : norm.samples) s *= g;
  }

  const int window = kStftWindow;
  const int n_frames = int(norm.samples.size()) / hop;
  const int n_bins = window / 2 + 1;
  static_assert(kNumMfcc + kNumMfcc + 2 == kAudioFeatDim);
  const auto fb = detail::mel_filterbank(kNumMelFilters, n_bins, clip.sample_rate, window);
  const auto win = detail::hann_window(window);

  // per-frame MFCC (frame t centered at t*hop) and log mean energy
  std::vector<std::array<double, kNumMfcc>> mfcc(static_cast<std::size_t>(n_frames));
  std::vector<double> log_energy(static_cast<std::size_t>(n_frames));
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(window));
  for (int t = 0; t < n_frames; ++t) {
    const int start = t * hop - window / 2;
    double e = 0;
    for (int i = 0; i < window; ++i) {
      int idx = start + i;
      double s = (idx >= 0 && idx < int(norm.samples.size())) ? norm.samples[std::size_t(idx)] : 0.0;
      buf[std::size_t(i)] = s * win[std::size_t(i)];
    }
    for (int i = 0; i < hop; ++i) {
      int idx = t * hop + i;
      if (idx < int(norm.samples.size())) {
        double s = norm.samples[std::size_t(idx)];
        e += s * s;
      }
    }
    log_energy[std::size_t(t)] = std::log(e / hop + 1e-8);
    detail::fft(buf);
    std::vector<double> mel(static_cast<std::size_t>(kNumMelFilters));
    for (int m = 0; m < kNumMelFilters; ++m) {
      double acc = 0;
      for (int k = 0; k < n_bins; ++k) {
        double mag = std::abs(buf[std::size_t(k)]);
        acc += mag * mag * fb[std::size_t(m)][std::size_t(k)];
      }
      mel[std::size_t(m)] = std::log(acc + 1e-8);
    }
    // DCT-II of the log mel energies
    for (int c = 0; c < kNumMfcc; ++c) {
      double acc = 0;
      for (int m = 0; m < kNumMelFilters; ++m)
        acc += mel[std::size_t(m)] *
               std::cos(std::numbers::pi * c * (m + 0.5) / kNumMelFilters);
      mfcc[std::size_t(t)][std::size_t(c)] = acc;
    }
  }

  AudioFeatureSequence out;
  out.fps = fps;
  out.frames.assign(std::size_t(n_frames), std::vector<double>(kAudioFeatDim, 0.0));
  for (int t = 0; t < n_frames; ++t) {
    auto& v = out.frames[std::size_t(t)];
    for (int c = 0; c < kNumMfcc; ++c) v[std::size_t(c)] = mfcc[std::size_t(t)][std::size_t(c)];
    // central-difference temporal derivative
    int tp = std::min(t + 1, n_frames - 1), tm = std::max(t - 1, 0);
    double denom = double(tp - tm == 0 ? 1 : tp - tm);
    for (int c = 0; c < kNumMfcc; ++c)
      v[std::size_t(kNumMfcc + c)] =
          (mfcc[std::size_t(tp)][std::size_t(c)] - mfcc[std::size_t(tm)][std::size_t(c)]) / denom;
    v[2 * kNumMfcc] = log_energy[std::size_t(t)];
    v[2 * kNumMfcc + 1] = 0.0;  // reserved pad to the declared 28 dims
  }
  return out;
}

/// Onset envelope resampled onto the video frame grid (one value per frame).
inline std::vector<double> onset_envelope_at_fps(const AudioClip& clip, int fps) {
  const int hop = int(std::lround(double(clip.sample_rate) / fps));
  auto S = spectrogram(clip, kStftWindow, hop);
  return onset_strength(S);
}

inline void save_afeat_json(const AudioFeatureSequence& a, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  f << nlohmann::json{{"fps", a.fps}, {"frames", a.frames}}.dump() << "\n";
}

inline AudioFeatureSequence load_afeat_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw bad_input_error("cannot open: " + path);
  try {
    nlohmann::json j;
    f >> j;
    AudioFeatureSequence a;
    a.fps = j.at("fps").get<int>();
    a.frames = j.at("frames").get<std::vector<std::vector<double>>>();
    for (const auto& v : a.frames)
      if (v.size() != kAudioFeatDim)
        throw bad_input_error("expected 28-dim features: " + path);
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw bad_input_error("malformed feature file " + path + ": " + e.what());
  }
}

}  // namespace dancegen
