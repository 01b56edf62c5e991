#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/error.hpp"
#include "dancegen/kinematic_beat.hpp"
#include "dancegen/nn.hpp"
#include "dancegen/pose.hpp"

namespace dancegen {

// ---------------------------------------------------------------------------
// Action classifier used as the metric feature extractor.

struct ActionClassifierConfig {
  int hidden = 32;
  int feat_dim = 32;
  int n_classes = 3;
  int window = 32;  // training crops; inference runs the full sequence
  double lr = 3e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int steps = 400;
  int batch = 32;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"hidden", hidden}, {"feat_dim", feat_dim}, {"n_classes", n_classes},
            {"window", window}, {"lr", lr},             {"beta1", beta1},
            {"beta2", beta2},   {"steps", steps},       {"batch", batch},
            {"seed", seed}};
  }
  static ActionClassifierConfig from_json(const nlohmann::json& j) {
    ActionClassifierConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.feat_dim = j.value("feat_dim", c.feat_dim);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.window = j.value("window", c.window);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct LabeledSequence {
  PoseSequence seq;
  int label = 0;
};

/// GRU classifier over flattened pose frames; the penultimate activation is
/// the metric feature.
class ActionClassifier {
 public:
  explicit ActionClassifier(const ActionClassifierConfig& cfg = {},
                            std::uint64_t init_seed = 42)
      : cfg_(cfg) {
    nn::Rng rng(init_seed);
    gru_ = nn::GruCell(pm_, "clf.gru", kPoseDim, cfg.hidden, rng);
    fc1_ = nn::Linear(pm_, "clf.fc1", cfg.hidden, cfg.feat_dim, rng);
    fc2_ = nn::Linear(pm_, "clf.fc2", cfg.feat_dim, cfg.n_classes, rng);
  }

  const ActionClassifierConfig& config() const { return cfg_; }
  nn::ParamMap& params() { return pm_; }

  /// (feature, logits) for a batch of equal-length frame tensors.
  std::pair<ad::Tensor, ad::Tensor> forward_t(const std::vector<ad::Tensor>& frames) const {
    auto h = gru_.run(frames, frames[0].rows());
    auto f = ad::relu(fc1_(h));
    return {f, fc2_(f)};
  }

  std::vector<double> features(const PoseSequence& seq) const {
    if (seq.frames.empty()) throw insufficient_error("features: empty sequence");
    std::vector<ad::Tensor> frames;
    frames.reserve(seq.frames.size());
    for (const auto& p : seq.frames) {
      auto f = flatten_pose(p);
      frames.push_back(ad::Tensor::from({f.begin(), f.end()}, 1, kPoseDim));
    }
    return forward_t(frames).first.data();
  }

  int classify(const PoseSequence& seq) const {
    std::vector<ad::Tensor> frames;
    for (const auto& p : seq.frames) {
      auto f = flatten_pose(p);
      frames.push_back(ad::Tensor::from({f.begin(), f.end()}, 1, kPoseDim));
    }
    auto logits = forward_t(frames).second;
    int best = 0;
    for (int k = 1; k < cfg_.n_classes; ++k)
      if (logits.at(0, k) > logits.at(0, best)) best = k;
    return best;
  }

  void save(const std::string& path, nlohmann::json extra = {}) const {
    nlohmann::json manifest{{"model", "action-clf"}, {"config", cfg_.to_json()}};
    for (auto& [k, v] : extra.items()) manifest[k] = v;
    nn::save_checkpoint(pm_, manifest, path);
  }

  static ActionClassifier load(const std::string& path) {
    std::ifstream mf(path + ".json");
    if (!mf) throw bad_input_error("missing checkpoint manifest: " + path + ".json");
    nlohmann::json manifest;
    mf >> manifest;
    if (manifest.value("model", "") != "action-clf")
      throw incompatible_error("not an action classifier checkpoint: " + path);
    ActionClassifier model(ActionClassifierConfig::from_json(manifest.at("config")));
    nn::load_checkpoint(model.pm_, path);
    return model;
  }

 private:
  ActionClassifierConfig cfg_;
  nn::ParamMap pm_;
  nn::GruCell gru_;
  nn::Linear fc1_, fc2_;
};

struct ClassifierStats {
  std::vector<double> loss_curve;
  double train_accuracy = 0;
};

/// Trains on random fixed-length crops so batches stay rectangular.
inline ClassifierStats train_feature_extractor(ActionClassifier& model,
                                               const std::vector<LabeledSequence>& corpus) {
  if (corpus.empty()) throw insufficient_error("train_feature_extractor: empty corpus");
  std::vector<int> seen;
  for (const auto& s : corpus)
    if (std::find(seen.begin(), seen.end(), s.label) == seen.end()) seen.push_back(s.label);
  if (seen.size() < 2)
    throw insufficient_error("train_feature_extractor: needs >= 2 classes");
  const auto& cfg = model.config();
  for (const auto& s : corpus)
    if (int(s.seq.frames.size()) < cfg.window)
      throw insufficient_error("train_feature_extractor: sequence shorter than crop window");

  nn::Rng rng(cfg.seed);
  nn::Adam opt({cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  const int batch = std::min<int>(cfg.batch, int(corpus.size()));

  ClassifierStats stats;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
    std::vector<int> starts(static_cast<std::size_t>(batch));
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (int r = 0; r < batch; ++r) {
      idx[std::size_t(r)] = pick(rng);
      const auto& s = corpus[idx[std::size_t(r)]];
      std::uniform_int_distribution<int> st(0, int(s.seq.frames.size()) - cfg.window);
      starts[std::size_t(r)] = st(rng);
      labels[std::size_t(r)] = s.label;
    }
    std::vector<ad::Tensor> frames;
    frames.reserve(std::size_t(cfg.window));
    for (int t = 0; t < cfg.window; ++t) {
      auto m = ad::Tensor::zeros(batch, kPoseDim);
      for (int r = 0; r < batch; ++r) {
        auto f = flatten_pose(
            corpus[idx[std::size_t(r)]].seq.frames[std::size_t(starts[std::size_t(r)] + t)]);
        for (int k = 0; k < kPoseDim; ++k) m.at(r, k) = f[std::size_t(k)];
      }
      frames.push_back(m);
    }
    model.params().zero_grad();
    auto [feat, logits] = model.forward_t(frames);
    auto loss = ad::cross_entropy_with_logits(logits, labels);
    loss.backward();
    opt.step(model.params());
    stats.loss_curve.push_back(loss.item());
  }
  int correct = 0;
  for (const auto& s : corpus)
    if (model.classify(s.seq) == s.label) ++correct;
  stats.train_accuracy = double(correct) / double(corpus.size());
  return stats;
}

// ---------------------------------------------------------------------------
// FID

namespace detail {

using Matrix = std::vector<std::vector<double>>;

inline Matrix matmul_sq(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.size();
  Matrix c(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double v = a[i][k];
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) c[i][j] += v * b[k][j];
    }
  return c;
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues; V (columns = eigenvectors) is filled if non-null.
inline std::vector<double> jacobi_eigen(Matrix a, Matrix* V = nullptr) {
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-22) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a[i][i];
  if (V) *V = std::move(v);
  return eig;
}

/// Symmetric PSD square root via eigendecomposition, eigenvalues floored at 0.
inline Matrix sqrt_psd(const Matrix& a) {
  Matrix V;
  auto eig = jacobi_eigen(a, &V);
  const std::size_t n = a.size();
  Matrix out(n, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    double lam = std::sqrt(std::max(0.0, eig[k]));
    if (lam == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i][j] += lam * V[i][k] * V[j][k];
  }
  return out;
}

inline void mean_cov(const std::vector<std::vector<double>>& x, std::vector<double>& mu,
                     Matrix& cov) {
  const std::size_t n = x.size(), d = x[0].size();
  mu.assign(d, 0.0);
  for (const auto& v : x)
    for (std::size_t j = 0; j < d; ++j) mu[j] += v[j];
  for (double& m : mu) m /= double(n);
  cov.assign(d, std::vector<double>(d, 0.0));
  for (const auto& v : x)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += (v[i] - mu[i]) * (v[j] - mu[j]);
  for (auto& row : cov)
    for (double& c : row) c /= double(n - 1);
  for (std::size_t i = 0; i < d; ++i) cov[i][i] += 1e-6;  // regularization
}

}  // namespace detail

/// Fréchet distance between Gaussian fits of two feature sets:
/// ||mu_r - mu_g||^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}), with the cross term
/// computed as Tr((S_r^{1/2} S_g S_r^{1/2})^{1/2}) to stay in symmetric land.
inline double fid(const std::vector<std::vector<double>>& real,
                  const std::vector<std::vector<double>>& gen,
                  bool* clamped = nullptr) {
  if (real.empty() || gen.empty()) throw insufficient_error("fid: empty feature set");
  const std::size_t d = real[0].size();
  if (gen[0].size() != d) throw incompatible_error("fid: feature dim mismatch");
  if (real.size() < d + 1 || gen.size() < d + 1)
    throw insufficient_error("fid: need at least dim + 1 samples per set");

  std::vector<double> mu_r, mu_g;
  detail::Matrix cov_r, cov_g;
  detail::mean_cov(real, mu_r, cov_r);
  detail::mean_cov(gen, mu_g, cov_g);

  double mean_term = 0;
  for (std::size_t j = 0; j < d; ++j)
    mean_term += (mu_r[j] - mu_g[j]) * (mu_r[j] - mu_g[j]);

  auto sr = detail::sqrt_psd(cov_r);
  auto prod = detail::matmul_sq(detail::matmul_sq(sr, cov_g), sr);
  for (std::size_t i = 0; i < d; ++i)  // symmetrize against rounding
    for (std::size_t j = i + 1; j < d; ++j) {
      double m = 0.5 * (prod[i][j] + prod[j][i]);
      prod[i][j] = prod[j][i] = m;
    }
  auto eig = detail::jacobi_eigen(prod);
  double tr_sqrt = 0;
  for (double e : eig) tr_sqrt += std::sqrt(std::max(0.0, e));

  double trace_term = 0;
  for (std::size_t i = 0; i < d; ++i) trace_term += cov_r[i][i] + cov_g[i][i];

  double out = mean_term + trace_term - 2.0 * tr_sqrt;
  if (clamped) *clamped = false;
  if (out < 0) {
    if (out < -1e-9)
      std::cerr << "warning: fid " << out << " below numerical floor, clamping\n";
    if (clamped) *clamped = true;
    out = 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Beat scores

struct BeatScores {
  double coverage = 0;  // B_k / B_m
  double hit_rate = 0;  // B_a / B_k
  long bm = 0, bk = 0, ba = 0;
  bool coverage_defined = true;
  bool hit_rate_defined = true;
};

/// Aggregates counts over all pairs, then divides (not a mean of ratios).
inline BeatScores beat_scores(const std::vector<std::pair<BeatList, PoseSequence>>& pairs,
                              int tol = 2, const KinematicBeatConfig& cfg = {}) {
  if (pairs.empty()) throw insufficient_error("beat_scores: no pairs");
  BeatScores out;
  for (const auto& [mus, seq] : pairs) {
    auto kin = detect_kinematic_beats(seq, 8, cfg);
    auto [bm, bk, ba] = match_beats(kin, mus, tol);
    out.bm += bm;
    out.bk += bk;
    out.ba += ba;
  }
  if (out.bm == 0) {
    out.coverage_defined = false;
  } else {
    out.coverage = double(out.bk) / double(out.bm);
  }
  if (out.bk == 0) {
    out.hit_rate_defined = false;
  } else {
    out.hit_rate = double(out.ba) / double(out.bk);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diversity / multimodality

namespace detail {

inline double feat_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

inline std::uint64_t content_hash(const std::vector<double>& v) {
  std::uint64_t h = 1469598103934665603ull;
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    h = (h ^ bits) * 1099511628211ull;
  }
  return h;
}

}  // namespace detail

/// Mean feature distance over n_pairs seeded-random pairs. Pair sampling is
/// keyed by content (items sorted by hash) so the result is order-invariant.
inline double diversity(const std::vector<std::vector<double>>& feats, int n_pairs = 200,
                        std::uint64_t seed = 0) {
  if (feats.size() < 2) throw insufficient_error("diversity: need >= 2 feature vectors");
  std::vector<std::size_t> order(feats.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::uint64_t> hashes(feats.size());
  std::uint64_t combined = 0;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    hashes[i] = detail::content_hash(feats[i]);
    combined += hashes[i];
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return hashes[a] < hashes[b]; });
  // exact all-pairs mean when the set is small enough to enumerate
  const std::size_t n = feats.size();
  if (n * (n - 1) / 2 <= std::size_t(n_pairs)) {
    double acc = 0;
    long cnt = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        acc += detail::feat_dist(feats[i], feats[j]);
        ++cnt;
      }
    return acc / double(cnt);
  }
  nn::Rng rng(seed ^ combined);
  std::uniform_int_distribution<std::size_t> pick(0, feats.size() - 1);
  double acc = 0;
  for (int p = 0; p < n_pairs; ++p) {
    std::size_t i = pick(rng), j = pick(rng);
    while (j == i) j = pick(rng);
    acc += detail::feat_dist(feats[order[i]], feats[order[j]]);
  }
  return acc / double(n_pairs);
}

/// Mean over all within-group pairs (5 same-music dances -> C(5,2) = 10),
/// averaged over groups.
inline double multimodality(const std::vector<std::vector<std::vector<double>>>& groups) {
  if (groups.empty()) throw insufficient_error("multimodality: no groups");
  double acc = 0;
  long n_pairs = 0;
  for (const auto& g : groups) {
    if (g.size() < 2)
      throw insufficient_error("multimodality: each group needs >= 2 dances");
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) {
        acc += detail::feat_dist(g[i], g[j]);
        ++n_pairs;
      }
  }
  return acc / double(n_pairs);
}

}  // namespace dancegen
