#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/error.hpp"
#include "dancegen/nn.hpp"
#include "dancegen/pose.hpp"

namespace dancegen {

enum class LatentSpace { initial_pose, movement, dance, style, noise };

inline const char* to_string(LatentSpace s) {
  switch (s) {
    case LatentSpace::initial_pose: return "initial_pose";
    case LatentSpace::movement: return "movement";
    case LatentSpace::dance: return "dance";
    case LatentSpace::style: return "style";
    case LatentSpace::noise: return "noise";
  }
  return "?";
}

/// A latent vector tagged with the space it lives in. Variational codes carry
/// (mean, log_var); sample holds the reparameterized draw (or the mean on
/// deterministic paths).
struct LatentCode {
  LatentSpace space;
  std::vector<double> mean;
  std::vector<double> log_var;
  std::vector<double> sample;
};

struct DuVaeConfig {
  int z_ini = 4;
  int z_mov = 32;
  int hidden = 64;
  double lambda_kl = 0.01;
  double lambda_shift = 1.0;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int steps = 2000;
  int batch = 64;
  double shift_range = 0.2;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"z_ini", z_ini},       {"z_mov", z_mov},   {"hidden", hidden},
            {"lambda_kl", lambda_kl}, {"lambda_shift", lambda_shift},
            {"lr", lr},             {"beta1", beta1},   {"beta2", beta2},
            {"steps", steps},       {"batch", batch},
            {"shift_range", shift_range}, {"seed", seed}};
  }
  static DuVaeConfig from_json(const nlohmann::json& j) {
    DuVaeConfig c;
    c.z_ini = j.value("z_ini", c.z_ini);
    c.z_mov = j.value("z_mov", c.z_mov);
    c.hidden = j.value("hidden", c.hidden);
    c.lambda_kl = j.value("lambda_kl", c.lambda_kl);
    c.lambda_shift = j.value("lambda_shift", c.lambda_shift);
    c.lr = j.value("lr", c.lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.shift_range = j.value("shift_range", c.shift_range);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

namespace detail {

/// Units are encoded relative to their first-frame neck position; the offset
/// is restored after decoding.
inline Point unit_center(const DanceUnit& u) { return u.frames[0].joints[kNeck]; }

inline DanceUnit center_unit(const DanceUnit& u) {
  Point c = unit_center(u);
  return spatial_shift(u, {-c.x, -c.y});
}

}  // namespace detail

/// Decomposition-phase model: disentangles a dance unit into an initial-pose
/// code and a movement code, and decodes the pair back into a unit.
class DuVae {
 public:
  explicit DuVae(const DuVaeConfig& cfg = {}, std::uint64_t init_seed = 42)
      : cfg_(cfg) {
    nn::Rng rng(init_seed);
    const int h = cfg.hidden;
    // E_ini: 3 fully-connected layers on the first frame
    e_ini_1_ = nn::Linear(pm_, "e_ini.fc1", kPoseDim, h, rng);
    e_ini_2_ = nn::Linear(pm_, "e_ini.fc2", h, h, rng);
    e_ini_3_ = nn::Linear(pm_, "e_ini.fc3", h, 2 * cfg.z_ini, rng);
    // E_mov: GRU over the 32 frames, final state to (mean, log_var)
    e_mov_gru_ = nn::GruCell(pm_, "e_mov.gru", kPoseDim, h, rng);
    e_mov_out_ = nn::Linear(pm_, "e_mov.out", h, 2 * cfg.z_mov, rng);
    // G_uni: code projection to the initial hidden state, GRU unrolled 32
    // steps with the code as constant input, per-step pose head
    dec_init_ = nn::Linear(pm_, "g_uni.init", cfg.z_ini + cfg.z_mov, h, rng);
    dec_gru_ = nn::GruCell(pm_, "g_uni.gru", cfg.z_ini + cfg.z_mov, h, rng);
    dec_out_ = nn::Linear(pm_, "g_uni.out", h, kPoseDim, rng);
  }

  const DuVaeConfig& config() const { return cfg_; }
  nn::ParamMap& params() { return pm_; }

  // -- batched graph-building API (rows = batch) ----------------------------

  /// Posterior log-variance offset. Starting the sampling noise small keeps
  /// the reconstruction gradient on the means; with std starting at 1 the
  /// decoder learns to ignore the code entirely (posterior collapse).
  static constexpr double kLogVarOffset = -4.0;

  /// (mean, log_var) of z_ini from the units' first frames only.
  std::pair<ad::Tensor, ad::Tensor> encode_initial_t(const ad::Tensor& first_frames) const {
    auto h1 = ad::relu(e_ini_1_(first_frames));
    auto h2 = ad::relu(e_ini_2_(h1));
    auto out = e_ini_3_(h2);
    return {ad::slice_cols(out, 0, cfg_.z_ini),
            ad::add_const(ad::slice_cols(out, cfg_.z_ini, cfg_.z_ini), kLogVarOffset)};
  }

  /// (mean, log_var) of z_mov from all 32 frames.
  std::pair<ad::Tensor, ad::Tensor> encode_movement_t(const std::vector<ad::Tensor>& frames) const {
    if (frames.size() != kUnitLen)
      throw contract_error("encode_movement: expected 32 frames");
    auto h = e_mov_gru_.run(frames, frames[0].rows());
    auto out = e_mov_out_(h);
    return {ad::slice_cols(out, 0, cfg_.z_mov),
            ad::add_const(ad::slice_cols(out, cfg_.z_mov, cfg_.z_mov), kLogVarOffset)};
  }

  /// GRU decoder unrolled 32 steps; returns one (batch x 28) tensor per frame.
  std::vector<ad::Tensor> decode_t(const ad::Tensor& z_ini, const ad::Tensor& z_mov) const {
    auto z = ad::concat_cols(z_ini, z_mov);
    auto h = ad::tanh_(dec_init_(z));
    std::vector<ad::Tensor> out;
    out.reserve(kUnitLen);
    for (int t = 0; t < kUnitLen; ++t) {
      h = dec_gru_.step(z, h);
      out.push_back(dec_out_(h));
    }
    return out;
  }

  // -- single-unit API -------------------------------------------------------

  LatentCode encode_initial(const DanceUnit& u, nn::Rng* rng = nullptr) const {
    auto cu = detail::center_unit(u);
    auto ff = flatten_pose(cu.frames[0]);
    auto [mu, lv] = encode_initial_t(ad::Tensor::from({ff.begin(), ff.end()}, 1, kPoseDim));
    return make_code(LatentSpace::initial_pose, mu, lv, rng);
  }

  /// Initial-pose code of a bare pose (used by the synthesis recurrence on
  /// the last frame of the previous unit); deterministic mean path.
  LatentCode encode_initial_pose(const Pose& p) const {
    Point c = p.joints[kNeck];
    auto ff = flatten_pose(shift_pose(p, {-c.x, -c.y}));
    auto [mu, lv] = encode_initial_t(ad::Tensor::from({ff.begin(), ff.end()}, 1, kPoseDim));
    return make_code(LatentSpace::initial_pose, mu, lv, nullptr);
  }

  LatentCode encode_movement(const DanceUnit& u, nn::Rng* rng = nullptr) const {
    auto cu = detail::center_unit(u);
    std::vector<ad::Tensor> frames;
    for (int t = 0; t < kUnitLen; ++t) {
      auto f = flatten_pose(cu.frames[t]);
      frames.push_back(ad::Tensor::from({f.begin(), f.end()}, 1, kPoseDim));
    }
    auto [mu, lv] = encode_movement_t(frames);
    return make_code(LatentSpace::movement, mu, lv, rng);
  }

  /// Decodes a unit and places its first-frame neck at `origin`.
  DanceUnit decode_unit(const LatentCode& z_ini, const LatentCode& z_mov,
                        Point origin = {0.5, 0.5}) const {
    if (z_ini.space != LatentSpace::initial_pose)
      throw contract_error("decode_unit: first code must be initial_pose, got " +
                           std::string(to_string(z_ini.space)));
    if (z_mov.space != LatentSpace::movement)
      throw contract_error("decode_unit: second code must be movement, got " +
                           std::string(to_string(z_mov.space)));
    if (int(z_ini.sample.size()) != cfg_.z_ini || int(z_mov.sample.size()) != cfg_.z_mov)
      throw incompatible_error("decode_unit: latent dimension mismatch");
    auto frames = decode_t(ad::Tensor::from(z_ini.sample, 1, cfg_.z_ini),
                           ad::Tensor::from(z_mov.sample, 1, cfg_.z_mov));
    DanceUnit u;
    for (int t = 0; t < kUnitLen; ++t) {
      std::vector<std::array<double, kPoseDim>> row(1);
      std::copy(frames[std::size_t(t)].data().begin(), frames[std::size_t(t)].data().end(),
                row[0].begin());
      u.frames[t] = unflatten_pose(row[0].data());
    }
    Point neck = u.frames[0].joints[kNeck];
    return spatial_shift(u, {origin.x - neck.x, origin.y - neck.y});
  }

  /// Mean-path reconstruction of a unit; returns per-coordinate L1 error.
  double reconstruction_l1(const DanceUnit& u) const {
    auto zi = encode_initial(u);
    auto zm = encode_movement(u);
    Point c = detail::unit_center(u);
    auto rec = decode_unit(zi, zm, c);
    double acc = 0;
    for (int t = 0; t < kUnitLen; ++t)
      for (int j = 0; j < kNumJoints; ++j) {
        acc += std::abs(rec.frames[t].joints[j].x - u.frames[t].joints[j].x);
        acc += std::abs(rec.frames[t].joints[j].y - u.frames[t].joints[j].y);
      }
    return acc / (kUnitLen * kPoseDim);
  }

  // -- loss -----------------------------------------------------------------

  struct LossParts {
    ad::Tensor total;
    double recon = 0;
    double kl = 0;
    double shift_recon = 0;
  };

  /// Eq. 3-5 on a batch of centered flattened units (32 tensors batch x 28).
  /// shift_deltas: per-sample (dx, dy) applied to build u'.
  LossParts decomposition_loss_batch(const std::vector<ad::Tensor>& frames,
                                     const std::vector<Point>& shift_deltas,
                                     nn::Rng& rng) const {
    using namespace ad;
    const int batch = frames[0].rows();
    auto [mu_i, lv_i] = encode_initial_t(frames[0]);
    auto [mu_m, lv_m] = encode_movement_t(frames);
    auto z_i = reparameterize(mu_i, lv_i, rng);
    auto z_m = reparameterize(mu_m, lv_m, rng);

    // recon terms are summed over coordinates and frames (mean over batch),
    // matching the KL convention; a per-coordinate mean makes the KL weight
    // dominate and collapses the posteriors
    const double el = double(kUnitLen) * double(kPoseDim);
    auto decoded = decode_t(z_i, z_m);
    Tensor recon = scale(l1_frames(decoded, frames), el);
    Tensor kl = add(kl_closed_form(mu_i, lv_i), kl_closed_form(mu_m, lv_m));

    // u' = spatial shift of u; encoding re-centers, so build the shifted
    // batch explicitly from the raw frames
    std::vector<Tensor> shifted;
    shifted.reserve(frames.size());
    for (const auto& f : frames) {
      Tensor delta = Tensor::zeros(batch, kPoseDim);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < kNumJoints; ++j) {
          delta.at(b, 2 * j) = shift_deltas[std::size_t(b)].x;
          delta.at(b, 2 * j + 1) = shift_deltas[std::size_t(b)].y;
        }
      shifted.push_back(add(f, delta));
    }
    // re-center u' on its own first-frame neck before encoding
    std::vector<Tensor> recentered = recenter(shifted);
    auto [mu_m2, lv_m2] = encode_movement_t(recentered);
    auto z_m2 = reparameterize(mu_m2, lv_m2, rng);
    auto decoded_shift = decode_t(z_i, z_m2);
    Tensor shift_recon = scale(l1_frames(decoded_shift, frames), el);

    LossParts parts;
    parts.recon = recon.item();
    parts.kl = kl.item();
    parts.shift_recon = shift_recon.item();
    parts.total = add(recon, add(scale(kl, cfg_.lambda_kl),
                                 scale(shift_recon, cfg_.lambda_shift)));
    return parts;
  }

  /// Closed-form KL(q || N(0, I)), summed over dims, mean over batch.
  static ad::Tensor kl_closed_form(const ad::Tensor& mu, const ad::Tensor& log_var) {
    using namespace ad;
    auto term = add(add(square(mu), exp_(log_var)),
                    add_const(scale(log_var, -1.0), -1.0));
    return scale(sum(term), 0.5 / mu.rows());
  }

  static ad::Tensor reparameterize(const ad::Tensor& mu, const ad::Tensor& log_var,
                                   nn::Rng& rng) {
    using namespace ad;
    auto eps = nn::randn(mu.rows(), mu.cols(), rng);
    return add(mu, mul(exp_(scale(log_var, 0.5)), eps));
  }

  // -- persistence ----------------------------------------------------------

  void save(const std::string& path, nlohmann::json extra = {}) const {
    nlohmann::json manifest{{"model", "du-vae"}, {"config", cfg_.to_json()}};
    for (auto& [k, v] : extra.items()) manifest[k] = v;
    nn::save_checkpoint(pm_, manifest, path);
  }

  static DuVae load(const std::string& path) {
    // peek the manifest for dimensions, then load weights
    std::ifstream mf(path + ".json");
    if (!mf) throw bad_input_error("missing checkpoint manifest: " + path + ".json");
    nlohmann::json manifest;
    mf >> manifest;
    if (manifest.value("model", "") != "du-vae")
      throw incompatible_error("not a du-vae checkpoint: " + path);
    DuVae model(DuVaeConfig::from_json(manifest.at("config")));
    nn::load_checkpoint(model.pm_, path);
    return model;
  }

 private:
  LatentCode make_code(LatentSpace space, const ad::Tensor& mu, const ad::Tensor& lv,
                       nn::Rng* rng) const {
    LatentCode code;
    code.space = space;
    code.mean = mu.data();
    code.log_var = lv.data();
    if (rng) {
      code.sample.resize(code.mean.size());
      std::normal_distribution<double> n(0.0, 1.0);
      for (std::size_t i = 0; i < code.sample.size(); ++i)
        code.sample[i] = code.mean[i] + std::exp(0.5 * code.log_var[i]) * n(*rng);
    } else {
      code.sample = code.mean;
    }
    return code;
  }

  static ad::Tensor l1_frames(const std::vector<ad::Tensor>& a,
                              const std::vector<ad::Tensor>& b) {
    using namespace ad;
    Tensor acc = l1_loss(a[0], b[0]);
    for (std::size_t t = 1; t < a.size(); ++t) acc = add(acc, l1_loss(a[t], b[t]));
    return scale(acc, 1.0 / double(a.size()));
  }

  /// Subtracts each sample's first-frame neck position from all frames
  /// (differentiably, so the shift path stays connected to its input).
  static std::vector<ad::Tensor> recenter(const std::vector<ad::Tensor>& frames) {
    using namespace ad;
    const int batch = frames[0].rows();
    auto neck_x = slice_cols(frames[0], 2 * kNeck, 1);      // batch x 1
    auto neck_y = slice_cols(frames[0], 2 * kNeck + 1, 1);  // batch x 1
    // expand to the (x, y, x, y, ...) column pattern
    std::vector<double> px(std::size_t(kPoseDim), 0.0), py(std::size_t(kPoseDim), 0.0);
    for (int j = 0; j < kNumJoints; ++j) {
      px[std::size_t(2 * j)] = 1.0;
      py[std::size_t(2 * j + 1)] = 1.0;
    }
    auto pat_x = Tensor::from(px, 1, kPoseDim);
    auto pat_y = Tensor::from(py, 1, kPoseDim);
    std::vector<Tensor> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
      auto offset = add(mul(neck_x, pat_x), mul(neck_y, pat_y));  // batch x 28
      out.push_back(sub(f, offset));
    }
    (void)batch;
    return out;
  }

  DuVaeConfig cfg_;
  nn::ParamMap pm_;
  nn::Linear e_ini_1_, e_ini_2_, e_ini_3_;
  nn::GruCell e_mov_gru_;
  nn::Linear e_mov_out_;
  nn::Linear dec_init_;
  nn::GruCell dec_gru_;
  nn::Linear dec_out_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainStats {
  std::vector<double> loss_curve;  // total loss per step
  std::vector<double> recon_curve;
};

/// Prepares the centered flattened batch tensors for the given unit indices.
inline std::vector<ad::Tensor> make_unit_batch(const std::vector<DanceUnit>& units,
                                               const std::vector<std::size_t>& idx) {
  std::vector<ad::Tensor> frames;
  frames.reserve(kUnitLen);
  for (int t = 0; t < kUnitLen; ++t) {
    auto m = ad::Tensor::zeros(int(idx.size()), kPoseDim);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      auto cu = detail::center_unit(units[idx[b]]);
      auto f = flatten_pose(cu.frames[t]);
      for (int k = 0; k < kPoseDim; ++k) m.at(int(b), k) = f[std::size_t(k)];
    }
    frames.push_back(m);
  }
  return frames;
}

inline TrainStats train_duvae(DuVae& model, const std::vector<DanceUnit>& corpus) {
  if (corpus.empty()) throw insufficient_error("train_duvae: empty corpus");
  const auto& cfg = model.config();
  nn::Rng rng(cfg.seed);
  nn::AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.beta1 = cfg.beta1;
  acfg.beta2 = cfg.beta2;
  nn::Adam opt(acfg);

  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  std::uniform_real_distribution<double> shift(-cfg.shift_range, cfg.shift_range);

  TrainStats stats;
  for (int step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> idx(std::size_t(cfg.batch));
    for (auto& i : idx) i = pick(rng);
    auto frames = make_unit_batch(corpus, idx);
    std::vector<Point> deltas(std::size_t(cfg.batch));
    for (auto& d : deltas) d = {shift(rng), shift(rng)};

    model.params().zero_grad();
    auto parts = model.decomposition_loss_batch(frames, deltas, rng);
    parts.total.backward();
    opt.step(model.params());

    stats.loss_curve.push_back(parts.total.item());
    stats.recon_curve.push_back(parts.recon);
  }
  return stats;
}

}  // namespace dancegen
