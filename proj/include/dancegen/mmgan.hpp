#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/audio.hpp"
#include "dancegen/duvae.hpp"
#include "dancegen/error.hpp"
#include "dancegen/nn.hpp"

namespace dancegen {

/// Music style feature: penultimate-layer activation of the style classifier.
struct StyleFeature {
  std::vector<double> s;
  int predicted_label = -1;
};

struct MmGanConfig {
  int z_mov = 32;   // must match the frozen DU-VAE
  int z_dan = 32;
  int hidden = 64;
  int s_dim = 8;
  int eps_dim = 16;
  int n_min = 3;
  int n_max = 5;
  int n_styles = 3;
  double lambda_recon_s = 1.0;
  double lambda_adv = 0.1;   // shared by the movement and dance adversarial terms
  double lambda_kl = 0.01;
  double lr = 1e-4;
  double dis_lr = 0;  // discriminator learning rate; <= 0 means same as lr
  double beta1 = 0.5;
  double beta2 = 0.999;
  int steps = 2000;
  int batch = 64;
  int style_steps = 400;
  double style_lr = 1e-2;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"z_mov", z_mov},   {"z_dan", z_dan}, {"hidden", hidden},
            {"s_dim", s_dim},   {"eps_dim", eps_dim},
            {"n_min", n_min},   {"n_max", n_max}, {"n_styles", n_styles},
            {"lambda_recon_s", lambda_recon_s},   {"lambda_adv", lambda_adv},
            {"lambda_kl", lambda_kl},             {"lr", lr},
            {"dis_lr", dis_lr},
            {"beta1", beta1},   {"beta2", beta2}, {"steps", steps},
            {"batch", batch},   {"style_steps", style_steps},
            {"style_lr", style_lr},               {"seed", seed}};
  }
  static MmGanConfig from_json(const nlohmann::json& j) {
    MmGanConfig c;
    c.z_mov = j.value("z_mov", c.z_mov);
    c.z_dan = j.value("z_dan", c.z_dan);
    c.hidden = j.value("hidden", c.hidden);
    c.s_dim = j.value("s_dim", c.s_dim);
    c.eps_dim = j.value("eps_dim", c.eps_dim);
    c.n_min = j.value("n_min", c.n_min);
    c.n_max = j.value("n_max", c.n_max);
    c.n_styles = j.value("n_styles", c.n_styles);
    c.lambda_recon_s = j.value("lambda_recon_s", c.lambda_recon_s);
    c.lambda_adv = j.value("lambda_adv", c.lambda_adv);
    c.lambda_kl = j.value("lambda_kl", c.lambda_kl);
    c.lr = j.value("lr", c.lr);
    c.dis_lr = j.value("dis_lr", c.dis_lr);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.style_steps = j.value("style_steps", c.style_steps);
    c.style_lr = j.value("style_lr", c.style_lr);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

/// One training example: a short dance (3-5 units) with its paired audio
/// features and style label.
struct PairedSequence {
  std::vector<DanceUnit> units;
  AudioFeatureSequence afeat;
  int label = 0;
};

inline std::vector<double> mean_pool_audio(const AudioFeatureSequence& a) {
  if (a.frames.empty()) throw insufficient_error("mean_pool_audio: no frames");
  std::vector<double> out(std::size_t(kAudioFeatDim), 0.0);
  for (const auto& f : a.frames)
    for (int k = 0; k < kAudioFeatDim; ++k) out[std::size_t(k)] += f[std::size_t(k)];
  for (double& v : out) v /= double(a.frames.size());
  return out;
}

/// Composition-phase model: style-conditioned generation of movement-code
/// sequences, aligned to real-dance code distributions adversarially.
class MmGan {
 public:
  explicit MmGan(const MmGanConfig& cfg = {}, std::uint64_t init_seed = 42)
      : cfg_(cfg) {
    nn::Rng rng(init_seed);
    const int h = cfg.hidden;
    // style classifier: two hidden layers over time-pooled audio features,
    // s = penultimate activation
    sty_fc1_ = nn::Linear(pm_sty_, "style.fc1", kAudioFeatDim, h / 2, rng);
    sty_fc2_ = nn::Linear(pm_sty_, "style.fc2", h / 2, cfg.s_dim, rng);
    sty_fc3_ = nn::Linear(pm_sty_, "style.fc3", cfg.s_dim, cfg.n_styles, rng);
    // E_mtd: GRU over the movement-code sequence
    e_mtd_gru_ = nn::GruCell(pm_gen_, "e_mtd.gru", cfg.z_mov, h, rng);
    e_mtd_out_ = nn::Linear(pm_gen_, "e_mtd.out", h, 2 * cfg.z_dan, rng);
    // E_std: (s, eps) -> dance code
    e_std_1_ = nn::Linear(pm_gen_, "e_std.fc1", cfg.s_dim + cfg.eps_dim, h, rng);
    e_std_2_ = nn::Linear(pm_gen_, "e_std.fc2", h, h, rng);
    e_std_3_ = nn::Linear(pm_gen_, "e_std.fc3", h, cfg.z_dan, rng);
    // G_dan: recurrent dance decoder emitting movement-code means
    g_dan_init_ = nn::Linear(pm_gen_, "g_dan.init", cfg.z_dan, h, rng);
    g_dan_gru_ = nn::GruCell(pm_gen_, "g_dan.gru", cfg.z_dan, h, rng);
    g_dan_out_ = nn::Linear(pm_gen_, "g_dan.out", h, cfg.z_mov, rng);
    // E_sty: style regressor on dance codes
    e_sty_1_ = nn::Linear(pm_gen_, "e_sty.fc1", cfg.z_dan, h / 2, rng);
    e_sty_2_ = nn::Linear(pm_gen_, "e_sty.fc2", h / 2, h / 4, rng);
    e_sty_3_ = nn::Linear(pm_gen_, "e_sty.fc3", h / 4, cfg.s_dim, rng);
    // D_mov: GRU over (code, pooled audio) pairs, MLP head
    d_mov_gru_ = nn::GruCell(pm_dis_, "d_mov.gru", cfg.z_mov + kAudioFeatDim, h, rng);
    d_mov_fc1_ = nn::Linear(pm_dis_, "d_mov.fc1", h, h, rng);
    d_mov_ln_ = nn::LayerNorm(pm_dis_, "d_mov.ln", h);
    d_mov_fc2_ = nn::Linear(pm_dis_, "d_mov.fc2", h, 1, rng);
    // D_dan: MLP on dance codes
    d_dan_fc1_ = nn::Linear(pm_dis_, "d_dan.fc1", cfg.z_dan, h, rng);
    d_dan_ln_ = nn::LayerNorm(pm_dis_, "d_dan.ln", h);
    d_dan_fc2_ = nn::Linear(pm_dis_, "d_dan.fc2", h, h, rng);
    d_dan_fc3_ = nn::Linear(pm_dis_, "d_dan.fc3", h, 1, rng);
    // master registry for checkpointing; tensors are shared with the subsets
    for (auto* sub : {&pm_sty_, &pm_gen_, &pm_dis_})
      for (auto& [name, p] : sub->items()) pm_.add(name, p);
  }

  const MmGanConfig& config() const { return cfg_; }
  nn::ParamMap& params() { return pm_; }
  nn::ParamMap& style_params() { return pm_sty_; }
  nn::ParamMap& generator_params() { return pm_gen_; }
  nn::ParamMap& discriminator_params() { return pm_dis_; }

  // -- style classifier -----------------------------------------------------

  /// (s, logits) from a batch of pooled audio features.
  std::pair<ad::Tensor, ad::Tensor> style_forward_t(const ad::Tensor& pooled) const {
    auto h = ad::relu(sty_fc1_(pooled));
    auto s = ad::relu(sty_fc2_(h));
    return {s, sty_fc3_(s)};
  }

  StyleFeature style_extract(const AudioFeatureSequence& a) const {
    auto pooled = mean_pool_audio(a);
    auto [s, logits] = style_forward_t(ad::Tensor::from(pooled, 1, kAudioFeatDim));
    StyleFeature f;
    f.s = s.data();
    int best = 0;
    for (int k = 1; k < cfg_.n_styles; ++k)
      if (logits.at(0, k) > logits.at(0, best)) best = k;
    f.predicted_label = best;
    return f;
  }

  // -- generator-side graph builders (rows = batch) -------------------------

  /// E_mtd: (mean, log_var) of z_dan from a movement-code sequence.
  std::pair<ad::Tensor, ad::Tensor> encode_movement_sequence_t(
      const std::vector<ad::Tensor>& zs) const {
    if (int(zs.size()) < cfg_.n_min || int(zs.size()) > cfg_.n_max)
      throw contract_error("encode_movement_sequence: length " +
                           std::to_string(zs.size()) + " outside [" +
                           std::to_string(cfg_.n_min) + ", " +
                           std::to_string(cfg_.n_max) + "]");
    auto h = e_mtd_gru_.run(zs, zs[0].rows());
    auto out = e_mtd_out_(h);
    // no log-var offset here: the dance posterior doubles as the "real"
    // distribution for D_dan, and its sampling noise is what gives the
    // style path a matchable target rather than a thin manifold
    return {ad::slice_cols(out, 0, cfg_.z_dan), ad::slice_cols(out, cfg_.z_dan, cfg_.z_dan)};
  }

  /// E_std: deterministic dance code from (s, eps). The output is
  /// soft-clipped per dimension: the KL term keeps the posterior dance
  /// codes near unit scale, and an unbounded E_std head drifts an order of
  /// magnitude away under the adversarial push, which the dance
  /// discriminator then separates trivially.
  ad::Tensor encode_style_t(const ad::Tensor& s, const ad::Tensor& eps) const {
    auto x = ad::concat_cols(s, eps);
    auto h1 = ad::relu(e_std_1_(x));
    auto h2 = ad::relu(e_std_2_(h1));
    constexpr double kClip = 3.0;
    return ad::scale(ad::tanh_(ad::scale(e_std_3_(h2), 1.0 / kClip)), kClip);
  }

  /// G_dan: n movement-code means from a dance code.
  std::vector<ad::Tensor> decode_dance_t(const ad::Tensor& z_dan, int n) const {
    if (n < cfg_.n_min || n > cfg_.n_max)
      throw contract_error("decode_dance: n outside configured range");
    auto h = ad::tanh_(g_dan_init_(z_dan));
    std::vector<ad::Tensor> out;
    out.reserve(std::size_t(n));
    for (int i = 0; i < n; ++i) {
      h = g_dan_gru_.step(z_dan, h);
      out.push_back(g_dan_out_(h));
    }
    return out;
  }

  /// E_sty: style regressed from a dance code.
  ad::Tensor style_regress_t(const ad::Tensor& z_dan) const {
    auto h1 = ad::relu(e_sty_1_(z_dan));
    auto h2 = ad::relu(e_sty_2_(h1));
    return e_sty_3_(h2);
  }

  // -- single-sequence API --------------------------------------------------

  LatentCode encode_movement_sequence(const std::vector<LatentCode>& zs) const {
    std::vector<ad::Tensor> ts;
    for (const auto& z : zs) {
      if (z.space != LatentSpace::movement)
        throw contract_error("encode_movement_sequence: expected movement codes");
      ts.push_back(ad::Tensor::from(z.sample, 1, cfg_.z_mov));
    }
    auto [mu, lv] = encode_movement_sequence_t(ts);
    LatentCode code;
    code.space = LatentSpace::dance;
    code.mean = mu.data();
    code.log_var = lv.data();
    code.sample = code.mean;
    return code;
  }

  LatentCode encode_style(const StyleFeature& s, const std::vector<double>& eps) const {
    if (int(s.s.size()) != cfg_.s_dim)
      throw incompatible_error("encode_style: style feature dim mismatch");
    if (int(eps.size()) != cfg_.eps_dim)
      throw incompatible_error("encode_style: noise dim mismatch");
    auto z = encode_style_t(ad::Tensor::from(s.s, 1, cfg_.s_dim),
                            ad::Tensor::from(eps, 1, cfg_.eps_dim));
    LatentCode code;
    code.space = LatentSpace::dance;
    code.mean = z.data();
    code.sample = code.mean;
    return code;
  }

  std::vector<LatentCode> decode_dance(const LatentCode& z_dan, int n) const {
    if (z_dan.space != LatentSpace::dance)
      throw contract_error("decode_dance: expected a dance code");
    auto ts = decode_dance_t(ad::Tensor::from(z_dan.sample, 1, cfg_.z_dan), n);
    std::vector<LatentCode> out;
    for (auto& t : ts) {
      LatentCode c;
      c.space = LatentSpace::movement;
      c.mean = t.data();
      c.sample = c.mean;
      out.push_back(std::move(c));
    }
    return out;
  }

  // -- discriminators -------------------------------------------------------

  ad::Tensor d_mov_logit_t(const std::vector<ad::Tensor>& zs,
                           const ad::Tensor& pooled_audio) const {
    std::vector<ad::Tensor> xs;
    xs.reserve(zs.size());
    for (const auto& z : zs) xs.push_back(ad::concat_cols(z, pooled_audio));
    auto h = d_mov_gru_.run(xs, zs[0].rows());
    auto m = ad::relu(d_mov_ln_(d_mov_fc1_(h)));
    return d_mov_fc2_(m);
  }

  ad::Tensor d_dan_logit_t(const ad::Tensor& z_dan) const {
    auto h1 = ad::relu(d_dan_ln_(d_dan_fc1_(z_dan)));
    auto h2 = ad::relu(d_dan_fc2_(h1));
    return d_dan_fc3_(h2);
  }

  // -- losses ---------------------------------------------------------------

  /// A batch of composition training inputs: detached movement-code targets
  /// from the frozen DU-VAE, pooled audio conditioning, and the (detached)
  /// style features with their labels.
  struct Batch {
    std::vector<ad::Tensor> z_mov;  // n tensors, batch x z_mov
    ad::Tensor pooled_audio;        // batch x 28
    ad::Tensor s;                   // batch x s_dim
    std::vector<int> labels;
  };

  Batch make_batch(const DuVae& duvae, const std::vector<PairedSequence>& corpus,
                   const std::vector<std::size_t>& idx) const {
    if (idx.empty()) throw insufficient_error("make_batch: empty index set");
    const int n = int(corpus[idx[0]].units.size());
    for (auto i : idx)
      if (int(corpus[i].units.size()) != n)
        throw contract_error("make_batch: mixed sequence lengths in one batch");
    Batch b;
    // encode unit u of every sample through the frozen DU-VAE, keep means
    for (int u = 0; u < n; ++u) {
      std::vector<ad::Tensor> unit_frames;
      unit_frames.reserve(kUnitLen);
      for (int t = 0; t < kUnitLen; ++t) {
        auto m = ad::Tensor::zeros(int(idx.size()), kPoseDim);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          auto cu = detail::center_unit(corpus[idx[r]].units[std::size_t(u)]);
          auto f = flatten_pose(cu.frames[t]);
          for (int k = 0; k < kPoseDim; ++k) m.at(int(r), k) = f[std::size_t(k)];
        }
        unit_frames.push_back(m);
      }
      auto [mu, lv] = duvae.encode_movement_t(unit_frames);
      b.z_mov.push_back(mu.detach());
    }
    auto pooled = ad::Tensor::zeros(int(idx.size()), kAudioFeatDim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto p = mean_pool_audio(corpus[idx[r]].afeat);
      for (int k = 0; k < kAudioFeatDim; ++k) pooled.at(int(r), k) = p[std::size_t(k)];
      b.labels.push_back(corpus[idx[r]].label);
    }
    b.pooled_audio = pooled;
    auto [s, logits] = style_forward_t(b.pooled_audio);
    b.s = s.detach();
    return b;
  }

  struct GenParts {
    ad::Tensor total;
    double recon_m = 0, adv_m = 0, adv_d = 0, kl_d = 0, recon_s = 0;
  };

  struct DiscParts {
    ad::Tensor total;
    double d_mov = 0, d_dan = 0;
  };

  /// Shared forward pass for both loss directions.
  struct Paths {
    ad::Tensor z_dan;                 // sampled from E_mtd posterior
    ad::Tensor mu, lv;                // posterior parameters
    std::vector<ad::Tensor> z_hat;    // G_dan(z_dan): reconstruction path
    ad::Tensor z_dan_tilde;           // E_std(s, eps)
    std::vector<ad::Tensor> z_tilde;  // G_dan(z_dan_tilde): generation path
  };

  Paths forward(const Batch& b, nn::Rng& rng) const {
    Paths p;
    auto [mu, lv] = encode_movement_sequence_t(b.z_mov);
    p.mu = mu;
    p.lv = lv;
    p.z_dan = DuVae::reparameterize(mu, lv, rng);
    p.z_hat = decode_dance_t(p.z_dan, int(b.z_mov.size()));
    auto eps = nn::randn(b.pooled_audio.rows(), cfg_.eps_dim, rng);
    p.z_dan_tilde = encode_style_t(b.s, eps);
    p.z_tilde = decode_dance_t(p.z_dan_tilde, int(b.z_mov.size()));
    return p;
  }

  /// Generator/encoder objective (Eq. 10, non-saturating adversarial form).
  GenParts generator_loss(const Batch& b, const Paths& p) const {
    using namespace ad;
    // latent recon terms summed over dims and sequence steps (mean over
    // batch), the same convention as the closed-form KL
    Tensor recon_m = scale(l1_seq(p.z_hat, b.z_mov),
                           double(p.z_hat.size()) * double(cfg_.z_mov));
    Tensor kl_d = DuVae::kl_closed_form(p.mu, p.lv);
    Tensor recon_s = scale(add(l1_loss(style_regress_t(p.z_dan), b.s),
                               l1_loss(style_regress_t(p.z_dan_tilde), b.s)),
                           double(cfg_.s_dim));
    // non-saturating: generator pushes both fooling directions
    Tensor adv_m = add(mean(softplus(scale(d_mov_logit_t(p.z_hat, b.pooled_audio), -1.0))),
                       mean(softplus(scale(d_mov_logit_t(p.z_tilde, b.pooled_audio), -1.0))));
    Tensor adv_d = add(mean(softplus(scale(d_dan_logit_t(p.z_dan), -1.0))),
                       mean(softplus(scale(d_dan_logit_t(p.z_dan_tilde), -1.0))));
    GenParts g;
    g.recon_m = recon_m.item();
    g.kl_d = kl_d.item();
    g.recon_s = recon_s.item();
    g.adv_m = adv_m.item();
    g.adv_d = adv_d.item();
    g.total = add(recon_m,
                  add(scale(recon_s, cfg_.lambda_recon_s),
                      add(scale(kl_d, cfg_.lambda_kl),
                          add(scale(adv_m, cfg_.lambda_adv),
                              scale(adv_d, cfg_.lambda_adv)))));
    return g;
  }

  /// Discriminator objective: real = reconstruction path, fake = generation
  /// path, both detached from the generator graph.
  DiscParts discriminator_loss(const Batch& b, const Paths& p) const {
    using namespace ad;
    auto det = [](const std::vector<Tensor>& v) {
      std::vector<Tensor> out;
      for (const auto& t : v) out.push_back(t.detach());
      return out;
    };
    auto real_m = d_mov_logit_t(det(p.z_hat), b.pooled_audio);
    auto fake_m = d_mov_logit_t(det(p.z_tilde), b.pooled_audio);
    Tensor d_mov = add(mean(softplus(scale(real_m, -1.0))), mean(softplus(fake_m)));
    auto real_d = d_dan_logit_t(p.z_dan.detach());
    auto fake_d = d_dan_logit_t(p.z_dan_tilde.detach());
    Tensor d_dan = add(mean(softplus(scale(real_d, -1.0))), mean(softplus(fake_d)));
    DiscParts d;
    d.d_mov = d_mov.item();
    d.d_dan = d_dan.item();
    d.total = add(d_mov, d_dan);
    return d;
  }

  // -- persistence ----------------------------------------------------------

  void save(const std::string& path, nlohmann::json extra = {}) const {
    nlohmann::json manifest{{"model", "mm-gan"}, {"config", cfg_.to_json()}};
    for (auto& [k, v] : extra.items()) manifest[k] = v;
    nn::save_checkpoint(pm_, manifest, path);
  }

  static MmGan load(const std::string& path) {
    std::ifstream mf(path + ".json");
    if (!mf) throw bad_input_error("missing checkpoint manifest: " + path + ".json");
    nlohmann::json manifest;
    mf >> manifest;
    if (manifest.value("model", "") != "mm-gan")
      throw incompatible_error("not an mm-gan checkpoint: " + path);
    MmGan model(MmGanConfig::from_json(manifest.at("config")));
    nn::load_checkpoint(model.pm_, path);
    return model;
  }

 private:
  static ad::Tensor l1_seq(const std::vector<ad::Tensor>& a,
                           const std::vector<ad::Tensor>& b) {
    using namespace ad;
    Tensor acc = l1_loss(a[0], b[0]);
    for (std::size_t i = 1; i < a.size(); ++i) acc = add(acc, l1_loss(a[i], b[i]));
    return scale(acc, 1.0 / double(a.size()));
  }

  MmGanConfig cfg_;
  nn::ParamMap pm_, pm_sty_, pm_gen_, pm_dis_;
  nn::Linear sty_fc1_, sty_fc2_, sty_fc3_;
  nn::GruCell e_mtd_gru_;
  nn::Linear e_mtd_out_;
  nn::Linear e_std_1_, e_std_2_, e_std_3_;
  nn::Linear g_dan_init_;
  nn::GruCell g_dan_gru_;
  nn::Linear g_dan_out_;
  nn::Linear e_sty_1_, e_sty_2_, e_sty_3_;
  nn::GruCell d_mov_gru_;
  nn::Linear d_mov_fc1_;
  nn::LayerNorm d_mov_ln_;
  nn::Linear d_mov_fc2_;
  nn::Linear d_dan_fc1_;
  nn::LayerNorm d_dan_ln_;
  nn::Linear d_dan_fc2_, d_dan_fc3_;
};

// ---------------------------------------------------------------------------
// Training

struct MmGanStats {
  std::vector<double> style_loss_curve;
  double style_accuracy = 0;  // on the training corpus after classifier training
  // per GAN step
  std::vector<double> gen_total, recon_m, adv_m, adv_d, kl_d, recon_s;
  std::vector<double> disc_total;
};

/// Trains the style classifier on pooled audio features (cross entropy).
inline void train_style_classifier(MmGan& model, const std::vector<PairedSequence>& corpus,
                                   MmGanStats& stats, nn::Rng& rng) {
  const auto& cfg = model.config();
  std::vector<int> seen_labels;
  for (const auto& p : corpus)
    if (std::find(seen_labels.begin(), seen_labels.end(), p.label) == seen_labels.end())
      seen_labels.push_back(p.label);
  if (seen_labels.size() < 2)
    throw insufficient_error("style classifier needs >= 2 style classes");

  nn::Adam opt({cfg.style_lr, cfg.beta1, cfg.beta2, 1e-8});
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  const int batch = std::min<int>(cfg.batch, int(corpus.size()));
  for (int step = 0; step < cfg.style_steps; ++step) {
    auto pooled = ad::Tensor::zeros(batch, kAudioFeatDim);
    std::vector<int> labels(static_cast<std::size_t>(batch));
    for (int r = 0; r < batch; ++r) {
      std::size_t i = pick(rng);
      auto p = mean_pool_audio(corpus[i].afeat);
      for (int k = 0; k < kAudioFeatDim; ++k) pooled.at(r, k) = p[std::size_t(k)];
      labels[std::size_t(r)] = corpus[i].label;
    }
    model.style_params().zero_grad();
    auto [s, logits] = model.style_forward_t(pooled);
    auto loss = ad::cross_entropy_with_logits(logits, labels);
    loss.backward();
    opt.step(model.style_params());
    stats.style_loss_curve.push_back(loss.item());
  }
  int correct = 0;
  for (const auto& p : corpus)
    if (model.style_extract(p.afeat).predicted_label == p.label) ++correct;
  stats.style_accuracy = double(correct) / double(corpus.size());
}

inline MmGanStats train_mmgan(MmGan& model, const DuVae& duvae,
                              const std::vector<PairedSequence>& corpus) {
  if (corpus.empty()) throw insufficient_error("train_mmgan: empty corpus");
  const auto& cfg = model.config();
  if (cfg.z_mov != duvae.config().z_mov)
    throw incompatible_error("train_mmgan: z_mov dim differs from the DU-VAE");
  for (const auto& p : corpus)
    if (int(p.units.size()) < cfg.n_min || int(p.units.size()) > cfg.n_max)
      throw contract_error("train_mmgan: sequence length outside configured range");

  nn::Rng rng(cfg.seed);
  MmGanStats stats;
  train_style_classifier(model, corpus, stats, rng);

  // group by sequence length so each batch is rectangular
  std::map<int, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    by_len[int(corpus[i].units.size())].push_back(i);
  std::vector<int> lens;
  for (auto& [n, v] : by_len) lens.push_back(n);

  nn::Adam opt_g({cfg.lr, cfg.beta1, cfg.beta2, 1e-8});
  nn::Adam opt_d({cfg.dis_lr > 0 ? cfg.dis_lr : cfg.lr, cfg.beta1, cfg.beta2, 1e-8});

  for (int step = 0; step < cfg.steps; ++step) {
    int n = lens[std::uniform_int_distribution<std::size_t>(0, lens.size() - 1)(rng)];
    auto& pool = by_len[n];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<std::size_t> idx(std::size_t(std::min<int>(cfg.batch, int(pool.size()))));
    for (auto& i : idx) i = pool[pick(rng)];
    auto batch = model.make_batch(duvae, corpus, idx);

    // discriminator step
    {
      auto paths = model.forward(batch, rng);
      model.discriminator_params().zero_grad();
      model.generator_params().zero_grad();
      auto d = model.discriminator_loss(batch, paths);
      d.total.backward();
      opt_d.step(model.discriminator_params());
      stats.disc_total.push_back(d.total.item());
    }
    // generator/encoder step
    {
      auto paths = model.forward(batch, rng);
      model.generator_params().zero_grad();
      model.discriminator_params().zero_grad();
      auto g = model.generator_loss(batch, paths);
      g.total.backward();
      opt_g.step(model.generator_params());
      stats.gen_total.push_back(g.total.item());
      stats.recon_m.push_back(g.recon_m);
      stats.adv_m.push_back(g.adv_m);
      stats.adv_d.push_back(g.adv_d);
      stats.kl_d.push_back(g.kl_d);
      stats.recon_s.push_back(g.recon_s);
    }
  }
  return stats;
}

}  // namespace dancegen
