#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dancegen/error.hpp"
#include "dancegen/tensor.hpp"

namespace dancegen::nn {

using ad::Tensor;

using Rng = std::mt19937_64;

inline Tensor uniform_init(int rows, int cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto t = Tensor::zeros(rows, cols, true);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

inline Tensor randn(int rows, int cols, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  auto t = Tensor::zeros(rows, cols, false);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

/// Named parameter registry shared by modules; the unit of checkpointing.
class ParamMap {
 public:
  Tensor add(const std::string& name, Tensor t) {
    for (auto& [n, p] : params_)
      if (n == name) throw contract_error("duplicate parameter: " + name);
    params_.emplace_back(name, t);
    return t;
  }

  std::vector<std::pair<std::string, Tensor>>& items() { return params_; }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return params_; }

  void zero_grad() {
    for (auto& [n, p] : params_) p.zero_grad();
  }

  std::size_t count() const { return params_.size(); }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
};

// ---------------------------------------------------------------------------
// Layers. Weight init: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).

struct Linear {
  Tensor W, b;

  Linear() = default;
  Linear(ParamMap& pm, const std::string& name, int in, int out, Rng& rng) {
    double bound = 1.0 / std::sqrt(double(in));
    W = pm.add(name + ".W", uniform_init(in, out, bound, rng));
    b = pm.add(name + ".b", uniform_init(1, out, bound, rng));
  }

  Tensor operator()(const Tensor& x) const { return ad::add(ad::matmul(x, W), b); }
};

struct LayerNorm {
  Tensor gamma, beta;

  LayerNorm() = default;
  LayerNorm(ParamMap& pm, const std::string& name, int dim) {
    gamma = pm.add(name + ".gamma", Tensor::from(std::vector<double>(std::size_t(dim), 1.0), 1, dim, true));
    beta = pm.add(name + ".beta", Tensor::zeros(1, dim, true));
  }

  Tensor operator()(const Tensor& x) const { return ad::layer_norm(x, gamma, beta); }
};

/// Standard GRU cell: update/reset gates with sigmoid, tanh candidate.
struct GruCell {
  int input_size = 0;
  int hidden_size = 0;
  Tensor Wz, Uz, bz, Wr, Ur, br, Wh, Uh, bh;

  GruCell() = default;
  GruCell(ParamMap& pm, const std::string& name, int in, int hidden, Rng& rng)
      : input_size(in), hidden_size(hidden) {
    double bi = 1.0 / std::sqrt(double(in));
    double bh_ = 1.0 / std::sqrt(double(hidden));
    Wz = pm.add(name + ".Wz", uniform_init(in, hidden, bi, rng));
    Uz = pm.add(name + ".Uz", uniform_init(hidden, hidden, bh_, rng));
    bz = pm.add(name + ".bz", Tensor::zeros(1, hidden, true));
    Wr = pm.add(name + ".Wr", uniform_init(in, hidden, bi, rng));
    Ur = pm.add(name + ".Ur", uniform_init(hidden, hidden, bh_, rng));
    br = pm.add(name + ".br", Tensor::zeros(1, hidden, true));
    Wh = pm.add(name + ".Wh", uniform_init(in, hidden, bi, rng));
    Uh = pm.add(name + ".Uh", uniform_init(hidden, hidden, bh_, rng));
    bh = pm.add(name + ".bh", Tensor::zeros(1, hidden, true));
  }

  Tensor step(const Tensor& x, const Tensor& h) const {
    using namespace ad;
    if (x.cols() != input_size || h.cols() != hidden_size)
      throw contract_error("gru_step: shape mismatch");
    Tensor z = sigmoid(add(add(matmul(x, Wz), matmul(h, Uz)), bz));
    Tensor r = sigmoid(add(add(matmul(x, Wr), matmul(h, Ur)), br));
    Tensor c = tanh_(add(add(matmul(x, Wh), matmul(mul(r, h), Uh)), bh));
    // h' = (1 - z) * h + z * c
    return add(mul(add_const(scale(z, -1.0), 1.0), h), mul(z, c));
  }

  /// Runs the cell over a sequence; returns the final hidden state.
  Tensor run(const std::vector<Tensor>& xs, int batch) const {
    Tensor h = Tensor::zeros(batch, hidden_size);
    for (const auto& x : xs) h = step(x, h);
    return h;
  }
};

// ---------------------------------------------------------------------------
// Adam with bias correction.

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(const AdamConfig& cfg = {}) : cfg_(cfg) {}

  void step(ParamMap& params) {
    if (m_.empty()) {
      for (auto& [n, p] : params.items()) {
        m_.push_back(std::vector<double>(p.data().size(), 0.0));
        v_.push_back(std::vector<double>(p.data().size(), 0.0));
      }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    std::size_t idx = 0;
    for (auto& [n, p] : params.items()) {
      auto& g = p.grad();
      auto& m = m_[idx];
      auto& v = v_[idx];
      for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        p.data()[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      }
      ++idx;
    }
  }

 private:
  AdamConfig cfg_;
  int t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// Checkpoint: binary container of named tensors (header table + contiguous
// little-endian f64 payload) plus a JSON manifest alongside.

inline void save_checkpoint(const ParamMap& params, const nlohmann::json& manifest,
                            const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw bad_input_error("cannot open for writing: " + path);
  auto w32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  f.write("DGCK", 4);
  w32(1);  // format version
  w32(std::uint32_t(params.count()));
  for (const auto& [name, p] : params.items()) {
    w32(std::uint32_t(name.size()));
    f.write(name.data(), std::streamsize(name.size()));
    w32(std::uint32_t(p.rows()));
    w32(std::uint32_t(p.cols()));
  }
  for (const auto& [name, p] : params.items())
    f.write(reinterpret_cast<const char*>(p.data().data()),
            std::streamsize(p.data().size() * sizeof(double)));
  std::ofstream mf(path + ".json");
  if (!mf) throw bad_input_error("cannot open for writing: " + path + ".json");
  mf << manifest.dump(2) << "\n";
}

/// Loads into an existing ParamMap; names and shapes must match exactly.
inline nlohmann::json load_checkpoint(ParamMap& params, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw bad_input_error("cannot open: " + path);
  auto r32 = [&]() {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  char magic[4];
  f.read(magic, 4);
  if (!f || std::string(magic, 4) != "DGCK")
    throw bad_input_error("not a checkpoint file: " + path);
  if (r32() != 1) throw incompatible_error("unknown checkpoint version: " + path);
  std::uint32_t count = r32();
  if (count != params.count())
    throw incompatible_error("checkpoint has " + std::to_string(count) +
                             " tensors, model expects " + std::to_string(params.count()));
  for (auto& [name, p] : params.items()) {
    std::uint32_t len = r32();
    std::string n(len, '\0');
    f.read(n.data(), len);
    std::uint32_t rows = r32(), cols = r32();
    if (n != name || int(rows) != p.rows() || int(cols) != p.cols())
      throw incompatible_error("checkpoint tensor " + n + " (" + std::to_string(rows) +
                               "x" + std::to_string(cols) + ") does not match model tensor " +
                               name + " (" + std::to_string(p.rows()) + "x" +
                               std::to_string(p.cols()) + ")");
  }
  for (auto& [name, p] : params.items())
    f.read(reinterpret_cast<char*>(p.data().data()),
           std::streamsize(p.data().size() * sizeof(double)));
  if (!f) throw bad_input_error("truncated checkpoint: " + path);
  nlohmann::json manifest;
  std::ifstream mf(path + ".json");
  if (mf) mf >> manifest;
  return manifest;
}

}  // namespace dancegen::nn
