#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "dancegen/error.hpp"

namespace dancegen::ad {

struct Node {
  std::vector<double> data;
  std::vector<double> grad;
  int rows = 0;
  int cols = 0;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // scatter self.grad into parents
};

/// Row-major 2-D tensor with reverse-mode taping. Vectors are 1 x n; scalars
/// 1 x 1; batches are rows.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

  static Tensor zeros(int rows, int cols, bool requires_grad = false) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(std::size_t(rows) * std::size_t(cols), 0.0);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->data.size(), 0.0);
    return Tensor(n);
  }

  static Tensor from(std::vector<double> data, int rows, int cols,
                     bool requires_grad = false) {
    if (int(data.size()) != rows * cols)
      throw contract_error("Tensor::from: data size does not match shape");
    auto t = zeros(rows, cols, requires_grad);
    t.n_->data = std::move(data);
    return t;
  }

  static Tensor scalar(double v) { return from({v}, 1, 1); }

  bool valid() const { return n_ != nullptr; }
  int rows() const { return n_->rows; }
  int cols() const { return n_->cols; }
  int size() const { return n_->rows * n_->cols; }
  bool requires_grad() const { return n_->requires_grad; }

  std::vector<double>& data() { return n_->data; }
  const std::vector<double>& data() const { return n_->data; }
  std::vector<double>& grad() {
    if (n_->grad.empty()) n_->grad.assign(n_->data.size(), 0.0);
    return n_->grad;
  }

  double at(int i, int j) const { return n_->data[std::size_t(i) * std::size_t(n_->cols) + std::size_t(j)]; }
  double& at(int i, int j) { return n_->data[std::size_t(i) * std::size_t(n_->cols) + std::size_t(j)]; }
  double item() const {
    if (size() != 1) throw contract_error("item(): tensor is not scalar");
    return n_->data[0];
  }

  void zero_grad() { n_->grad.assign(n_->data.size(), 0.0); }

  std::shared_ptr<Node> node() const { return n_; }

  /// Reverse pass from a scalar. Accumulates into .grad of every reachable
  /// node that requires (or feeds) gradients.
  void backward() const {
    if (size() != 1) throw contract_error("backward(): loss must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::function<void(Node*)> visit = [&](Node* n) {
      if (seen.count(n)) return;
      seen.insert(n);
      for (auto& p : n->parents) visit(p.get());
      order.push_back(n);
    };
    visit(n_.get());
    for (Node* n : order)
      if (n->grad.size() != n->data.size()) n->grad.assign(n->data.size(), 0.0);
    n_->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }

  /// A copy that does not propagate gradients.
  Tensor detach() const {
    auto t = zeros(rows(), cols(), false);
    t.n_->data = n_->data;
    return t;
  }

 private:
  std::shared_ptr<Node> n_;
};

namespace detail {

inline Tensor make_op(int rows, int cols, std::vector<std::shared_ptr<Node>> parents,
                      std::function<void(Node&)> backward_fn) {
  auto t = Tensor::zeros(rows, cols, false);
  t.node()->parents = std::move(parents);
  t.node()->backward_fn = std::move(backward_fn);
  return t;
}

// broadcast index: operand with shape (br x bc) read at logical (i, j)
inline std::size_t bidx(int i, int j, int br, int bc) {
  return std::size_t(br == 1 ? 0 : i) * std::size_t(bc) + std::size_t(bc == 1 ? 0 : j);
}

inline void check_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  bool ok_rows = a.rows() == b.rows() || a.rows() == 1 || b.rows() == 1;
  bool ok_cols = a.cols() == b.cols() || a.cols() == 1 || b.cols() == 1;
  if (!ok_rows || !ok_cols) throw contract_error(std::string(op) + ": shape mismatch");
}

}  // namespace detail

// elementwise with row/col broadcasting (1 x c, r x 1, 1 x 1 operands)
inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_broadcast(a, b, "add");
  int r = std::max(a.rows(), b.rows()), c = std::max(a.cols(), b.cols());
  auto out = detail::make_op(r, c, {a.node(), b.node()}, [r, c](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) {
        double g = self.grad[std::size_t(i) * std::size_t(c) + std::size_t(j)];
        A.grad[detail::bidx(i, j, A.rows, A.cols)] += g;
        B.grad[detail::bidx(i, j, B.rows, B.cols)] += g;
      }
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.at(i, j) = a.data()[detail::bidx(i, j, a.rows(), a.cols())] +
                     b.data()[detail::bidx(i, j, b.rows(), b.cols())];
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_broadcast(a, b, "mul");
  int r = std::max(a.rows(), b.rows()), c = std::max(a.cols(), b.cols());
  auto out = detail::make_op(r, c, {a.node(), b.node()}, [r, c](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) {
        double g = self.grad[std::size_t(i) * std::size_t(c) + std::size_t(j)];
        std::size_t ia = detail::bidx(i, j, A.rows, A.cols);
        std::size_t ib = detail::bidx(i, j, B.rows, B.cols);
        A.grad[ia] += g * B.data[ib];
        B.grad[ib] += g * A.data[ia];
      }
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.at(i, j) = a.data()[detail::bidx(i, j, a.rows(), a.cols())] *
                     b.data()[detail::bidx(i, j, b.rows(), b.cols())];
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  auto out = detail::make_op(a.rows(), a.cols(), {a.node()}, [c](Node& self) {
    auto& A = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += c * self.grad[i];
  });
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = c * a.data()[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

inline Tensor add_const(const Tensor& a, double c) {
  auto out = detail::make_op(a.rows(), a.cols(), {a.node()}, [](Node& self) {
    auto& A = *self.parents[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
  });
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = a.data()[i] + c;
  return out;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw contract_error("matmul: inner dims differ");
  const int r = a.rows(), k = a.cols(), c = b.cols();
  auto out = detail::make_op(r, c, {a.node(), b.node()}, [r, k, c](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    // dA = dC * B^T
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) {
        double g = self.grad[std::size_t(i) * std::size_t(c) + std::size_t(j)];
        if (g == 0.0) continue;
        for (int m = 0; m < k; ++m)
          A.grad[std::size_t(i) * std::size_t(k) + std::size_t(m)] += g * B.data[std::size_t(m) * std::size_t(c) + std::size_t(j)];
      }
    // dB = A^T * dC
    for (int i = 0; i < r; ++i)
      for (int m = 0; m < k; ++m) {
        double av = A.data[std::size_t(i) * std::size_t(k) + std::size_t(m)];
        if (av == 0.0) continue;
        for (int j = 0; j < c; ++j)
          B.grad[std::size_t(m) * std::size_t(c) + std::size_t(j)] += av * self.grad[std::size_t(i) * std::size_t(c) + std::size_t(j)];
      }
  });
  for (int i = 0; i < r; ++i)
    for (int m = 0; m < k; ++m) {
      double av = a.data()[std::size_t(i) * std::size_t(k) + std::size_t(m)];
      if (av == 0.0) continue;
      for (int j = 0; j < c; ++j)
        out.data()[std::size_t(i) * std::size_t(c) + std::size_t(j)] += av * b.data()[std::size_t(m) * std::size_t(c) + std::size_t(j)];
    }
  return out;
}

namespace detail {

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& a, Fwd fwd, Bwd bwd_from_out) {
  auto out = make_op(a.rows(), a.cols(), {a.node()},
                     [bwd_from_out](Node& self) {
                       auto& A = *self.parents[0];
                       for (std::size_t i = 0; i < self.grad.size(); ++i)
                         A.grad[i] += self.grad[i] * bwd_from_out(A.data[i], self.data[i]);
                     });
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = fwd(a.data()[i]);
  return out;
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh_(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

inline Tensor exp_(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

inline Tensor log_(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

inline Tensor square(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

// subgradient 0 at the kink
inline Tensor abs_(const Tensor& a) {
  return detail::unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

/// log(1 + exp(x)), overflow safe. -softplus(-x) = log sigmoid(x).
inline Tensor softplus(const Tensor& a) {
  return detail::unary(
      a,
      [](double x) { return x > 30 ? x : std::log1p(std::exp(std::min(x, 30.0))); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

inline Tensor sum(const Tensor& a) {
  auto out = detail::make_op(1, 1, {a.node()}, [](Node& self) {
    auto& A = *self.parents[0];
    for (std::size_t i = 0; i < A.grad.size(); ++i) A.grad[i] += self.grad[0];
  });
  double acc = 0;
  for (double v : a.data()) acc += v;
  out.data()[0] = acc;
  return out;
}

inline Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / a.size()); }

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw contract_error("concat_cols: row mismatch");
  const int r = a.rows(), ca = a.cols(), cb = b.cols();
  auto out = detail::make_op(r, ca + cb, {a.node(), b.node()}, [r, ca, cb](Node& self) {
    auto& A = *self.parents[0];
    auto& B = *self.parents[1];
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < ca; ++j)
        A.grad[std::size_t(i) * std::size_t(ca) + std::size_t(j)] += self.grad[std::size_t(i) * std::size_t(ca + cb) + std::size_t(j)];
      for (int j = 0; j < cb; ++j)
        B.grad[std::size_t(i) * std::size_t(cb) + std::size_t(j)] += self.grad[std::size_t(i) * std::size_t(ca + cb) + std::size_t(ca + j)];
    }
  });
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < ca; ++j) out.at(i, j) = a.at(i, j);
    for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b.at(i, j);
  }
  return out;
}

inline Tensor slice_cols(const Tensor& a, int start, int len) {
  if (start < 0 || start + len > a.cols())
    throw contract_error("slice_cols: out of range");
  const int r = a.rows(), c = a.cols();
  auto out = detail::make_op(r, len, {a.node()}, [r, c, start, len](Node& self) {
    auto& A = *self.parents[0];
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < len; ++j)
        A.grad[std::size_t(i) * std::size_t(c) + std::size_t(start + j)] += self.grad[std::size_t(i) * std::size_t(len) + std::size_t(j)];
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < len; ++j) out.at(i, j) = a.at(i, start + j);
  return out;
}

/// Per-row zero mean / unit variance followed by learned affine (gamma, beta
/// are 1 x cols). Variance floored by eps.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         double eps = 1e-5) {
  if (x.cols() < 2) throw contract_error("layer_norm: last dimension must be >= 2");
  if (gamma.cols() != x.cols() || beta.cols() != x.cols())
    throw contract_error("layer_norm: affine shape mismatch");
  const int r = x.rows(), c = x.cols();
  auto out = detail::make_op(
      r, c, {x.node(), gamma.node(), beta.node()}, [r, c, eps](Node& self) {
        auto& X = *self.parents[0];
        auto& G = *self.parents[1];
        auto& B = *self.parents[2];
        for (int i = 0; i < r; ++i) {
          const double* xr = &X.data[std::size_t(i) * std::size_t(c)];
          double mu = 0, var = 0;
          for (int j = 0; j < c; ++j) mu += xr[j];
          mu /= c;
          for (int j = 0; j < c; ++j) var += (xr[j] - mu) * (xr[j] - mu);
          var /= c;
          double inv = 1.0 / std::sqrt(var + eps);
          double gd_mean = 0, gdx_mean = 0;
          std::vector<double> xh(static_cast<std::size_t>(c)), gd(static_cast<std::size_t>(c));
          for (int j = 0; j < c; ++j) {
            xh[std::size_t(j)] = (xr[j] - mu) * inv;
            double dy = self.grad[std::size_t(i) * std::size_t(c) + std::size_t(j)];
            gd[std::size_t(j)] = dy * G.data[std::size_t(j)];
            gd_mean += gd[std::size_t(j)];
            gdx_mean += gd[std::size_t(j)] * xh[std::size_t(j)];
            G.grad[std::size_t(j)] += dy * xh[std::size_t(j)];
            B.grad[std::size_t(j)] += dy;
          }
          gd_mean /= c;
          gdx_mean /= c;
          for (int j = 0; j < c; ++j)
            X.grad[std::size_t(i) * std::size_t(c) + std::size_t(j)] +=
                inv * (gd[std::size_t(j)] - gd_mean - xh[std::size_t(j)] * gdx_mean);
        }
      });
  for (int i = 0; i < r; ++i) {
    double mu = 0, var = 0;
    for (int j = 0; j < c; ++j) mu += x.at(i, j);
    mu /= c;
    for (int j = 0; j < c; ++j) var += (x.at(i, j) - mu) * (x.at(i, j) - mu);
    var /= c;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < c; ++j)
      out.at(i, j) = gamma.at(0, j) * (x.at(i, j) - mu) * inv + beta.at(0, j);
  }
  return out;
}

/// Mean softmax cross entropy over rows of logits against integer labels.
inline Tensor cross_entropy_with_logits(const Tensor& logits,
                                        const std::vector<int>& labels) {
  const int r = logits.rows(), c = logits.cols();
  if (int(labels.size()) != r)
    throw contract_error("cross_entropy: label count mismatch");
  auto labels_copy = labels;
  auto out = detail::make_op(1, 1, {logits.node()}, [r, c, labels_copy](Node& self) {
    auto& L = *self.parents[0];
    double g = self.grad[0] / r;
    for (int i = 0; i < r; ++i) {
      const double* row = &L.data[std::size_t(i) * std::size_t(c)];
      double mx = *std::max_element(row, row + c);
      double z = 0;
      for (int j = 0; j < c; ++j) z += std::exp(row[j] - mx);
      for (int j = 0; j < c; ++j) {
        double p = std::exp(row[j] - mx) / z;
        L.grad[std::size_t(i) * std::size_t(c) + std::size_t(j)] += g * (p - (j == labels_copy[std::size_t(i)] ? 1.0 : 0.0));
      }
    }
  });
  double loss = 0;
  for (int i = 0; i < r; ++i) {
    double mx = logits.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0;
    for (int j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
    loss += std::log(z) + mx - logits.at(i, labels[std::size_t(i)]);
  }
  out.data()[0] = loss / r;
  return out;
}

/// Mean absolute difference (L1) over all entries.
inline Tensor l1_loss(const Tensor& a, const Tensor& b) {
  return mean(abs_(sub(a, b)));
}

}  // namespace dancegen::ad
