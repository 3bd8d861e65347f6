#pragma once

// Dense kernels with analytic backward passes for the single graph the
// engine trains: adapter MLP -> blend -> l2 normalize -> cosine logits ->
// softmax cross-entropy. All accumulation happens in double regardless of
// the storage type.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hoso/errors.hpp"

namespace hoso::num {

inline constexpr double kDegenerateNormEps = 1e-12;

using Vec = std::vector<double>;

// Row-major matrix with explicit shape.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data has " + std::to_string(data_.size()) +
                       " entries, expected " + std::to_string(rows_ * cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

inline void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": got length " + std::to_string(got) + ", expected " +
                     std::to_string(want));
  }
}

template <typename A, typename B>
double dot(std::span<A> a, std::span<B> b) {
  require_size(b.size(), a.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

template <typename T>
double norm2(std::span<T> v) {
  return std::sqrt(dot(v, v));
}

template <typename T>
Vec to_vec(std::span<T> v) {
  return Vec(v.begin(), v.end());
}

template <typename T>
bool all_finite(std::span<T> v) {
  return std::all_of(v.begin(), v.end(), [](auto x) { return std::isfinite(static_cast<double>(x)); });
}

// ---------------------------------------------------------------------------
// l2 normalization

struct Normalized {
  Vec unit;
  double norm = 0.0;
};

template <typename T>
Normalized l2_normalize(std::span<T> v) {
  const double n = norm2(v);
  if (!(n > kDegenerateNormEps)) {
    throw DegenerateVectorError("cannot normalize vector with norm " + std::to_string(n));
  }
  Normalized out{Vec(v.size()), n};
  for (std::size_t i = 0; i < v.size(); ++i) out.unit[i] = static_cast<double>(v[i]) / n;
  return out;
}

// d(v/|v|)^T g = (I - u u^T) g / |v|
inline Vec l2_normalize_backward(const Normalized& fwd, std::span<const double> grad_unit) {
  require_size(grad_unit.size(), fwd.unit.size(), "l2_normalize_backward");
  const double radial = dot(std::span<const double>(fwd.unit), grad_unit);
  Vec g(grad_unit.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (grad_unit[i] - radial * fwd.unit[i]) / fwd.norm;
  return g;
}

// ---------------------------------------------------------------------------
// cosine logits: logits[c] = scale * <v_hat, t_c>

template <typename P>
Vec cosine_logits(std::span<const double> v_hat, const Matrix<P>& prototypes, double logit_scale) {
  require_size(v_hat.size(), prototypes.cols(), "cosine_logits");
  Vec logits(prototypes.rows());
  for (std::size_t c = 0; c < prototypes.rows(); ++c) {
    logits[c] = logit_scale * dot(prototypes.row(c), v_hat);
  }
  return logits;
}

// Gradient w.r.t. v_hat: scale * P^T g.
template <typename P>
Vec cosine_logits_backward(const Matrix<P>& prototypes, double logit_scale,
                           std::span<const double> grad_logits) {
  require_size(grad_logits.size(), prototypes.rows(), "cosine_logits_backward");
  Vec g(prototypes.cols(), 0.0);
  for (std::size_t c = 0; c < prototypes.rows(); ++c) {
    const double w = logit_scale * grad_logits[c];
    if (w == 0.0) continue;
    auto row = prototypes.row(c);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += w * static_cast<double>(row[j]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// softmax & cross-entropy

inline Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax of empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp(logits[i] - m));
  for (auto& x : p) x /= z;
  return p;
}

// Lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct XentResult {
  double loss = 0.0;
  Vec grad_logits;
};

inline XentResult softmax_xent(std::span<const double> logits, std::size_t label) {
  if (label >= logits.size()) {
    throw LabelError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  if (!all_finite(logits)) throw NumericsError("softmax_xent: non-finite logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  XentResult r{log_z - logits[label], Vec(logits.size())};
  for (std::size_t i = 0; i < logits.size(); ++i) r.grad_logits[i] = std::exp(logits[i] - log_z);
  r.grad_logits[label] -= 1.0;
  return r;
}

// ---------------------------------------------------------------------------
// linear layer y = W x + b, W is (out x in)

template <typename T, typename X>
Vec linear_forward(const Matrix<T>& w, std::span<const T> b, std::span<const X> x) {
  require_size(x.size(), w.cols(), "linear_forward input");
  require_size(b.size(), w.rows(), "linear_forward bias");
  Vec y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = static_cast<double>(b[r]) + dot(w.row(r), x);
  return y;
}

// Accumulates dL/dW += g x^T and dL/db += g; returns dL/dx = W^T g.
template <typename T, typename X>
Vec linear_backward(const Matrix<T>& w, std::span<const X> x, std::span<const double> grad_y,
                    Matrix<double>& grad_w, std::span<double> grad_b) {
  require_size(grad_y.size(), w.rows(), "linear_backward grad");
  require_size(x.size(), w.cols(), "linear_backward input");
  if (grad_w.rows() != w.rows() || grad_w.cols() != w.cols()) throw ShapeError("linear_backward grad_w shape");
  require_size(grad_b.size(), w.rows(), "linear_backward grad_b");
  Vec gx(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double g = grad_y[r];
    grad_b[r] += g;
    if (g == 0.0) continue;
    auto wr = w.row(r);
    auto gwr = grad_w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) {
      gwr[c] += g * static_cast<double>(x[c]);
      gx[c] += g * static_cast<double>(wr[c]);
    }
  }
  return gx;
}

inline Vec relu_forward(std::span<const double> x) {
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

// Subgradient 0 at exactly 0.
inline Vec relu_backward(std::span<const double> pre_activation, std::span<const double> grad_y) {
  require_size(grad_y.size(), pre_activation.size(), "relu_backward");
  Vec g(grad_y.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = pre_activation[i] > 0.0 ? grad_y[i] : 0.0;
  return g;
}

}  // namespace hoso::num
