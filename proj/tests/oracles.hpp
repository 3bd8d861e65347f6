#pragma once

// Test-only reference computations. These deliberately avoid the engine's
// kernels: long double arithmetic, direct formula evaluation, finite
// differences.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hoso/model.hpp"
#include "hoso/numerics.hpp"

namespace oracle {

using LD = long double;

inline std::vector<LD> normalize(const std::vector<LD>& v) {
  LD n = 0;
  for (auto x : v) n += x * x;
  n = std::sqrt(n);
  std::vector<LD> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

inline LD dot(const std::vector<LD>& a, const std::vector<LD>& b) {
  LD acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
std::vector<LD> widen(std::span<const T> v) {
  return std::vector<LD>(v.begin(), v.end());
}

inline std::vector<LD> softmax(const std::vector<LD>& z) {
  std::vector<LD> p(z.size());
  LD s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i]));
  for (auto& x : p) x /= s;
  return p;
}

inline LD xent(const std::vector<LD>& z, std::size_t label) { return -std::log(softmax(z)[label]); }

inline LD sigmoid(LD x) { return 1.0L / (1.0L + std::exp(-x)); }

template <typename T>
std::vector<LD> matvec(const hoso::num::Matrix<T>& w, const std::vector<LD>& x) {
  std::vector<LD> y(w.rows(), 0);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) y[r] += static_cast<LD>(w(r, c)) * x[c];
  return y;
}

// Full prediction path in long double, written from the formulas.
template <typename T, typename P>
std::vector<LD> logits(const hoso::num::Matrix<P>& protos, LD scale, const hoso::model::AdapterParams<T>& p,
                       std::span<const double> v, LD alpha, hoso::model::BlendMode mode) {
  const auto u = normalize(widen(v));
  auto h = matvec(p.w1, u);
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = std::max<LD>(0, h[i] + static_cast<LD>(p.b1[i]));
  auto a = matvec(p.w2, h);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += static_cast<LD>(p.b2[i]);
  const auto zs = [&](const std::vector<LD>& x) {
    std::vector<LD> z(protos.rows());
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = scale * dot(widen(protos.row(c)), x);
    return z;
  };
  if (mode == hoso::model::BlendMode::Feature) {
    std::vector<LD> b(u.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = (1 - alpha) * u[i] + alpha * a[i];
    return zs(normalize(b));
  }
  const auto l0 = zs(u);
  const auto l1 = zs(normalize(a));
  std::vector<LD> out(l0.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1 - alpha) * l0[c] + alpha * l1[c];
  return out;
}

// Central differences of f over every entry of x (x is perturbed in place
// and restored).
template <typename T>
std::vector<double> central_differences(std::span<T> x, double step, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = saved + static_cast<T>(step);
    const double up = f();
    x[i] = saved - static_cast<T>(step);
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

// max |a - b| / max(max |a|, max |b|): tensor-level relative error.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0 ? diff : diff / scale;
}

}  // namespace oracle
