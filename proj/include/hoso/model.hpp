#pragma once

// Prediction function: a bottleneck adapter g(v), a bounded blending ratio
// alpha and the frozen zero-shot head.
//
//   u      = v / |v|
//   a      = W2 relu(W1 u + b1) + b2
//   Feature blend: logits = s * P normalize((1 - alpha) u + alpha a)
//   Logit blend:   logits = (1 - alpha) s P u + alpha s P normalize(a)
//   alpha  = 0.8 sigmoid(alpha_logit) + 0.1   (learnable methods)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoso/errors.hpp"
#include "hoso/featurebank.hpp"
#include "hoso/hash.hpp"
#include "hoso/numerics.hpp"
#include "hoso/rng.hpp"

namespace hoso::model {

inline constexpr std::size_t kReductionFactor = 4;
inline constexpr double kAlphaLow = 0.1;
inline constexpr double kAlphaSpan = 0.8;

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Strictly inside (0.1, 0.9), also where the sum would round onto a bound.
inline double alpha_from_logit(double alpha_logit) noexcept {
  static const double lo = std::nextafter(kAlphaLow, 1.0);
  static const double hi = std::nextafter(kAlphaLow + kAlphaSpan, 0.0);
  return std::clamp(sigmoid(alpha_logit) * kAlphaSpan + kAlphaLow, lo, hi);
}

// d alpha / d alpha_logit
inline double alpha_derivative(double alpha_logit) noexcept {
  const double s = sigmoid(alpha_logit);
  return kAlphaSpan * s * (1.0 - s);
}

// Inverse of alpha_from_logit on the open interval (0.1, 0.9).
inline double logit_from_alpha(double alpha) {
  if (!(alpha > kAlphaLow && alpha < kAlphaLow + kAlphaSpan)) {
    throw ConfigError("alpha " + std::to_string(alpha) + " is outside the learnable range (0.1, 0.9)");
  }
  const double p = (alpha - kAlphaLow) / kAlphaSpan;
  return std::log(p / (1.0 - p));
}

enum class BlendMode { Feature, Logit };

inline const char* to_string(BlendMode m) noexcept { return m == BlendMode::Feature ? "feature" : "logit"; }

inline BlendMode blend_mode_from_string(const std::string& s) {
  if (s == "feature") return BlendMode::Feature;
  if (s == "logit") return BlendMode::Logit;
  throw ConfigError("unknown blend mode '" + s + "' (expected feature|logit)");
}

template <typename T = float>
struct AdapterParams {
  num::Matrix<T> w1;  // hidden x dim
  std::vector<T> b1;  // hidden
  num::Matrix<T> w2;  // dim x hidden
  std::vector<T> b2;  // dim
  T alpha_logit{};

  AdapterParams() = default;
  explicit AdapterParams(std::size_t dim) {
    if (dim < kReductionFactor || dim % kReductionFactor != 0) {
      throw ShapeError("embedding dim " + std::to_string(dim) + " is not a positive multiple of " +
                       std::to_string(kReductionFactor));
    }
    const std::size_t h = dim / kReductionFactor;
    w1 = num::Matrix<T>(h, dim);
    b1.assign(h, T{});
    w2 = num::Matrix<T>(dim, h);
    b2.assign(dim, T{});
  }

  std::size_t dim() const noexcept { return w1.cols(); }
  std::size_t hidden() const noexcept { return w1.rows(); }

  // Trainable scalars including alpha_logit.
  std::size_t parameter_count() const noexcept { return w1.size() + b1.size() + w2.size() + b2.size() + 1; }

  // Checksum of the adapter weights only (psi), excluding alpha_logit.
  std::uint64_t psi_checksum() const noexcept {
    Fnv1a h;
    h.values(w1.flat());
    h.values(std::span<const T>(b1));
    h.values(w2.flat());
    h.values(std::span<const T>(b2));
    return h.digest();
  }

  bool operator==(const AdapterParams&) const = default;
};

// W ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
template <typename T = float>
AdapterParams<T> init_adapter(std::size_t dim, std::uint64_t seed, double alpha_logit = 0.0) {
  AdapterParams<T> p(dim);
  auto rng = Rng::derive(seed, Stream::Init);
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(p.dim()));
  for (auto& w : p.w1.flat()) w = static_cast<T>(rng.uniform(-bound1, bound1));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(p.hidden()));
  for (auto& w : p.w2.flat()) w = static_cast<T>(rng.uniform(-bound2, bound2));
  p.alpha_logit = static_cast<T>(alpha_logit);
  return p;
}

struct Gradients {
  num::Matrix<double> w1, w2;
  num::Vec b1, b2;
  double alpha = 0.0;        // dL/d alpha
  double alpha_logit = 0.0;  // dL/d alpha_logit

  Gradients() = default;
  template <typename T>
  explicit Gradients(const AdapterParams<T>& p)
      : w1(p.w1.rows(), p.w1.cols()), w2(p.w2.rows(), p.w2.cols()), b1(p.b1.size()), b2(p.b2.size()) {}

  void scale(double s) noexcept {
    for (auto& g : w1.flat()) g *= s;
    for (auto& g : w2.flat()) g *= s;
    for (auto& g : b1) g *= s;
    for (auto& g : b2) g *= s;
    alpha *= s;
    alpha_logit *= s;
  }
};

// Frozen classification head: text prototypes and temperature.
struct Head {
  const num::Matrix<float>& prototypes;
  double logit_scale;

  static Head of(const bank::FeatureBank& b) noexcept { return {b.text_prototypes, b.logit_scale}; }
  std::size_t num_classes() const noexcept { return prototypes.rows(); }
};

// Either a fixed blending ratio or alpha_from_logit(params.alpha_logit).
template <typename T = float>
struct Model {
  AdapterParams<T> params;
  BlendMode mode = BlendMode::Feature;
  std::optional<double> fixed_alpha;
  std::uint64_t init_seed = 0;

  double alpha() const noexcept {
    return fixed_alpha ? *fixed_alpha : alpha_from_logit(static_cast<double>(params.alpha_logit));
  }
  bool learnable_alpha() const noexcept { return !fixed_alpha.has_value(); }
};

// ---------------------------------------------------------------------------
// forward pieces

struct AdapterTape {
  num::Vec pre;     // W1 u + b1
  num::Vec hidden;  // relu(pre)
  num::Vec out;     // W2 hidden + b2
};

template <typename T>
AdapterTape adapter_forward_tape(const AdapterParams<T>& p, std::span<const double> u) {
  AdapterTape t;
  t.pre = num::linear_forward(p.w1, std::span<const T>(p.b1), u);
  t.hidden = num::relu_forward(t.pre);
  t.out = num::linear_forward(p.w2, std::span<const T>(p.b2), std::span<const double>(t.hidden));
  return t;
}

template <typename T, typename X>
num::Vec adapter_forward(const AdapterParams<T>& p, std::span<const X> v) {
  num::require_size(v.size(), p.dim(), "adapter_forward");
  const auto x = num::to_vec(v);
  return adapter_forward_tape(p, std::span<const double>(x)).out;
}

template <typename X>
num::Vec zero_shot_logits(const Head& head, std::span<const X> v) {
  const auto u = num::l2_normalize(v);
  return num::cosine_logits(std::span<const double>(u.unit), head.prototypes, head.logit_scale);
}

// Blend a frozen feature v with an adapter output. v is normalized here;
// v_adapt is used as given (Feature mode) or normalized (Logit mode).
template <typename X>
num::Vec blend(std::span<const X> v, std::span<const double> v_adapt, double alpha, BlendMode mode,
               const Head& head) {
  num::require_size(v_adapt.size(), v.size(), "blend");
  const auto u = num::l2_normalize(v);
  if (mode == BlendMode::Feature) {
    num::Vec mixed(u.unit.size());
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = (1.0 - alpha) * u.unit[i] + alpha * v_adapt[i];
    const auto b = num::l2_normalize(std::span<const double>(mixed));
    return num::cosine_logits(std::span<const double>(b.unit), head.prototypes, head.logit_scale);
  }
  const auto zs = num::cosine_logits(std::span<const double>(u.unit), head.prototypes, head.logit_scale);
  const auto an = num::l2_normalize(v_adapt);
  const auto ad = num::cosine_logits(std::span<const double>(an.unit), head.prototypes, head.logit_scale);
  num::Vec out(zs.size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = (1.0 - alpha) * zs[c] + alpha * ad[c];
  return out;
}

// ---------------------------------------------------------------------------
// recorded forward / analytic backward

// Activations of one forward pass; single use.
class GradTape {
 public:
  num::Vec logits;

  double alpha() const noexcept { return alpha_; }

 private:
  template <typename T, typename X>
  friend GradTape forward(const Head&, const AdapterParams<T>&, std::span<const X>, double, BlendMode);
  template <typename T>
  friend void model_backward(GradTape&, const Head&, const AdapterParams<T>&, std::span<const double>,
                             Gradients&);

  BlendMode mode_ = BlendMode::Feature;
  double alpha_ = 0.0;
  num::Normalized input_;
  AdapterTape adapter_;
  num::Normalized blended_;     // Feature mode
  num::Normalized adapt_unit_;  // Logit mode
  num::Vec zs_logits_, adapt_logits_;
  bool consumed_ = false;
};

template <typename T, typename X>
GradTape forward(const Head& head, const AdapterParams<T>& p, std::span<const X> v, double alpha,
                 BlendMode mode) {
  num::require_size(v.size(), p.dim(), "forward");
  GradTape t;
  t.mode_ = mode;
  t.alpha_ = alpha;
  t.input_ = num::l2_normalize(v);
  const std::span<const double> u(t.input_.unit);
  t.adapter_ = adapter_forward_tape(p, u);
  const auto& a = t.adapter_.out;
  if (mode == BlendMode::Feature) {
    num::Vec mixed(u.size());
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = (1.0 - alpha) * u[i] + alpha * a[i];
    t.blended_ = num::l2_normalize(std::span<const double>(mixed));
    t.logits = num::cosine_logits(std::span<const double>(t.blended_.unit), head.prototypes, head.logit_scale);
  } else {
    t.adapt_unit_ = num::l2_normalize(std::span<const double>(a));
    t.zs_logits_ = num::cosine_logits(u, head.prototypes, head.logit_scale);
    t.adapt_logits_ =
        num::cosine_logits(std::span<const double>(t.adapt_unit_.unit), head.prototypes, head.logit_scale);
    t.logits.resize(t.zs_logits_.size());
    for (std::size_t c = 0; c < t.logits.size(); ++c) {
      t.logits[c] = (1.0 - alpha) * t.zs_logits_[c] + alpha * t.adapt_logits_[c];
    }
  }
  return t;
}

// Accumulates dL/d(psi, alpha, alpha_logit) into grads. The prototypes are
// frozen and receive no gradient.
template <typename T>
void model_backward(GradTape& tape, const Head& head, const AdapterParams<T>& p,
                    std::span<const double> grad_logits, Gradients& grads) {
  if (tape.consumed_) throw TapeError("backward called twice on the same tape");
  tape.consumed_ = true;
  num::require_size(grad_logits.size(), tape.logits.size(), "model_backward");
  const double alpha = tape.alpha_;
  const auto& u = tape.input_.unit;
  const auto& a = tape.adapter_.out;
  num::Vec grad_a(a.size());
  double grad_alpha = 0.0;

  if (tape.mode_ == BlendMode::Feature) {
    const auto g_unit = num::cosine_logits_backward(head.prototypes, head.logit_scale, grad_logits);
    const auto g_mixed = num::l2_normalize_backward(tape.blended_, g_unit);
    for (std::size_t i = 0; i < a.size(); ++i) {
      grad_a[i] = alpha * g_mixed[i];
      grad_alpha += g_mixed[i] * (a[i] - u[i]);
    }
  } else {
    for (std::size_t c = 0; c < grad_logits.size(); ++c) {
      grad_alpha += grad_logits[c] * (tape.adapt_logits_[c] - tape.zs_logits_[c]);
    }
    num::Vec scaled(grad_logits.size());
    for (std::size_t c = 0; c < scaled.size(); ++c) scaled[c] = alpha * grad_logits[c];
    const auto g_unit = num::cosine_logits_backward(head.prototypes, head.logit_scale, scaled);
    grad_a = num::l2_normalize_backward(tape.adapt_unit_, g_unit);
  }

  const auto g_hidden = num::linear_backward(p.w2, std::span<const double>(tape.adapter_.hidden),
                                             std::span<const double>(grad_a), grads.w2, grads.b2);
  const auto g_pre = num::relu_backward(tape.adapter_.pre, g_hidden);
  num::linear_backward(p.w1, std::span<const double>(u), std::span<const double>(g_pre), grads.w1, grads.b1);

  grads.alpha += grad_alpha;
  grads.alpha_logit += grad_alpha * alpha_derivative(static_cast<double>(p.alpha_logit));
}

// ---------------------------------------------------------------------------
// inference

struct Prediction {
  num::Vec probs;
  std::size_t label = 0;
};

inline Prediction from_logits(const num::Vec& logits) {
  Prediction out{num::softmax(logits), 0};
  out.label = num::argmax(logits);
  return out;
}

template <typename T, typename X>
num::Vec model_logits(const Head& head, const Model<T>& m, std::span<const X> v) {
  const auto n = num::l2_normalize(v);
  const auto adapted = adapter_forward(m.params, std::span<const double>(n.unit));
  return blend(v, std::span<const double>(adapted), m.alpha(), m.mode, head);
}

template <typename T, typename X>
Prediction predict(const Head& head, const Model<T>& m, std::span<const X> v) {
  return from_logits(model_logits(head, m, v));
}

// ---------------------------------------------------------------------------
// serialization: adapter.f32 (W1, b1, W2, b2 row-major) + model.json

inline void save_model(const Model<float>& m, const std::filesystem::path& dir) {
  std::vector<float> flat;
  const auto& p = m.params;
  flat.reserve(p.parameter_count() - 1);
  flat.insert(flat.end(), p.w1.flat().begin(), p.w1.flat().end());
  flat.insert(flat.end(), p.b1.begin(), p.b1.end());
  flat.insert(flat.end(), p.w2.flat().begin(), p.w2.flat().end());
  flat.insert(flat.end(), p.b2.begin(), p.b2.end());
  std::filesystem::create_directories(dir);
  bank::detail::write_f32(dir / "adapter.f32", flat);
  nlohmann::json j = {
      {"alpha_logit", static_cast<double>(p.alpha_logit)},
      {"alpha", m.alpha()},
      {"fixed_alpha", m.fixed_alpha ? nlohmann::json(*m.fixed_alpha) : nlohmann::json(nullptr)},
      {"mode", to_string(m.mode)},
      {"embedding_dim", p.dim()},
      {"hidden_dim", p.hidden()},
      {"init_seed", m.init_seed},
  };
  const std::string text = j.dump(2) + "\n";
  bank::detail::write_file(dir / "model.json", {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

inline Model<float> load_model(const std::filesystem::path& dir) {
  const auto raw = bank::detail::read_file(dir / "model.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("model.json: " + std::string(e.what()));
  }
  Model<float> m;
  const auto dim = bank::detail::manifest_field<std::size_t>(j, "embedding_dim");
  m.params = AdapterParams<float>(dim);
  m.mode = blend_mode_from_string(bank::detail::manifest_field<std::string>(j, "mode"));
  m.init_seed = j.value("init_seed", std::uint64_t{0});
  m.params.alpha_logit = static_cast<float>(bank::detail::manifest_field<double>(j, "alpha_logit"));
  if (j.contains("fixed_alpha") && !j["fixed_alpha"].is_null()) m.fixed_alpha = j["fixed_alpha"].get<double>();
  auto& p = m.params;
  const auto flat = bank::detail::read_f32(dir / "adapter.f32", 1, p.parameter_count() - 1);
  auto it = flat.flat().begin();
  auto take = [&it](std::span<float> dst) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  take(p.w1.flat());
  take(p.b1);
  take(p.w2.flat());
  take(p.b2);
  return m;
}

}  // namespace hoso::model
