#pragma once

// Synthetic feature banks: class centres on the unit sphere, image features
// scattered around them, text prototypes displaced by a "domain gap".

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hoso/errors.hpp"
#include "hoso/featurebank.hpp"
#include "hoso/numerics.hpp"
#include "hoso/rng.hpp"

namespace hoso::eval {

struct SyntheticSpec {
  std::size_t num_classes = 10;
  std::size_t dim = 32;
  // 1: independent random centres. Smaller values pull every centre towards
  // a shared direction, shrinking pairwise angles.
  double prototype_angle_spread = 1.0;
  bool orthogonal = false;  // Gram-Schmidt centres; needs dim >= num_classes
  double within_class_noise = 0.5;  // expected norm of the feature noise
  double domain_gap = 0.0;          // expected norm of the prototype displacement
  std::size_t train_per_class = 32;
  std::size_t test_per_class = 100;
  double logit_scale = 100.0;
  bool with_augmented = false;
  double weak_noise = 0.05;
  double strong_noise = 0.3;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<double> gaussian(Rng& rng, std::size_t dim, double norm) {
  std::vector<double> z(dim);
  const double scale = norm / std::sqrt(static_cast<double>(dim));
  for (auto& x : z) x = rng.normal() * scale;
  return z;
}

inline void store_unit(std::span<float> dst, const std::vector<double>& v) {
  const auto n = num::l2_normalize(std::span<const double>(v));
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(n.unit[i]);
}

inline std::vector<double> plus(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace detail

inline bank::FeatureBank make_synthetic_bank(const SyntheticSpec& spec) {
  const auto C = spec.num_classes;
  const auto d = spec.dim;
  if (C == 0 || d == 0) throw ConfigError("synthetic bank needs positive num_classes and dim");
  if (spec.orthogonal && d < C) {
    throw ConfigError("orthogonal centres need dim >= num_classes (" + std::to_string(d) + " < " +
                      std::to_string(C) + ")");
  }
  if (!(spec.prototype_angle_spread > 0.0 && spec.prototype_angle_spread <= 1.0)) {
    throw ConfigError("prototype_angle_spread must be in (0, 1]");
  }
  if (spec.within_class_noise < 0.0 || spec.domain_gap < 0.0) throw ConfigError("noise levels must be >= 0");

  auto rng = Rng::derive(spec.seed, Stream::Synthetic);
  std::vector<std::vector<double>> centres(C);
  if (spec.orthogonal) {
    for (std::size_t c = 0; c < C; ++c) {
      auto v = detail::gaussian(rng, d, 1.0);
      for (std::size_t p = 0; p < c; ++p) {
        const double proj = num::dot(std::span<const double>(v), std::span<const double>(centres[p]));
        for (std::size_t i = 0; i < d; ++i) v[i] -= proj * centres[p][i];
      }
      centres[c] = num::l2_normalize(std::span<const double>(v)).unit;
    }
  } else {
    const auto common = num::l2_normalize(std::span<const double>(detail::gaussian(rng, d, 1.0))).unit;
    for (std::size_t c = 0; c < C; ++c) {
      const auto g = num::l2_normalize(std::span<const double>(detail::gaussian(rng, d, 1.0))).unit;
      std::vector<double> v(d);
      for (std::size_t i = 0; i < d; ++i) {
        v[i] = spec.prototype_angle_spread * g[i] + (1.0 - spec.prototype_angle_spread) * common[i];
      }
      centres[c] = num::l2_normalize(std::span<const double>(v)).unit;
    }
  }

  bank::FeatureBank b;
  b.embedding_dim = d;
  b.num_classes = C;
  b.logit_scale = spec.logit_scale;
  b.normalized = true;
  b.backbone = "synthetic";
  b.dataset = "synthetic";
  b.prompt_template = "{}";
  for (std::size_t c = 0; c < C; ++c) b.class_names.push_back("class_" + std::to_string(c));

  b.text_prototypes = num::Matrix<float>(C, d);
  for (std::size_t c = 0; c < C; ++c) {
    detail::store_unit(b.text_prototypes.row(c), detail::plus(centres[c], detail::gaussian(rng, d, spec.domain_gap)));
  }

  auto fill = [&](bank::Split& split, std::size_t per_class, bank::AugmentedViews* views) {
    split.features = num::Matrix<float>(C * per_class, d);
    split.labels.clear();
    if (views) *views = {num::Matrix<float>(C * per_class, d), num::Matrix<float>(C * per_class, d)};
    std::size_t row = 0;
    // interleaved classes so splits are not sorted by label
    for (std::size_t i = 0; i < per_class; ++i) {
      for (std::size_t c = 0; c < C; ++c, ++row) {
        const auto x = detail::plus(centres[c], detail::gaussian(rng, d, spec.within_class_noise));
        detail::store_unit(split.features.row(row), x);
        split.labels.push_back(static_cast<std::uint32_t>(c));
        if (views) {
          const auto base = num::to_vec(std::span<const float>(split.features.row(row)));
          detail::store_unit(views->weak.row(row), detail::plus(base, detail::gaussian(rng, d, spec.weak_noise)));
          detail::store_unit(views->strong.row(row), detail::plus(base, detail::gaussian(rng, d, spec.strong_noise)));
        }
      }
    }
  };
  bank::AugmentedViews views;
  fill(b.train, spec.train_per_class, spec.with_augmented ? &views : nullptr);
  if (spec.with_augmented) b.augmented = std::move(views);
  fill(b.test, spec.test_per_class, nullptr);
  return bank::validated(std::move(b));
}

// Ten noisy classes, 16 train shots, prototypes displaced from the class
// centres and a low logit scale: an adapter can memorise the support set
// long before it generalises.
inline SyntheticSpec overfit_fixture(std::uint64_t seed) {
  SyntheticSpec s;
  s.num_classes = 10;
  s.dim = 32;
  s.within_class_noise = 3.0;
  s.domain_gap = 1.0;
  s.train_per_class = 16;
  s.test_per_class = 300;
  s.logit_scale = 10.0;
  s.seed = seed;
  return s;
}

// `count` banks of 100 classes whose feature noise rises linearly from
// noise_lo to noise_hi, so zero-shot accuracy falls from near 1 to near 0.2.
inline std::vector<SyntheticSpec> correlation_family(std::size_t count, std::uint64_t seed, double noise_lo = 1.6,
                                                     double noise_hi = 4.3) {
  if (count < 2) throw ConfigError("correlation family needs at least 2 banks");
  std::vector<SyntheticSpec> out;
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSpec s;
    s.num_classes = 100;
    s.dim = 64;
    s.within_class_noise = noise_lo + (noise_hi - noise_lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    s.train_per_class = 4;
    s.test_per_class = 20;
    s.seed = seed + i;
    out.push_back(s);
  }
  return out;
}

}  // namespace hoso::eval
