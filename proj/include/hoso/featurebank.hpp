#pragma once

// On-disk feature banks and the few-shot / hold-out splits drawn from them.
//
// Directory layout:
//   manifest.json                 format_version 1, shapes, metadata
//   prototypes.f32                C x dim   little-endian float32, row-major
//   train.f32 / test.f32          N x dim
//   train.labels.u32 / test.labels.u32
//   train.weak.f32 / train.strong.f32   optional, same shape as train.f32

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hoso/errors.hpp"
#include "hoso/hash.hpp"
#include "hoso/numerics.hpp"
#include "hoso/rng.hpp"

namespace hoso::bank {

inline constexpr int kFormatVersion = 1;
inline constexpr double kPrototypeNormTolerance = 1e-5;

struct Split {
  num::Matrix<float> features;  // N x dim
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const float> feature(std::size_t i) const noexcept { return features.row(i); }
  bool operator==(const Split&) const = default;
};

struct AugmentedViews {
  num::Matrix<float> weak;  // aligned with train items
  num::Matrix<float> strong;
  bool operator==(const AugmentedViews&) const = default;
};

struct FeatureBank {
  std::size_t embedding_dim = 0;
  std::size_t num_classes = 0;
  std::vector<std::string> class_names;
  num::Matrix<float> text_prototypes;  // C x dim, unit rows
  double logit_scale = 100.0;
  bool normalized = false;  // whether the extractor already l2-normalized features
  std::string backbone;
  std::string dataset;
  std::string prompt_template;
  Split train;
  Split test;
  std::optional<AugmentedViews> augmented;

  bool has_augmented() const noexcept { return augmented.has_value(); }
  bool operator==(const FeatureBank&) const = default;
};

struct LoadOptions {
  // Renormalize prototype rows that are off unit norm instead of rejecting.
  bool auto_normalize = false;
};

namespace detail {

inline void check_matrix(const num::Matrix<float>& m, std::size_t rows, std::size_t cols,
                         const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DataError(what + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                    ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!num::all_finite(m.flat())) throw DataError(what + " contains non-finite values");
}

inline void check_labels(const std::vector<std::uint32_t>& labels, std::size_t num_classes,
                         const std::string& what) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw DataError(what + "[" + std::to_string(i) + "] = " + std::to_string(labels[i]) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::uint32_t load_le32(const unsigned char* p) noexcept {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void store_le32(unsigned char* p, std::uint32_t v) noexcept {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

inline std::vector<std::uint32_t> read_u32(const std::filesystem::path& path, std::size_t count) {
  const auto bytes = read_file(path);
  if (bytes.size() != count * 4) {
    throw FormatError(path.filename().string() + ": expected " + std::to_string(count * 4) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  std::vector<std::uint32_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = load_le32(bytes.data() + 4 * i);
  return out;
}

inline num::Matrix<float> read_f32(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
  const auto raw = read_u32(path, rows * cols);
  std::vector<float> data(raw.size());
  std::transform(raw.begin(), raw.end(), data.begin(), [](std::uint32_t u) { return std::bit_cast<float>(u); });
  return {rows, cols, std::move(data)};
}

inline void write_u32(const std::filesystem::path& path, std::span<const std::uint32_t> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) store_le32(bytes.data() + 4 * i, values[i]);
  write_file(path, bytes);
}

inline void write_f32(const std::filesystem::path& path, std::span<const float> values) {
  std::vector<std::uint32_t> raw(values.size());
  std::transform(values.begin(), values.end(), raw.begin(), [](float f) { return std::bit_cast<std::uint32_t>(f); });
  write_u32(path, raw);
}

template <typename T>
T manifest_field(const nlohmann::json& m, const char* key) {
  if (!m.contains(key)) throw FormatError(std::string("manifest.json: missing field '") + key + "'");
  try {
    return m.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest.json: field '") + key + "': " + e.what());
  }
}

}  // namespace detail

// Checks every invariant. With auto_normalize, off-norm prototype rows are
// fixed in place rather than rejected.
inline void validate(FeatureBank& bank, const LoadOptions& opts = {}) {
  if (bank.embedding_dim == 0) throw DataError("embedding_dim must be positive");
  if (bank.num_classes == 0) throw DataError("num_classes must be positive");
  if (bank.class_names.size() != bank.num_classes) {
    throw DataError("class_names has " + std::to_string(bank.class_names.size()) + " entries, expected " +
                    std::to_string(bank.num_classes));
  }
  if (!(bank.logit_scale >= 0.0) || !std::isfinite(bank.logit_scale)) {
    throw DataError("logit_scale must be finite and non-negative");
  }
  const auto d = bank.embedding_dim;
  detail::check_matrix(bank.text_prototypes, bank.num_classes, d, "prototypes");
  for (std::size_t c = 0; c < bank.num_classes; ++c) {
    auto row = bank.text_prototypes.row(c);
    const double n = num::norm2(std::span<const float>(row));
    if (std::abs(n - 1.0) <= kPrototypeNormTolerance) continue;
    if (!opts.auto_normalize || !(n > num::kDegenerateNormEps)) {
      throw DataError("prototype row " + std::to_string(c) + " has norm " + std::to_string(n));
    }
    for (auto& x : row) x = static_cast<float>(x / n);
  }
  for (auto* split : {&bank.train, &bank.test}) {
    const std::string name = split == &bank.train ? "train" : "test";
    detail::check_matrix(split->features, split->labels.size(), d, name + " features");
    detail::check_labels(split->labels, bank.num_classes, name + " labels");
  }
  if (bank.augmented) {
    detail::check_matrix(bank.augmented->weak, bank.train.size(), d, "train.weak");
    detail::check_matrix(bank.augmented->strong, bank.train.size(), d, "train.strong");
  }
}

inline FeatureBank validated(FeatureBank bank, const LoadOptions& opts = {}) {
  validate(bank, opts);
  return bank;
}

inline nlohmann::json manifest_json(const FeatureBank& bank) {
  return {
      {"format_version", kFormatVersion},
      {"embedding_dim", bank.embedding_dim},
      {"num_classes", bank.num_classes},
      {"class_names", bank.class_names},
      {"logit_scale", bank.logit_scale},
      {"normalized", bank.normalized},
      {"counts", {{"train", bank.train.size()}, {"test", bank.test.size()}}},
      {"has_augmented", bank.has_augmented()},
      {"backbone", bank.backbone},
      {"dataset", bank.dataset},
      {"template", bank.prompt_template},
  };
}

inline void write_bank(const FeatureBank& bank, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string manifest = manifest_json(bank).dump(2) + "\n";
  detail::write_file(dir / "manifest.json",
                     {reinterpret_cast<const unsigned char*>(manifest.data()), manifest.size()});
  detail::write_f32(dir / "prototypes.f32", bank.text_prototypes.flat());
  detail::write_f32(dir / "train.f32", bank.train.features.flat());
  detail::write_u32(dir / "train.labels.u32", bank.train.labels);
  detail::write_f32(dir / "test.f32", bank.test.features.flat());
  detail::write_u32(dir / "test.labels.u32", bank.test.labels);
  if (bank.augmented) {
    detail::write_f32(dir / "train.weak.f32", bank.augmented->weak.flat());
    detail::write_f32(dir / "train.strong.f32", bank.augmented->strong.flat());
  }
}

inline FeatureBank load_bank(const std::filesystem::path& dir, const LoadOptions& opts = {}) {
  const auto raw = detail::read_file(dir / "manifest.json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  if (!m.is_object()) throw FormatError("manifest.json: not an object");
  const int version = detail::manifest_field<int>(m, "format_version");
  if (version != kFormatVersion) {
    throw FormatError("manifest.json: unsupported format_version " + std::to_string(version));
  }

  FeatureBank bank;
  bank.embedding_dim = detail::manifest_field<std::size_t>(m, "embedding_dim");
  bank.num_classes = detail::manifest_field<std::size_t>(m, "num_classes");
  bank.class_names = detail::manifest_field<std::vector<std::string>>(m, "class_names");
  bank.logit_scale = detail::manifest_field<double>(m, "logit_scale");
  bank.normalized = detail::manifest_field<bool>(m, "normalized");
  bank.backbone = m.value("backbone", "");
  bank.dataset = m.value("dataset", "");
  bank.prompt_template = m.value("template", "");
  const auto counts = detail::manifest_field<nlohmann::json>(m, "counts");
  const auto n_train = detail::manifest_field<std::size_t>(counts, "train");
  const auto n_test = detail::manifest_field<std::size_t>(counts, "test");
  const bool has_aug = detail::manifest_field<bool>(m, "has_augmented");
  if (bank.embedding_dim == 0 || bank.num_classes == 0) {
    throw FormatError("manifest.json: embedding_dim and num_classes must be positive");
  }

  const auto d = bank.embedding_dim;
  bank.text_prototypes = detail::read_f32(dir / "prototypes.f32", bank.num_classes, d);
  bank.train.features = detail::read_f32(dir / "train.f32", n_train, d);
  bank.train.labels = detail::read_u32(dir / "train.labels.u32", n_train);
  bank.test.features = detail::read_f32(dir / "test.f32", n_test, d);
  bank.test.labels = detail::read_u32(dir / "test.labels.u32", n_test);
  if (has_aug) {
    bank.augmented = AugmentedViews{detail::read_f32(dir / "train.weak.f32", n_train, d),
                                    detail::read_f32(dir / "train.strong.f32", n_train, d)};
  }
  validate(bank, opts);
  return bank;
}

inline std::uint64_t content_hash(const FeatureBank& bank) {
  Fnv1a h;
  h.value(bank.embedding_dim);
  h.value(bank.num_classes);
  h.values(bank.text_prototypes.flat());
  h.values(bank.train.features.flat());
  h.values(std::span<const std::uint32_t>(bank.train.labels));
  h.values(bank.test.features.flat());
  h.values(std::span<const std::uint32_t>(bank.test.labels));
  return h.digest();
}

// ---------------------------------------------------------------------------
// few-shot splits

// Items refer to bank.train rows. Grouped by class, ascending.
struct SupportSet {
  std::vector<std::size_t> indices;
  std::vector<std::uint32_t> labels;
  std::size_t shots_per_class = 0;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return indices.size(); }
  bool operator==(const SupportSet&) const = default;
};

struct HoldoutCache {
  std::vector<std::size_t> indices;
  std::vector<std::uint32_t> labels;
  std::size_t per_class = 0;

  std::size_t size() const noexcept { return indices.size(); }
  bool operator==(const HoldoutCache&) const = default;
};

inline bool is_standard_shot_count(std::size_t k) noexcept {
  return k == 1 || k == 2 || k == 4 || k == 8 || k == 16;
}

inline std::vector<std::vector<std::size_t>> indices_by_class(std::span<const std::uint32_t> labels,
                                                              std::size_t num_classes) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  return by_class;
}

// Draws k rows per class from a split. Class c uses its own stream derived
// from (seed, c), so the pick for one class does not depend on the others.
inline SupportSet sample_per_class(const Split& split, std::size_t num_classes, std::size_t k, std::uint64_t seed,
                                   std::span<const std::string> class_names = {}) {
  if (k == 0) throw ConfigError("shots per class must be at least 1");
  auto by_class = indices_by_class(split.labels, num_classes);
  SupportSet s;
  s.shots_per_class = k;
  s.num_classes = num_classes;
  s.indices.reserve(k * num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& pool = by_class[c];
    if (pool.size() < k) {
      const auto name = c < class_names.size() ? class_names[c] : std::to_string(c);
      throw InsufficientShotsError("class '" + name + "' (" + std::to_string(c) + ") has " +
                                   std::to_string(pool.size()) + " items, " + std::to_string(k) +
                                   " shots requested");
    }
    auto rng = Rng::derive(seed, Stream::FewShot, c);
    rng.shuffle(std::span<std::size_t>(pool));
    for (std::size_t i = 0; i < k; ++i) {
      s.indices.push_back(pool[i]);
      s.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  return s;
}

inline SupportSet sample_few_shot(const FeatureBank& bank, std::size_t k, std::uint64_t seed) {
  if (k > 0 && !is_standard_shot_count(k)) {
    std::clog << "warning: " << k << " shots per class is outside the usual {1,2,4,8,16}\n";
  }
  return sample_per_class(bank.train, bank.num_classes, k, seed, bank.class_names);
}

struct CacheSplit {
  SupportSet reduced;
  HoldoutCache cache;
};

inline CacheSplit split_hoso_cache(const SupportSet& support, std::size_t cache_per_class,
                                   bool remove_from_support, std::uint64_t seed) {
  const std::size_t k = support.shots_per_class;
  if (cache_per_class == 0) throw ConfigError("cache_per_class must be at least 1");
  if (remove_from_support && cache_per_class >= k) {
    throw ConfigError("cannot hold " + std::to_string(cache_per_class) + " shot(s) out of " + std::to_string(k));
  }
  if (cache_per_class > k) {
    throw ConfigError("cache_per_class " + std::to_string(cache_per_class) + " exceeds " + std::to_string(k) +
                      " shots");
  }
  // positions within the support, per class, in support order
  std::vector<std::vector<std::size_t>> positions(support.num_classes);
  for (std::size_t i = 0; i < support.size(); ++i) positions[support.labels[i]].push_back(i);

  CacheSplit out;
  out.cache.per_class = cache_per_class;
  std::vector<bool> cached(support.size(), false);
  for (std::size_t c = 0; c < support.num_classes; ++c) {
    auto& pos = positions[c];
    if (pos.size() != k) {
      throw DataError("support class " + std::to_string(c) + " has " + std::to_string(pos.size()) +
                      " items, expected " + std::to_string(k));
    }
    auto rng = Rng::derive(seed, Stream::Cache, c);
    rng.shuffle(std::span<std::size_t>(pos));
    for (std::size_t i = 0; i < cache_per_class; ++i) {
      cached[pos[i]] = true;
      out.cache.indices.push_back(support.indices[pos[i]]);
      out.cache.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  out.reduced.num_classes = support.num_classes;
  if (!remove_from_support) {
    out.reduced = support;
    return out;
  }
  out.reduced.shots_per_class = k - cache_per_class;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (cached[i]) continue;
    out.reduced.indices.push_back(support.indices[i]);
    out.reduced.labels.push_back(support.labels[i]);
  }
  return out;
}

}  // namespace hoso::bank
