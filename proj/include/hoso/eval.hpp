#pragma once

// Analyses built on the trainers: one-shot vs full-test correlation, alpha
// grid search (test-set oracle), per-class alpha sweeps, overfit gaps, and
// the CSV artefacts they produce.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hoso/errors.hpp"
#include "hoso/evaluate.hpp"
#include "hoso/featurebank.hpp"
#include "hoso/parallel.hpp"
#include "hoso/synthetic.hpp"
#include "hoso/trainers.hpp"

namespace hoso::eval {

// Sample Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("pearson: length mismatch");
  if (x.size() < 2) return std::nullopt;
  const auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
  };
  if (constant(x) || constant(y)) return std::nullopt;
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct CorrelationResult {
  std::vector<double> one_shot_acc;
  std::vector<double> full_acc;
  std::optional<double> r;  // undefined when one-shot accuracies are constant
};

inline std::uint64_t run_seed(std::uint64_t seed, std::size_t run) noexcept {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(run) + 1));
}

// Zero-shot accuracy on one item per class versus the full test split, for
// `runs` independent draws. The single shot comes from the train pool
// unless from_test is set.
inline CorrelationResult one_shot_correlation(const bank::FeatureBank& bank, std::size_t runs, std::uint64_t seed,
                                              bool from_test = false) {
  if (runs < 2) throw ConfigError("one_shot_correlation needs at least 2 runs");
  const auto zs = zero_shot_classifier(bank);
  const double full = evaluate(bank, zs).accuracy;
  const auto& pool = from_test ? bank.test : bank.train;
  CorrelationResult out;
  for (std::size_t run = 0; run < runs; ++run) {
    const auto shot = bank::sample_per_class(pool, bank.num_classes, 1, run_seed(seed, run), bank.class_names);
    out.one_shot_acc.push_back(evaluate_items(pool, shot.indices, bank.num_classes, zs).accuracy);
    out.full_acc.push_back(full);
  }
  out.r = pearson(out.one_shot_acc, out.full_acc);
  return out;
}

// One-shot/full pairs from several banks pooled into a single correlation.
inline CorrelationResult pooled_correlation(std::span<const bank::FeatureBank> banks, std::size_t runs,
                                            std::uint64_t seed, bool from_test = false) {
  CorrelationResult out;
  for (std::size_t b = 0; b < banks.size(); ++b) {
    const auto one = one_shot_correlation(banks[b], runs, run_seed(seed, b), from_test);
    out.one_shot_acc.insert(out.one_shot_acc.end(), one.one_shot_acc.begin(), one.one_shot_acc.end());
    out.full_acc.insert(out.full_acc.end(), one.full_acc.begin(), one.full_acc.end());
  }
  out.r = pearson(out.one_shot_acc, out.full_acc);
  return out;
}

struct GridRow {
  double alpha = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_class;
};

// Selecting alpha on test accuracy violates the validation-free protocol;
// results are tagged as an oracle wherever they are written.
struct GridResult {
  static constexpr const char* kLabel = "ORACLE";
  std::vector<GridRow> rows;  // candidate order
  double best_alpha = 0.0;
  double best_accuracy = 0.0;
};

inline GridResult grid_search_alpha(const bank::FeatureBank& bank, train::TrainConfig cfg,
                                    std::span<const double> candidates, std::size_t jobs = 1) {
  if (candidates.empty()) throw ConfigError("alpha grid is empty");
  for (double a : candidates) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha candidate " + std::to_string(a) + " outside [0, 1]");
  }
  if (bank.test.size() == 0) throw ConfigError("grid search needs test items");
  cfg.method = train::Method::Fixed;
  GridResult out;
  out.rows.resize(candidates.size());
  parallel_for(candidates.size(), jobs, [&](std::size_t i) {
    auto c = cfg;
    c.fixed_alpha = candidates[i];
    const auto res = train::train_fixed_alpha(bank, c);
    out.rows[i] = {candidates[i], *res.report.test_accuracy, res.report.per_class_accuracy};
  });
  // ties go to the lowest alpha
  out.best_alpha = out.rows.front().alpha;
  out.best_accuracy = out.rows.front().accuracy;
  for (const auto& row : out.rows) {
    if (row.accuracy > out.best_accuracy || (row.accuracy == out.best_accuracy && row.alpha < out.best_alpha)) {
      out.best_alpha = row.alpha;
      out.best_accuracy = row.accuracy;
    }
  }
  return out;
}

struct PerClassSweep {
  std::vector<double> alphas;
  num::Matrix<double> accuracy;  // class x alpha
  std::vector<double> overall;   // per alpha
  std::vector<std::size_t> class_counts;
};

inline PerClassSweep per_class_alpha_sweep(const bank::FeatureBank& bank, const train::TrainConfig& cfg,
                                           std::span<const double> alphas, std::size_t jobs = 1) {
  const auto grid = grid_search_alpha(bank, cfg, alphas, jobs);
  PerClassSweep out;
  out.alphas.assign(alphas.begin(), alphas.end());
  out.accuracy = num::Matrix<double>(bank.num_classes, alphas.size());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    out.overall.push_back(grid.rows[a].accuracy);
    for (std::size_t c = 0; c < bank.num_classes; ++c) out.accuracy(c, a) = grid.rows[a].per_class[c];
  }
  out.class_counts.assign(bank.num_classes, 0);
  for (auto l : bank.test.labels) ++out.class_counts[l];
  return out;
}

inline std::vector<double> overfit_gap(std::span<const double> train_acc, std::span<const double> test_acc) {
  if (train_acc.size() != test_acc.size()) {
    throw ShapeError("gap traces differ in length: " + std::to_string(train_acc.size()) + " vs " +
                     std::to_string(test_acc.size()));
  }
  std::vector<double> gap(train_acc.size());
  for (std::size_t e = 0; e < gap.size(); ++e) gap[e] = train_acc[e] - test_acc[e];
  return gap;
}

// ---------------------------------------------------------------------------
// CSV artefacts

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  return out;
}

}  // namespace detail

inline void write_grid_csv(const GridResult& g, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "alpha,accuracy\n";
  for (const auto& r : g.rows) out << r.alpha << ',' << r.accuracy << '\n';
}

inline void write_per_class_csv(const PerClassSweep& s, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "class,alpha,accuracy\n";
  for (std::size_t c = 0; c < s.accuracy.rows(); ++c) {
    for (std::size_t a = 0; a < s.alphas.size(); ++a) out << c << ',' << s.alphas[a] << ',' << s.accuracy(c, a) << '\n';
  }
}

inline void write_corr_csv(const CorrelationResult& r, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "run,one_shot_acc,full_acc\n";
  for (std::size_t i = 0; i < r.one_shot_acc.size(); ++i) {
    out << i << ',' << r.one_shot_acc[i] << ',' << r.full_acc[i] << '\n';
  }
}

inline void write_gap_csv(std::span<const double> gap, const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "epoch,gap\n";
  for (std::size_t e = 0; e < gap.size(); ++e) out << e << ',' << gap[e] << '\n';
}

}  // namespace hoso::eval
