#pragma once

// Training procedures. Every trainer draws a K-shot support set from the
// bank's train split, fits an adapter with SGD (momentum, weight decay,
// per-epoch cosine lr) and differs only in where alpha comes from:
//
//   hoso    learnable logit, stepped once per epoch on a held-out cache with
//           its own optimizer; the adapter never sees cache items
//   joint   learnable logit in the adapter's optimizer group, same data
//   fixed   constant alpha (0.2 by default)
//   svl     alpha = 1 - mean zero-shot max-probability over the support
//   random  alpha ~ U[0, 1) once per run
//   dvc     alpha EMA-tracks w_dvc * dvc + w_acc * (1 - acc) per step
//   tip     no adapter: training-free key-value cache on the support
//
// Within an epoch all adapter minibatches run first, then the ratio step.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hoso/errors.hpp"
#include "hoso/evaluate.hpp"
#include "hoso/featurebank.hpp"
#include "hoso/model.hpp"
#include "hoso/numerics.hpp"
#include "hoso/optim.hpp"
#include "hoso/rng.hpp"

namespace hoso::train {

enum class Method { ZeroShot, Fixed, Hoso, Joint, Svl, Dvc, Random, Tip };

inline const char* to_string(Method m) noexcept {
  switch (m) {
    case Method::ZeroShot: return "zeroshot";
    case Method::Fixed: return "fixed";
    case Method::Hoso: return "hoso";
    case Method::Joint: return "joint";
    case Method::Svl: return "svl";
    case Method::Dvc: return "dvc";
    case Method::Random: return "random";
    case Method::Tip: return "tip";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  for (auto m : {Method::ZeroShot, Method::Fixed, Method::Hoso, Method::Joint, Method::Svl, Method::Dvc,
                 Method::Random, Method::Tip}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + s + "' (expected zeroshot|fixed|hoso|joint|svl|dvc|random|tip)");
}

// Defaults for PathCLIP-style online alpha; none of these are fixed by the
// method's description, all are exposed.
struct DvcConfig {
  double w_dvc = 0.5;
  double w_acc = 0.5;
  double alpha_min = 0.1;
  double alpha_max = 0.9;
  double smooth = 0.1;
};

struct TipConfig {
  double alpha = 1.0;
  double beta = 1.0;
};

struct TrainConfig {
  Method method = Method::Hoso;
  std::size_t shots = 16;
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double adapter_lr = 0.002;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double ratio_lr = 0.1;
  double alpha_init = 0.5;
  std::size_t cache_per_class = 1;
  bool remove_cache = true;
  model::BlendMode blend_mode = model::BlendMode::Feature;
  std::uint64_t seed = 1;
  double fixed_alpha = 0.2;
  DvcConfig dvc;
  TipConfig tip;
  bool use_augmented_views = false;
  // Per-epoch test accuracy (for gap traces) uses a seeded subsample of
  // this many test items; 0 disables per-epoch test tracking.
  std::size_t gap_subsample = 512;
};

struct EpochTrace {
  std::vector<double> alpha;       // alpha in effect at the start of the epoch
  std::vector<double> lr;          // adapter lr used during the epoch
  std::vector<double> train_acc;   // end-of-epoch accuracy on the adapter's training items
  std::vector<double> cache_loss;  // mean CE on the cache at the ratio step (NaN if no cache)
  std::vector<double> test_acc;    // end-of-epoch accuracy on the test subsample (NaN if untracked)

  std::size_t size() const noexcept { return alpha.size(); }

  // Bitwise, so untracked (NaN) entries compare equal to themselves.
  bool operator==(const EpochTrace& o) const noexcept {
    const auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
      return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
               return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
             });
    };
    return same(alpha, o.alpha) && same(lr, o.lr) && same(train_acc, o.train_acc) &&
           same(cache_loss, o.cache_loss) && same(test_acc, o.test_acc);
  }
};

struct RunReport {
  TrainConfig config;
  std::uint64_t bank_hash = 0;
  std::uint64_t init_seed = 0;
  std::size_t embedding_dim = 0;
  std::size_t num_classes = 0;
  EpochTrace trace;
  std::vector<double> step_alpha;  // alpha after every adapter step (joint, dvc)
  std::vector<std::size_t> support_indices;
  std::vector<std::size_t> cache_indices;
  double initial_alpha = 0.0;
  double final_alpha = 0.0;
  std::optional<double> test_accuracy;
  std::vector<double> per_class_accuracy;
  std::vector<double> gap;  // train_acc - test_acc per epoch
  double wall_clock_seconds = 0.0;
};

struct TrainResult {
  model::Model<float> model;
  RunReport report;
};

enum class StepKind { Adapter, Ratio };

struct StepEvent {
  StepKind kind;
  std::size_t epoch;
  std::uint64_t psi_before, psi_after;
  double alpha_logit_before, alpha_logit_after;
  std::span<const std::size_t> items;  // bank train rows used by the step
};

// Optional instrumentation; checksums are computed only when set.
struct TrainObserver {
  std::function<void(const StepEvent&)> on_step;
};

using Clock = std::chrono::steady_clock;

namespace detail {

struct Row {
  std::span<const float> feature;
  std::uint32_t label;
};

inline double nan() noexcept { return std::numeric_limits<double>::quiet_NaN(); }

inline void check_shared(const bank::FeatureBank& bank, const TrainConfig& cfg) {
  if (cfg.epochs == 0) throw ConfigError("epochs must be positive");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(cfg.adapter_lr >= 0.0) || !(cfg.ratio_lr >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(cfg.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (cfg.use_augmented_views && !bank.has_augmented()) {
    throw DataError("augmented-view training requested but the bank has no weak/strong views");
  }
}

inline std::vector<std::size_t> test_subsample(const bank::FeatureBank& bank, const TrainConfig& cfg) {
  if (cfg.gap_subsample == 0 || bank.test.size() == 0) return {};
  auto items = eval::all_items(bank.test);
  if (items.size() > cfg.gap_subsample) {
    auto rng = Rng::derive(cfg.seed, Stream::Subsample);
    rng.shuffle(std::span<std::size_t>(items));
    items.resize(cfg.gap_subsample);
    std::sort(items.begin(), items.end());
  }
  return items;
}

// Shared epoch machinery for every adapter-training method.
class Loop {
 public:
  Loop(const bank::FeatureBank& bank, const TrainConfig& cfg, const TrainObserver* observer)
      : bank_(bank),
        head_(model::Head::of(bank)),
        cfg_(cfg),
        observer_(observer && observer->on_step ? observer : nullptr),
        adapter_opt_({cfg.momentum, cfg.weight_decay}),
        ratio_opt_({0.0, 0.0}),
        schedule_{cfg.adapter_lr, cfg.epochs, optim::ScheduleKind::Cosine},
        test_items_(test_subsample(bank, cfg)),
        start_(Clock::now()) {}

  const model::Head& head() const noexcept { return head_; }

  // Minibatches of the shuffled item order; each batch is expanded with one
  // augmented view per item when enabled.
  std::vector<std::vector<std::size_t>> batches(std::span<const std::size_t> items, std::size_t epoch) const {
    std::vector<std::size_t> order(items.begin(), items.end());
    auto rng = Rng::derive(cfg_.seed, Stream::Shuffle, epoch);
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order.size(); i += cfg_.batch_size) {
      const auto end = std::min(order.size(), i + cfg_.batch_size);
      out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
  }

  std::vector<Row> rows(std::span<const std::size_t> items, std::size_t epoch) const {
    std::vector<Row> out;
    out.reserve(items.size() * (cfg_.use_augmented_views ? 2 : 1));
    for (auto i : items) out.push_back({bank_.train.feature(i), bank_.train.labels[i]});
    if (cfg_.use_augmented_views) {
      const auto& views = *bank_.augmented;
      for (auto i : items) {
        // weak or strong per (epoch, item), fair coin
        auto coin = Rng::derive(cfg_.seed ^ (static_cast<std::uint64_t>(epoch) << 32), Stream::ViewPick, i);
        const bool strong = (coin() >> 63) != 0;
        out.push_back({strong ? views.strong.row(i) : views.weak.row(i), bank_.train.labels[i]});
      }
    }
    return out;
  }

  struct BatchStats {
    double loss = 0.0;
    std::size_t correct = 0;
    std::size_t count = 0;
  };

  // Mean cross-entropy gradient over the rows at the given alpha.
  BatchStats gradients(const model::AdapterParams<float>& params, std::span<const Row> rows, double alpha,
                       model::Gradients& grads) const {
    grads = model::Gradients(params);
    BatchStats s;
    for (const auto& row : rows) {
      auto tape = model::forward(head_, params, row.feature, alpha, cfg_.blend_mode);
      const auto x = num::softmax_xent(tape.logits, row.label);
      model::model_backward(tape, head_, params, x.grad_logits, grads);
      s.loss += x.loss;
      s.correct += num::argmax(tape.logits) == row.label ? 1 : 0;
    }
    s.count = rows.size();
    if (s.count > 0) {
      grads.scale(1.0 / static_cast<double>(s.count));
      s.loss /= static_cast<double>(s.count);
    }
    return s;
  }

  template <typename Fn>
  void observed(StepKind kind, std::size_t epoch, model::AdapterParams<float>& params,
                std::span<const std::size_t> items, Fn&& step) {
    if (!observer_) {
      step();
      return;
    }
    const auto psi_before = params.psi_checksum();
    const double logit_before = params.alpha_logit;
    step();
    observer_->on_step(StepEvent{kind, epoch, psi_before, params.psi_checksum(), logit_before,
                                 static_cast<double>(params.alpha_logit), items});
  }

  void adapter_step(std::size_t epoch, model::AdapterParams<float>& params, const model::Gradients& g,
                    std::span<const std::size_t> items, double lr) {
    observed(StepKind::Adapter, epoch, params, items, [&] { adapter_opt_.step(optim::adapter_group(params, g), lr); });
  }

  // Adapter weights and alpha_logit share the adapter optimizer.
  void joint_step(std::size_t epoch, model::AdapterParams<float>& params, const model::Gradients& g,
                  std::span<const std::size_t> items, double lr) {
    observed(StepKind::Adapter, epoch, params, items, [&] { adapter_opt_.step(optim::joint_group(params, g), lr); });
  }

  void ratio_step(std::size_t epoch, model::AdapterParams<float>& params, const model::Gradients& g,
                  std::span<const std::size_t> items) {
    observed(StepKind::Ratio, epoch, params, items,
             [&] { ratio_opt_.step(optim::ratio_group(params, g), cfg_.ratio_lr); });
  }

  double lr(std::size_t epoch) const { return schedule_.at(epoch); }

  double accuracy(const model::Model<float>& m, std::span<const std::size_t> items, const bank::Split& split) const {
    if (items.empty()) return nan();
    std::size_t correct = 0;
    for (auto i : items) {
      correct += num::argmax(model::model_logits(head_, m, split.feature(i))) == split.labels[i] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(items.size());
  }

  void end_epoch(RunReport& r, const model::Model<float>& m, std::span<const std::size_t> train_items) const {
    r.trace.train_acc.push_back(accuracy(m, train_items, bank_.train));
    r.trace.test_acc.push_back(test_items_.empty() ? nan() : accuracy(m, test_items_, bank_.test));
  }

  void finish(RunReport& r, const model::Model<float>& m) const {
    r.final_alpha = m.alpha();
    if (bank_.test.size() > 0) {
      const auto res = eval::evaluate(bank_, eval::model_classifier(bank_, m));
      r.test_accuracy = res.accuracy;
      r.per_class_accuracy = res.per_class;
    }
    r.gap.clear();
    for (std::size_t e = 0; e < r.trace.size(); ++e) r.gap.push_back(r.trace.train_acc[e] - r.trace.test_acc[e]);
    r.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
  }

 private:
  const bank::FeatureBank& bank_;
  model::Head head_;
  const TrainConfig& cfg_;
  const TrainObserver* observer_;
  optim::Sgd adapter_opt_;
  optim::Sgd ratio_opt_;
  optim::Schedule schedule_;
  std::vector<std::size_t> test_items_;
  Clock::time_point start_;
};

inline RunReport new_report(const bank::FeatureBank& bank, const TrainConfig& cfg) {
  RunReport r;
  r.config = cfg;
  r.bank_hash = bank::content_hash(bank);
  r.init_seed = cfg.seed;
  r.embedding_dim = bank.embedding_dim;
  r.num_classes = bank.num_classes;
  return r;
}

inline model::Model<float> new_model(const bank::FeatureBank& bank, const TrainConfig& cfg,
                                     std::optional<double> fixed_alpha) {
  model::Model<float> m;
  m.mode = cfg.blend_mode;
  m.init_seed = cfg.seed;
  m.fixed_alpha = fixed_alpha;
  const double logit = fixed_alpha ? 0.0 : model::logit_from_alpha(cfg.alpha_init);
  m.params = model::init_adapter<float>(bank.embedding_dim, cfg.seed, logit);
  return m;
}

// Adapter training at a constant alpha on the given support.
inline TrainResult fixed_alpha_on(const bank::FeatureBank& bank, const TrainConfig& cfg,
                                  const bank::SupportSet& support, double alpha, const TrainObserver* observer) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("fixed alpha " + std::to_string(alpha) + " outside [0, 1]");
  Loop loop(bank, cfg, observer);
  auto r = new_report(bank, cfg);
  r.support_indices = support.indices;
  auto m = new_model(bank, cfg, alpha);
  r.initial_alpha = alpha;
  model::Gradients g;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double lr = loop.lr(e);
    r.trace.alpha.push_back(alpha);
    r.trace.lr.push_back(lr);
    for (const auto& batch : loop.batches(support.indices, e)) {
      const auto rows = loop.rows(batch, e);
      loop.gradients(m.params, rows, alpha, g);
      loop.adapter_step(e, m.params, g, batch, lr);
    }
    r.trace.cache_loss.push_back(nan());
    loop.end_epoch(r, m, support.indices);
  }
  loop.finish(r, m);
  return {std::move(m), std::move(r)};
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline TrainResult train_hoso(const bank::FeatureBank& bank, const TrainConfig& cfg,
                              const TrainObserver* observer = nullptr) {
  detail::check_shared(bank, cfg);
  if (cfg.remove_cache && cfg.shots <= 1) throw ConfigError("cannot hold one shot out of one");
  const auto support = bank::sample_few_shot(bank, cfg.shots, cfg.seed);
  const auto split = bank::split_hoso_cache(support, cfg.cache_per_class, cfg.remove_cache, cfg.seed);

  detail::Loop loop(bank, cfg, observer);
  auto r = detail::new_report(bank, cfg);
  r.support_indices = split.reduced.indices;
  r.cache_indices = split.cache.indices;
  auto m = detail::new_model(bank, cfg, std::nullopt);
  r.initial_alpha = m.alpha();

  std::vector<detail::Row> cache_rows;
  for (auto i : split.cache.indices) cache_rows.push_back({bank.train.feature(i), bank.train.labels[i]});

  model::Gradients g;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double lr = loop.lr(e);
    const double alpha = m.alpha();
    r.trace.alpha.push_back(alpha);
    r.trace.lr.push_back(lr);
    // (a) adapter on S' with alpha held fixed
    for (const auto& batch : loop.batches(split.reduced.indices, e)) {
      const auto rows = loop.rows(batch, e);
      loop.gradients(m.params, rows, alpha, g);
      loop.adapter_step(e, m.params, g, batch, lr);
    }
    // (b) alpha_logit on the full cache
    const auto stats = loop.gradients(m.params, cache_rows, m.alpha(), g);
    r.trace.cache_loss.push_back(stats.loss);
    loop.ratio_step(e, m.params, g, split.cache.indices);
    loop.end_epoch(r, m, split.reduced.indices);
  }
  loop.finish(r, m);
  return {std::move(m), std::move(r)};
}

inline TrainResult train_fixed_alpha(const bank::FeatureBank& bank, const TrainConfig& cfg,
                                     const TrainObserver* observer = nullptr) {
  detail::check_shared(bank, cfg);
  const auto support = bank::sample_few_shot(bank, cfg.shots, cfg.seed);
  return detail::fixed_alpha_on(bank, cfg, support, cfg.fixed_alpha, observer);
}

inline TrainResult train_joint(const bank::FeatureBank& bank, const TrainConfig& cfg,
                               const TrainObserver* observer = nullptr) {
  detail::check_shared(bank, cfg);
  const auto support = bank::sample_few_shot(bank, cfg.shots, cfg.seed);
  detail::Loop loop(bank, cfg, observer);
  auto r = detail::new_report(bank, cfg);
  r.support_indices = support.indices;
  auto m = detail::new_model(bank, cfg, std::nullopt);
  r.initial_alpha = m.alpha();
  model::Gradients g;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double lr = loop.lr(e);
    r.trace.alpha.push_back(m.alpha());
    r.trace.lr.push_back(lr);
    for (const auto& batch : loop.batches(support.indices, e)) {
      const auto rows = loop.rows(batch, e);
      loop.gradients(m.params, rows, m.alpha(), g);
      loop.joint_step(e, m.params, g, batch, lr);
      r.step_alpha.push_back(m.alpha());
    }
    r.trace.cache_loss.push_back(detail::nan());
    loop.end_epoch(r, m, support.indices);
  }
  loop.finish(r, m);
  return {std::move(m), std::move(r)};
}

// 1 - mean_i max_c softmax(zero-shot logits of item i)
inline double alpha_svl(const bank::FeatureBank& bank, const bank::SupportSet& support) {
  if (support.size() == 0) throw ConfigError("SVL alpha needs a non-empty support set");
  const auto head = model::Head::of(bank);
  double confidence = 0.0;
  for (auto i : support.indices) {
    const auto p = num::softmax(model::zero_shot_logits(head, bank.train.feature(i)));
    confidence += *std::max_element(p.begin(), p.end());
  }
  return 1.0 - confidence / static_cast<double>(support.size());
}

inline TrainResult train_svl(const bank::FeatureBank& bank, const TrainConfig& cfg,
                             const TrainObserver* observer = nullptr) {
  detail::check_shared(bank, cfg);
  const auto support = bank::sample_few_shot(bank, cfg.shots, cfg.seed);
  return detail::fixed_alpha_on(bank, cfg, support, alpha_svl(bank, support), observer);
}

inline double draw_random_alpha(std::uint64_t seed) { return Rng::derive(seed, Stream::Alpha).uniform(); }

inline TrainResult train_random_alpha(const bank::FeatureBank& bank, const TrainConfig& cfg,
                                      const TrainObserver* observer = nullptr) {
  detail::check_shared(bank, cfg);
  const auto support = bank::sample_few_shot(bank, cfg.shots, cfg.seed);
  return detail::fixed_alpha_on(bank, cfg, support, draw_random_alpha(cfg.seed), observer);
}

// Mean cosine similarity between normalized weak/strong views of the items.
inline double dual_view_consistency(const bank::AugmentedViews& views, std::span<const std::size_t> items) {
  if (items.empty()) throw ConfigError("dvc over an empty batch");
  double acc = 0.0;
  for (auto i : items) {
    const auto w = num::l2_normalize(views.weak.row(i));
    const auto s = num::l2_normalize(views.strong.row(i));
    acc += num::dot(std::span<const double>(w.unit), std::span<const double>(s.unit));
  }
  return acc / static_cast<double>(items.size());
}

inline double dvc_target(const DvcConfig& c, double dvc, double acc) {
  return std::clamp(c.w_dvc * dvc + c.w_acc * (1.0 - acc), c.alpha_min, c.alpha_max);
}

inline TrainResult train_pathclip_dvc(const bank::FeatureBank& bank, const TrainConfig& cfg,
                                      const TrainObserver* observer = nullptr) {
  detail::check_shared(bank, cfg);
  if (!bank.has_augmented()) throw DataError("dvc training needs weak/strong augmented views in the bank");
  const auto& d = cfg.dvc;
  if (!(d.alpha_min <= d.alpha_max) || !(d.smooth >= 0.0 && d.smooth <= 1.0)) {
    throw ConfigError("dvc needs alpha_min <= alpha_max and smooth in [0, 1]");
  }
  const auto support = bank::sample_few_shot(bank, cfg.shots, cfg.seed);
  detail::Loop loop(bank, cfg, observer);
  auto r = detail::new_report(bank, cfg);
  r.support_indices = support.indices;
  double alpha = cfg.alpha_init;
  auto m = detail::new_model(bank, cfg, alpha);
  r.initial_alpha = alpha;
  model::Gradients g;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const double lr = loop.lr(e);
    r.trace.alpha.push_back(alpha);
    r.trace.lr.push_back(lr);
    for (const auto& batch : loop.batches(support.indices, e)) {
      const double dvc = dual_view_consistency(*bank.augmented, batch);
      std::size_t correct = 0;
      for (auto i : batch) {
        correct += num::argmax(model::model_logits(loop.head(), m, bank.train.feature(i))) == bank.train.labels[i];
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(batch.size());
      alpha = (1.0 - d.smooth) * alpha + d.smooth * dvc_target(d, dvc, acc);
      m.fixed_alpha = alpha;
      r.step_alpha.push_back(alpha);
      const auto rows = loop.rows(batch, e);
      loop.gradients(m.params, rows, alpha, g);
      loop.adapter_step(e, m.params, g, batch, lr);
    }
    r.trace.cache_loss.push_back(detail::nan());
    loop.end_epoch(r, m, support.indices);
  }
  loop.finish(r, m);
  return {std::move(m), std::move(r)};
}

// ---------------------------------------------------------------------------
// Tip-Adapter: logits(x) = s P u + alpha * exp(-beta (1 - u K^T)) L

class TipAdapter {
 public:
  TipAdapter(const bank::FeatureBank& bank, const bank::SupportSet& support, TipConfig cfg)
      : bank_(&bank), cfg_(cfg), keys_(support.size(), bank.embedding_dim), labels_(support.labels) {
    for (std::size_t m = 0; m < support.size(); ++m) {
      const auto k = num::l2_normalize(bank.train.feature(support.indices[m]));
      std::copy(k.unit.begin(), k.unit.end(), keys_.row(m).begin());
    }
  }

  const TipConfig& config() const noexcept { return cfg_; }

  num::Vec logits(std::span<const float> v) const {
    const auto head = model::Head::of(*bank_);
    const auto u = num::l2_normalize(v);
    auto out = num::cosine_logits(std::span<const double>(u.unit), head.prototypes, head.logit_scale);
    if (cfg_.alpha == 0.0) return out;
    for (std::size_t m = 0; m < keys_.rows(); ++m) {
      const double affinity = std::exp(-cfg_.beta * (1.0 - num::dot(keys_.row(m), std::span<const double>(u.unit))));
      out[labels_[m]] += cfg_.alpha * affinity;
    }
    return out;
  }

  std::size_t classify(std::span<const float> v) const { return num::argmax(logits(v)); }

 private:
  const bank::FeatureBank* bank_;
  TipConfig cfg_;
  num::Matrix<double> keys_;
  std::vector<std::uint32_t> labels_;
};

inline TipAdapter tip_adapter(const bank::FeatureBank& bank, const bank::SupportSet& support, TipConfig cfg = {}) {
  return TipAdapter(bank, support, cfg);
}

// Training-free methods produce a report without traces.
inline RunReport static_report(const bank::FeatureBank& bank, const TrainConfig& cfg, const eval::Classifier& c,
                               std::vector<std::size_t> support_indices, double alpha) {
  const auto start = Clock::now();
  auto r = detail::new_report(bank, cfg);
  r.support_indices = std::move(support_indices);
  r.initial_alpha = r.final_alpha = alpha;
  if (bank.test.size() > 0) {
    const auto res = eval::evaluate(bank, c);
    r.test_accuracy = res.accuracy;
    r.per_class_accuracy = res.per_class;
  }
  r.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

// Augmented-view variant of any adapter-training method.
inline TrainResult train(const bank::FeatureBank& bank, const TrainConfig& cfg,
                         const TrainObserver* observer = nullptr);

inline TrainResult train_with_extra_views(const bank::FeatureBank& bank, TrainConfig cfg,
                                          const TrainObserver* observer = nullptr) {
  cfg.use_augmented_views = true;
  return train(bank, cfg, observer);
}

// Dispatch on cfg.method. zeroshot and tip return an untrained model
// (alpha 0 for zeroshot) alongside their report.
inline TrainResult train(const bank::FeatureBank& bank, const TrainConfig& cfg, const TrainObserver* observer) {
  switch (cfg.method) {
    case Method::Hoso: return train_hoso(bank, cfg, observer);
    case Method::Joint: return train_joint(bank, cfg, observer);
    case Method::Fixed: return train_fixed_alpha(bank, cfg, observer);
    case Method::Svl: return train_svl(bank, cfg, observer);
    case Method::Random: return train_random_alpha(bank, cfg, observer);
    case Method::Dvc: return train_pathclip_dvc(bank, cfg, observer);
    case Method::ZeroShot: {
      auto m = detail::new_model(bank, cfg, 0.0);
      return {std::move(m), static_report(bank, cfg, eval::zero_shot_classifier(bank), {}, 0.0)};
    }
    case Method::Tip: {
      const auto support = bank::sample_few_shot(bank, cfg.shots, cfg.seed);
      const auto tip = tip_adapter(bank, support, cfg.tip);
      auto m = detail::new_model(bank, cfg, 0.0);
      auto r = static_report(bank, cfg, [&tip](std::span<const float> v) { return tip.classify(v); },
                             support.indices, cfg.tip.alpha);
      return {std::move(m), std::move(r)};
    }
  }
  throw ConfigError("unhandled method");
}

}  // namespace hoso::train
