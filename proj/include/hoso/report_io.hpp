#pragma once

// JSON and CSV forms of configs and run reports. A report embeds its fully
// resolved config, and config_from_json(report["config"]) rebuilds it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "hoso/errors.hpp"
#include "hoso/synthetic.hpp"
#include "hoso/trainers.hpp"

namespace hoso::io {

using nlohmann::json;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// NaN becomes null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json numbers(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

inline json to_json(const train::TrainConfig& c) {
  return {
      {"method", train::to_string(c.method)},
      {"shots", c.shots},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"adapter_lr", c.adapter_lr},
      {"momentum", c.momentum},
      {"weight_decay", c.weight_decay},
      {"ratio_lr", c.ratio_lr},
      {"alpha_init", c.alpha_init},
      {"cache_per_class", c.cache_per_class},
      {"remove_cache", c.remove_cache},
      {"blend_mode", model::to_string(c.blend_mode)},
      {"seed", c.seed},
      {"fixed_alpha", c.fixed_alpha},
      {"dvc",
       {{"w_dvc", c.dvc.w_dvc},
        {"w_acc", c.dvc.w_acc},
        {"alpha_min", c.dvc.alpha_min},
        {"alpha_max", c.dvc.alpha_max},
        {"smooth", c.dvc.smooth}}},
      {"tip", {{"alpha", c.tip.alpha}, {"beta", c.tip.beta}}},
      {"use_augmented_views", c.use_augmented_views},
      {"gap_subsample", c.gap_subsample},
  };
}

namespace detail {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end()) {
      throw ConfigError("unknown " + where + " field '" + k + "'");
    }
  }
}

}  // namespace detail

// Missing fields keep the values already in `base`.
inline train::TrainConfig config_from_json(const json& j, train::TrainConfig base = {}) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  detail::reject_unknown(j,
                         {"method", "shots", "epochs", "batch_size", "adapter_lr", "momentum", "weight_decay",
                          "ratio_lr", "alpha_init", "cache_per_class", "remove_cache", "blend_mode", "seed",
                          "fixed_alpha", "dvc", "tip", "use_augmented_views", "gap_subsample"},
                         "train config");
  auto& c = base;
  if (j.contains("method")) c.method = train::method_from_string(j.at("method").get<std::string>());
  if (j.contains("blend_mode")) c.blend_mode = model::blend_mode_from_string(j.at("blend_mode").get<std::string>());
  detail::read(j, "shots", c.shots);
  detail::read(j, "epochs", c.epochs);
  detail::read(j, "batch_size", c.batch_size);
  detail::read(j, "adapter_lr", c.adapter_lr);
  detail::read(j, "momentum", c.momentum);
  detail::read(j, "weight_decay", c.weight_decay);
  detail::read(j, "ratio_lr", c.ratio_lr);
  detail::read(j, "alpha_init", c.alpha_init);
  detail::read(j, "cache_per_class", c.cache_per_class);
  detail::read(j, "remove_cache", c.remove_cache);
  detail::read(j, "seed", c.seed);
  detail::read(j, "fixed_alpha", c.fixed_alpha);
  detail::read(j, "use_augmented_views", c.use_augmented_views);
  detail::read(j, "gap_subsample", c.gap_subsample);
  if (j.contains("dvc")) {
    const auto& d = j.at("dvc");
    detail::reject_unknown(d, {"w_dvc", "w_acc", "alpha_min", "alpha_max", "smooth"}, "dvc");
    detail::read(d, "w_dvc", c.dvc.w_dvc);
    detail::read(d, "w_acc", c.dvc.w_acc);
    detail::read(d, "alpha_min", c.dvc.alpha_min);
    detail::read(d, "alpha_max", c.dvc.alpha_max);
    detail::read(d, "smooth", c.dvc.smooth);
  }
  if (j.contains("tip")) {
    const auto& t = j.at("tip");
    detail::reject_unknown(t, {"alpha", "beta"}, "tip");
    detail::read(t, "alpha", c.tip.alpha);
    detail::read(t, "beta", c.tip.beta);
  }
  return c;
}

inline json to_json(const eval::SyntheticSpec& s) {
  return {
      {"num_classes", s.num_classes},
      {"dim", s.dim},
      {"prototype_angle_spread", s.prototype_angle_spread},
      {"orthogonal", s.orthogonal},
      {"within_class_noise", s.within_class_noise},
      {"domain_gap", s.domain_gap},
      {"train_per_class", s.train_per_class},
      {"test_per_class", s.test_per_class},
      {"logit_scale", s.logit_scale},
      {"with_augmented", s.with_augmented},
      {"weak_noise", s.weak_noise},
      {"strong_noise", s.strong_noise},
      {"seed", s.seed},
  };
}

inline eval::SyntheticSpec synthetic_from_json(const json& j, eval::SyntheticSpec s = {}) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  detail::reject_unknown(j,
                         {"num_classes", "dim", "prototype_angle_spread", "orthogonal", "within_class_noise",
                          "domain_gap", "train_per_class", "test_per_class", "logit_scale", "with_augmented",
                          "weak_noise", "strong_noise", "seed"},
                         "synthetic spec");
  detail::read(j, "num_classes", s.num_classes);
  detail::read(j, "dim", s.dim);
  detail::read(j, "prototype_angle_spread", s.prototype_angle_spread);
  detail::read(j, "orthogonal", s.orthogonal);
  detail::read(j, "within_class_noise", s.within_class_noise);
  detail::read(j, "domain_gap", s.domain_gap);
  detail::read(j, "train_per_class", s.train_per_class);
  detail::read(j, "test_per_class", s.test_per_class);
  detail::read(j, "logit_scale", s.logit_scale);
  detail::read(j, "with_augmented", s.with_augmented);
  detail::read(j, "weak_noise", s.weak_noise);
  detail::read(j, "strong_noise", s.strong_noise);
  detail::read(j, "seed", s.seed);
  return s;
}

inline json to_json(const train::RunReport& r) {
  return {
      {"config", to_json(r.config)},
      {"bank_hash", hex64(r.bank_hash)},
      {"init_seed", r.init_seed},
      {"embedding_dim", r.embedding_dim},
      {"num_classes", r.num_classes},
      {"initial_alpha", r.initial_alpha},
      {"final_alpha", r.final_alpha},
      {"test_accuracy", r.test_accuracy ? json(*r.test_accuracy) : json(nullptr)},
      {"per_class_accuracy", numbers(r.per_class_accuracy)},
      {"support_indices", r.support_indices},
      {"cache_indices", r.cache_indices},
      {"trace",
       {{"alpha", numbers(r.trace.alpha)},
        {"lr", numbers(r.trace.lr)},
        {"train_acc", numbers(r.trace.train_acc)},
        {"test_acc", numbers(r.trace.test_acc)},
        {"cache_loss", numbers(r.trace.cache_loss)}}},
      {"step_alpha", numbers(r.step_alpha)},
      {"gap", numbers(r.gap)},
      {"wall_clock_seconds", r.wall_clock_seconds},
  };
}

inline std::ofstream open_text(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

inline void write_json(const json& j, const std::filesystem::path& path) { open_text(path) << j.dump(2) << '\n'; }

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// epoch,alpha,lr,train_acc,test_acc,cache_loss; untracked cells are empty.
inline void write_trace_csv(const train::EpochTrace& t, const std::filesystem::path& path) {
  auto out = open_text(path);
  out.precision(17);
  const auto cell = [&](double v) -> std::ostream& {
    if (std::isfinite(v)) out << v;
    return out;
  };
  out << "epoch,alpha,lr,train_acc,test_acc,cache_loss\n";
  for (std::size_t e = 0; e < t.size(); ++e) {
    out << e << ',';
    cell(t.alpha[e]) << ',';
    cell(t.lr[e]) << ',';
    cell(t.train_acc[e]) << ',';
    cell(t.test_acc[e]) << ',';
    cell(t.cache_loss[e]) << '\n';
  }
}

}  // namespace hoso::io
