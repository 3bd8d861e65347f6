#pragma once

// SGD with classical momentum and coupled weight decay, stepped per
// parameter group, and the cosine annealing schedule.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hoso/errors.hpp"
#include "hoso/model.hpp"

namespace hoso::optim {

// lr(step) = base * (1 + cos(pi * step / total)) / 2
inline double cosine_lr(std::size_t step, std::size_t total, double base_lr) {
  if (total == 0) throw ConfigError("cosine schedule needs total_steps > 0");
  if (step > total) {
    throw ConfigError("schedule step " + std::to_string(step) + " beyond total " + std::to_string(total));
  }
  if (step == total) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

enum class ScheduleKind { Cosine, Constant };

struct Schedule {
  double base_lr = 0.002;
  std::size_t total_steps = 200;
  ScheduleKind kind = ScheduleKind::Cosine;

  double at(std::size_t step) const {
    return kind == ScheduleKind::Cosine ? cosine_lr(step, total_steps, base_lr) : base_lr;
  }
};

template <typename T>
struct ParamRef {
  std::string_view name;
  std::span<T> values;
  std::span<const double> grads;
};

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// v <- momentum * v + (g + wd * p);  p <- p - lr * v
class Sgd {
 public:
  Sgd() = default;
  explicit Sgd(SgdConfig cfg) : cfg_(cfg) {}

  const SgdConfig& config() const noexcept { return cfg_; }
  const std::vector<std::vector<double>>& velocity() const noexcept { return velocity_; }

  template <typename T>
  void step(std::span<const ParamRef<T>> group, double lr) {
    for (const auto& p : group) {
      if (p.values.size() != p.grads.size()) {
        throw ShapeError(std::string(p.name) + ": gradient has " + std::to_string(p.grads.size()) +
                         " entries for " + std::to_string(p.values.size()) + " parameters");
      }
      if (!num::all_finite(p.grads)) throw NumericsError("non-finite gradient in " + std::string(p.name));
    }
    if (velocity_.empty()) {
      for (const auto& p : group) velocity_.emplace_back(p.values.size(), 0.0);
    } else if (velocity_.size() != group.size()) {
      throw ShapeError("optimizer bound to a group of " + std::to_string(velocity_.size()) + " tensors, got " +
                       std::to_string(group.size()));
    }
    for (std::size_t t = 0; t < group.size(); ++t) {
      const auto& p = group[t];
      auto& vel = velocity_[t];
      if (vel.size() != p.values.size()) throw ShapeError(std::string(p.name) + ": velocity shape mismatch");
      for (std::size_t i = 0; i < vel.size(); ++i) {
        const double param = static_cast<double>(p.values[i]);
        vel[i] = cfg_.momentum * vel[i] + (p.grads[i] + cfg_.weight_decay * param);
        p.values[i] = static_cast<T>(param - lr * vel[i]);
      }
    }
  }

  template <typename T>
  void step(const std::vector<ParamRef<T>>& group, double lr) {
    step(std::span<const ParamRef<T>>(group), lr);
  }

 private:
  SgdConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

// psi = (W1, b1, W2, b2)
template <typename T>
std::vector<ParamRef<T>> adapter_group(model::AdapterParams<T>& p, const model::Gradients& g) {
  return {
      {"W1", p.w1.flat(), g.w1.flat()},
      {"b1", std::span<T>(p.b1), std::span<const double>(g.b1)},
      {"W2", p.w2.flat(), g.w2.flat()},
      {"b2", std::span<T>(p.b2), std::span<const double>(g.b2)},
  };
}

template <typename T>
std::vector<ParamRef<T>> ratio_group(model::AdapterParams<T>& p, const model::Gradients& g) {
  return {{"alpha_logit", std::span<T>(&p.alpha_logit, 1), std::span<const double>(&g.alpha_logit, 1)}};
}

// psi plus alpha_logit in a single group (naive joint training).
template <typename T>
std::vector<ParamRef<T>> joint_group(model::AdapterParams<T>& p, const model::Gradients& g) {
  auto group = adapter_group(p, g);
  group.push_back(ratio_group(p, g).front());
  return group;
}

}  // namespace hoso::optim
