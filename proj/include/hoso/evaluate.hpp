#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hoso/errors.hpp"
#include "hoso/featurebank.hpp"
#include "hoso/model.hpp"

namespace hoso::eval {

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class;          // 0 for classes without items
  std::vector<std::size_t> class_counts;  // items per true class
  num::Matrix<std::size_t> confusion;     // true x predicted
  std::size_t total = 0;

  std::size_t correct() const noexcept {
    std::size_t n = 0;
    for (std::size_t c = 0; c < confusion.rows(); ++c) n += confusion(c, c);
    return n;
  }
};

// Any feature -> predicted class mapping.
using Classifier = std::function<std::size_t(std::span<const float>)>;

inline EvalResult evaluate_items(const bank::Split& split, std::span<const std::size_t> items,
                                 std::size_t num_classes, const Classifier& classify) {
  if (items.empty()) throw ConfigError("evaluation set is empty");
  EvalResult r;
  r.confusion = num::Matrix<std::size_t>(num_classes, num_classes, 0);
  r.class_counts.assign(num_classes, 0);
  for (auto i : items) {
    const auto truth = split.labels[i];
    const auto pred = classify(split.feature(i));
    if (pred >= num_classes) throw LabelError("classifier returned class " + std::to_string(pred));
    ++r.confusion(truth, pred);
    ++r.class_counts[truth];
  }
  r.total = items.size();
  r.accuracy = static_cast<double>(r.correct()) / static_cast<double>(r.total);
  r.per_class.assign(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (r.class_counts[c] > 0) {
      r.per_class[c] = static_cast<double>(r.confusion(c, c)) / static_cast<double>(r.class_counts[c]);
    }
  }
  return r;
}

inline std::vector<std::size_t> all_items(const bank::Split& split) {
  std::vector<std::size_t> items(split.size());
  for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
  return items;
}

// Over the bank's full test split.
inline EvalResult evaluate(const bank::FeatureBank& bank, const Classifier& classify) {
  if (bank.test.size() == 0) throw ConfigError("bank has no test items");
  const auto items = all_items(bank.test);
  return evaluate_items(bank.test, items, bank.num_classes, classify);
}

inline Classifier zero_shot_classifier(const bank::FeatureBank& bank) {
  return [&bank](std::span<const float> v) {
    return num::argmax(model::zero_shot_logits(model::Head::of(bank), v));
  };
}

template <typename T>
Classifier model_classifier(const bank::FeatureBank& bank, const model::Model<T>& m) {
  return [&bank, &m](std::span<const float> v) {
    return num::argmax(model::model_logits(model::Head::of(bank), m, v));
  };
}

}  // namespace hoso::eval
