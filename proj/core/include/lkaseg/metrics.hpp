#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lkaseg/labels.hpp"

namespace lkaseg {

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes, std::int32_t ignore_label = kIgnoreLabel);

  /// Adds one count per pixel whose truth is not the ignore label.
  /// Throws std::invalid_argument on shape mismatch or out-of-range labels.
  void accumulate(const LabelMap& predictions, const LabelMap& truth);
  void merge(const ConfusionMatrix& other);

  [[nodiscard]] int num_classes() const { return classes_; }
  [[nodiscard]] std::int32_t ignore_label() const { return ignore_; }
  [[nodiscard]] std::uint64_t at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
  }
  void set(int truth, int predicted, std::uint64_t value) {
    counts_[static_cast<std::size_t>(truth * classes_ + predicted)] = value;
  }
  [[nodiscard]] std::uint64_t total() const;
  [[nodiscard]] std::uint64_t trace() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::int32_t ignore_;
  std::vector<std::uint64_t> counts_;
};

struct ClassScore {
  int id = 0;
  std::string name;
  double f1 = 0.0;
  double iou = 0.0;
  std::uint64_t support = 0;  // ground-truth pixels
  /// No support and no predictions: scores are 0 and the class is left out
  /// of the means.
  bool absent = false;
};

struct ScoreReport {
  std::vector<ClassScore> classes;
  double mean_f1 = 0.0;
  double mean_iou = 0.0;
  double overall_accuracy = 0.0;
};

/// Per-class F1 / IoU and their means over `eval_classes` (all classes when
/// empty). Overall accuracy is trace / total over the whole matrix.
ScoreReport class_scores(const ConfusionMatrix& cm, const std::vector<int>& eval_classes = {},
                         const std::vector<std::string>& class_names = {});

/// Percentages rounded to two decimals.
nlohmann::json to_json(const ScoreReport& report);

/// Aligned table with "F1/IoU" pairs per class, then mF1 / mIoU / OA.
std::string format_table(const ScoreReport& report);

/// IoU implied by an F1 score on the same class: IoU = F1 / (2 - F1).
double iou_from_f1(double f1);

}  // namespace lkaseg
