#include "lkaseg/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace lkaseg {
namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

ConfusionMatrix::ConfusionMatrix(int num_classes, std::int32_t ignore_label)
    : classes_(num_classes),
      ignore_(ignore_label),
      counts_(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0) {
  if (num_classes < 1) throw std::invalid_argument("ConfusionMatrix: need at least one class");
}

void ConfusionMatrix::accumulate(const LabelMap& predictions, const LabelMap& truth) {
  if (predictions.n != truth.n || predictions.h != truth.h || predictions.w != truth.w) {
    throw std::invalid_argument("ConfusionMatrix: prediction and truth shapes differ");
  }
  // validate before touching counts so a bad map leaves the matrix unchanged
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    const std::int32_t t = truth.data[i];
    const std::int32_t p = predictions.data[i];
    if (t == ignore_) continue;
    if (t < 0 || t >= classes_ || p < 0 || p >= classes_) {
      throw std::invalid_argument(
          fmt::format("ConfusionMatrix: label pair ({}, {}) outside [0, {})", t, p, classes_));
    }
  }
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    const std::int32_t t = truth.data[i];
    if (t == ignore_) continue;
    ++counts_[static_cast<std::size_t>(t * classes_ + predictions.data[i])];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("ConfusionMatrix: class mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t t = 0;
  for (int c = 0; c < classes_; ++c) t += at(c, c);
  return t;
}

double iou_from_f1(double f1) { return f1 / (2.0 - f1); }

ScoreReport class_scores(const ConfusionMatrix& cm, const std::vector<int>& eval_classes,
                         const std::vector<std::string>& class_names) {
  if (cm.total() == 0) throw std::invalid_argument("class_scores: empty confusion matrix");
  std::vector<int> ids = eval_classes;
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(cm.num_classes()));
    std::iota(ids.begin(), ids.end(), 0);
  }
  ScoreReport r;
  double f1_sum = 0.0;
  double iou_sum = 0.0;
  int present = 0;
  for (int c : ids) {
    if (c < 0 || c >= cm.num_classes()) throw std::invalid_argument("class_scores: bad class id");
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int k = 0; k < cm.num_classes(); ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const double tp = static_cast<double>(cm.at(c, c));
    const double fp = static_cast<double>(col) - tp;
    const double fn = static_cast<double>(row) - tp;
    ClassScore s;
    s.id = c;
    s.name = static_cast<std::size_t>(c) < class_names.size()
                 ? class_names[static_cast<std::size_t>(c)]
                 : fmt::format("class{}", c);
    s.support = row;
    if (tp + fp + fn == 0.0) {
      s.absent = true;
    } else {
      s.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
      s.iou = tp / (tp + fp + fn);
      f1_sum += s.f1;
      iou_sum += s.iou;
      ++present;
    }
    r.classes.push_back(std::move(s));
  }
  if (present > 0) {
    r.mean_f1 = f1_sum / present;
    r.mean_iou = iou_sum / present;
  }
  r.overall_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  return r;
}

nlohmann::json to_json(const ScoreReport& report) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : report.classes) {
    classes.push_back({{"id", c.id},
                       {"name", c.name},
                       {"F1", round2(100.0 * c.f1)},
                       {"IoU", round2(100.0 * c.iou)},
                       {"support", c.support},
                       {"absent", c.absent}});
  }
  return {{"classes", classes},
          {"mF1", round2(100.0 * report.mean_f1)},
          {"mIoU", round2(100.0 * report.mean_iou)},
          {"OA", round2(100.0 * report.overall_accuracy)}};
}

std::string format_table(const ScoreReport& report) {
  std::string out = fmt::format("{:<24} {:>15}\n", "class", "F1/IoU");
  for (const auto& c : report.classes) {
    out += fmt::format("{:<24} {:>15}{}\n", c.name,
                       fmt::format("{:.2f}/{:.2f}", 100.0 * c.f1, 100.0 * c.iou),
                       c.absent ? "  (absent)" : "");
  }
  out += fmt::format("{:<24} {:>15.2f}\n", "mF1", 100.0 * report.mean_f1);
  out += fmt::format("{:<24} {:>15.2f}\n", "mIoU", 100.0 * report.mean_iou);
  out += fmt::format("{:<24} {:>15.2f}\n", "OA", 100.0 * report.overall_accuracy);
  return out;
}

}  // namespace lkaseg
