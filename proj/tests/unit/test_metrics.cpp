#include <cmath>

#include <gtest/gtest.h>

#include "lkaseg/metrics.hpp"
#include "lkaseg/rng.hpp"

namespace lkaseg {
namespace {

LabelMap row(std::vector<std::int32_t> v) {
  LabelMap m(1, 1, static_cast<std::int64_t>(v.size()));
  m.data = std::move(v);
  return m;
}

TEST(Confusion, CountsAndIgnore) {
  ConfusionMatrix cm(3);
  cm.accumulate(row({0, 1, 2, 2, 0}), row({0, 1, 1, kIgnoreLabel, 2}));
  EXPECT_EQ(cm.total(), 4u);
  EXPECT_EQ(cm.trace(), 2u);
  EXPECT_EQ(cm.at(1, 2), 1u);
  EXPECT_EQ(cm.at(2, 0), 1u);
  EXPECT_THROW(cm.accumulate(row({0, 3}), row({0, 1})), std::invalid_argument);
  EXPECT_THROW(cm.accumulate(row({0}), row({0, 1})), std::invalid_argument);
}

TEST(Scores, HandComputedTwoClass) {
  // truth 0: 8 right, 2 as class 1; truth 1: 1 as class 0, 4 right
  ConfusionMatrix cm(2);
  cm.set(0, 0, 8);
  cm.set(0, 1, 2);
  cm.set(1, 0, 1);
  cm.set(1, 1, 4);
  const auto r = class_scores(cm, {}, {"a", "b"});
  EXPECT_NEAR(r.classes[0].f1, 16.0 / 19.0, 1e-15);
  EXPECT_NEAR(r.classes[0].iou, 8.0 / 11.0, 1e-15);
  EXPECT_NEAR(r.classes[1].f1, 8.0 / 11.0, 1e-15);
  EXPECT_NEAR(r.classes[1].iou, 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(r.mean_iou, (8.0 / 11.0 + 4.0 / 7.0) / 2.0, 1e-15);
  EXPECT_NEAR(r.overall_accuracy, 12.0 / 15.0, 1e-15);
  EXPECT_EQ(r.classes[1].name, "b");
  EXPECT_EQ(r.classes[0].support, 10u);
}

TEST(Scores, PerfectPredictionsAreOneHundred) {
  ConfusionMatrix cm(4);
  const auto t = row({0, 1, 2, 3, 3, 2});
  cm.accumulate(t, t);
  const auto j = to_json(class_scores(cm));
  EXPECT_EQ(j["mF1"], 100.0);
  EXPECT_EQ(j["mIoU"], 100.0);
  EXPECT_EQ(j["OA"], 100.0);
}

TEST(Scores, AbsentClassLeftOutOfMeans) {
  ConfusionMatrix cm(3);
  cm.accumulate(row({0, 1}), row({0, 1}));
  const auto r = class_scores(cm);
  EXPECT_TRUE(r.classes[2].absent);
  EXPECT_EQ(r.mean_iou, 1.0);
}

TEST(Scores, EvalClassesSubset) {
  ConfusionMatrix cm(3);
  cm.accumulate(row({0, 1, 0}), row({0, 1, 2}));
  const auto r = class_scores(cm, {0, 1});
  EXPECT_NEAR(r.mean_iou, (0.5 + 1.0) / 2.0, 1e-15);
  EXPECT_THROW(class_scores(cm, {5}), std::invalid_argument);
  EXPECT_THROW(class_scores(ConfusionMatrix(2)), std::invalid_argument);
}

TEST(Scores, F1IouIdentityHoldsPerClass) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix cm(4);
    for (int t = 0; t < 4; ++t) {
      for (int p = 0; p < 4; ++p) cm.set(t, p, rng.below(100) + (t == p ? 50 : 0));
    }
    for (const auto& c : class_scores(cm).classes) {
      EXPECT_NEAR(iou_from_f1(c.f1), c.iou, 1e-14);
    }
  }
}

TEST(Scores, MergeEqualsJointAccumulation) {
  ConfusionMatrix a(3), b(3), joint(3);
  a.accumulate(row({0, 1}), row({0, 2}));
  b.accumulate(row({2, 2}), row({2, 1}));
  joint.accumulate(row({0, 1, 2, 2}), row({0, 2, 2, 1}));
  a.merge(b);
  EXPECT_EQ(a, joint);
}

TEST(Scores, TableListsEveryClass) {
  ConfusionMatrix cm(2);
  cm.accumulate(row({0, 1}), row({0, 1}));
  const auto table = format_table(class_scores(cm, {}, {"road", "roof"}));
  EXPECT_NE(table.find("road"), std::string::npos);
  EXPECT_NE(table.find("mIoU"), std::string::npos);
}

}  // namespace
}  // namespace lkaseg
