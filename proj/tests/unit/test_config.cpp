#include <gtest/gtest.h>

#include "lkaseg/config.hpp"

namespace lkaseg {
namespace {

using nlohmann::json;

TEST(Config, EmptyObjectGivesDefaults) {
  const auto rc = RunConfig::from_json(json::object());
  EXPECT_EQ(rc.train.lr, 0.01);
  EXPECT_EQ(rc.train.batch_size, 10);
  EXPECT_EQ(rc.model.widths[3], 512);
  EXPECT_TRUE(rc.model.use_fsc);
}

TEST(Config, RoundTripsThroughJson) {
  RunConfig rc;
  rc.model = ModelConfig::desk();
  rc.model.use_fsc = false;
  rc.train.epochs = 30;
  rc.data.dir = "somewhere";
  rc.data.eval_classes = {0, 1, 2};
  const auto back = RunConfig::from_json(rc.to_json());
  EXPECT_EQ(back.to_json(), rc.to_json());
  EXPECT_EQ(back.model.widths, rc.model.widths);
  EXPECT_FALSE(back.model.use_fsc);
}

TEST(Config, RejectsUnknownKeysAtEveryLevel) {
  for (const char* text : {R"({"modle": {}})", R"({"model": {"width": [1,2,3,4]}})",
                           R"({"train": {"learning_rate": 0.1}})", R"({"data": {"path": "x"}})"}) {
    EXPECT_THROW(RunConfig::from_json(json::parse(text)), ConfigError) << text;
  }
}

TEST(Config, RejectsWrongTypesAndBadValues) {
  EXPECT_ANY_THROW(RunConfig::from_json(json::parse(R"({"train": {"lr": "fast"}})")));
  EXPECT_ANY_THROW(RunConfig::from_json(json::parse(R"({"train": {"batch_size": 0}})")));
  EXPECT_ANY_THROW(
      RunConfig::from_json(json::parse(R"({"model": {"lka_kernel": [20, 21, 21]}})")));
}

}  // namespace
}  // namespace lkaseg
