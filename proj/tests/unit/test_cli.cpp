#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "lkaseg/netpbm.hpp"

namespace lkaseg {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / "lkaseg_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_tiny_config() const {
    std::ofstream(path("tiny.json")) << R"({
      "model": {"widths": [8, 8, 16, 16], "fsc_channels": 8, "decoder_channels": [8, 8, 8],
                "lka_kernel": [7, 7, 7]},
      "train": {"epochs": 1, "batch_size": 2}
    })";
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndUnknownCommand) {
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"synth"}).code, cli::kExitValidation);  // --out is required
}

TEST_F(Cli, SynthRejectsIndivisibleSize) {
  const auto r = run({"synth", "--size", "60", "--out", path("bad")});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("divisible by 32"), std::string::npos);
}

TEST_F(Cli, CountLkaBlock) {
  const auto r = run({"count", "--lka", "--channels", "64", "--kernel", "21", "--dilation", "3",
                      "--input-size", "32", "--json"});
  ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["total_params"], 9024);
}

TEST_F(Cli, CountFlopsScaleWithArea) {
  const auto a = run({"count", "--input-size", "256", "--json"});
  const auto b = run({"count", "--input-size", "512x512", "--json"});
  ASSERT_EQ(a.code, cli::kExitOk) << a.err;
  const auto fa = nlohmann::json::parse(a.out)["total_flops"].get<std::int64_t>();
  const auto fb = nlohmann::json::parse(b.out)["total_flops"].get<std::int64_t>();
  EXPECT_EQ(fb, 4 * fa);
  EXPECT_EQ(run({"count", "--input-size", "100"}).code, cli::kExitValidation);
  EXPECT_EQ(run({"count", "--input-size", "axb"}).code, cli::kExitValidation);
}

TEST_F(Cli, CountWithoutFscIsSmaller) {
  const auto a = nlohmann::json::parse(run({"count", "--input-size", "512", "--json"}).out);
  const auto b =
      nlohmann::json::parse(run({"count", "--input-size", "512", "--json", "--no-fsc"}).out);
  EXPECT_GT(a["total_params"].get<std::int64_t>(), b["total_params"].get<std::int64_t>());
  EXPECT_GT(a["total_flops"].get<std::int64_t>(), b["total_flops"].get<std::int64_t>());
}

TEST_F(Cli, GradcheckFailureIsNumericalExit) {
  EXPECT_EQ(run({"gradcheck", "--scope", "ops"}).code, cli::kExitOk);
  const auto r = run({"gradcheck", "--scope", "ops", "--tolerance", "1e-30"});
  EXPECT_EQ(r.code, cli::kExitNumerical);
  EXPECT_EQ(run({"gradcheck", "--scope", "everything"}).code, cli::kExitValidation);
}

TEST_F(Cli, SynthTrainEvalInfer) {
  write_tiny_config();
  ASSERT_EQ(run({"synth", "--count", "4", "--size", "32", "--out", path("data")}).code,
            cli::kExitOk);
  const auto t = run({"train", "--config", path("tiny.json"), "--data", path("data"), "--out",
                      path("run")});
  ASSERT_EQ(t.code, cli::kExitOk) << t.err;
  EXPECT_TRUE(fs::exists(path("run/best.lkc")));

  const auto e = run({"eval", "--checkpoint", path("run/last.lkc"), "--data", path("data"),
                      "--json", path("metrics.json")});
  ASSERT_EQ(e.code, cli::kExitOk) << e.err;
  std::ifstream mj(path("metrics.json"));
  const auto metrics = nlohmann::json::parse(mj);
  EXPECT_TRUE(metrics.contains("mIoU"));

  // perfect predictions: the label files themselves
  const auto p = run({"eval", "--predictions", path("data/labels"), "--data", path("data")});
  ASSERT_EQ(p.code, cli::kExitOk) << p.err;
  EXPECT_NE(p.out.find("\"mIoU\": 100.0"), std::string::npos);

  // infer twice: identical bytes and input-sized output
  for (const char* name : {"pred_a.ppm", "pred_b.ppm"}) {
    const auto r = run({"infer", "--checkpoint", path("run/last.lkc"), "--image",
                        path("data/images/0000.ppm"), "--out", path(name)});
    ASSERT_EQ(r.code, cli::kExitOk) << r.err;
  }
  EXPECT_EQ(read_file(path("pred_a.ppm")), read_file(path("pred_b.ppm")));
  const Raster pred = read_ppm(path("pred_a.ppm"));
  EXPECT_EQ(pred.width, 32);
  EXPECT_EQ(pred.height, 32);
  EXPECT_TRUE(fs::exists(path("pred_a_overlay.ppm")));

  // tiled inference on a non-multiple-of-32 image
  Raster odd(45, 40, 3, 128);
  write_ppm(odd, path("odd.ppm"));
  EXPECT_EQ(run({"infer", "--checkpoint", path("run/last.lkc"), "--image", path("odd.ppm"),
                 "--out", path("odd_pred.ppm")})
                .code,
            cli::kExitValidation);
  const auto tiled = run({"infer", "--checkpoint", path("run/last.lkc"), "--image",
                          path("odd.ppm"), "--out", path("odd_pred.ppm"), "--tile", "32",
                          "--stride", "16"});
  ASSERT_EQ(tiled.code, cli::kExitOk) << tiled.err;
  EXPECT_EQ(read_ppm(path("odd_pred.ppm")).width, 45);
}

TEST_F(Cli, EvalNeedsExactlyOneSource) {
  EXPECT_EQ(run({"eval", "--data", path("nothing")}).code, cli::kExitValidation);
}

TEST_F(Cli, ConfigWithUnknownKeyIsRejected) {
  std::ofstream(path("bad.json")) << R"({"train": {"learning_rate": 1}})";
  const auto r = run({"count", "--config", path("bad.json"), "--input-size", "64"});
  EXPECT_EQ(r.code, cli::kExitValidation);
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos);
}

}  // namespace
}  // namespace lkaseg
