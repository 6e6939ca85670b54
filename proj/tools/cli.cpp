#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lkaseg/accounting.hpp"
#include "lkaseg/checkpoint.hpp"
#include "lkaseg/config.hpp"
#include "lkaseg/dataset.hpp"
#include "lkaseg/grad_suites.hpp"
#include "lkaseg/netpbm.hpp"
#include "lkaseg/palette.hpp"
#include "lkaseg/synth.hpp"
#include "lkaseg/tiling.hpp"
#include "lkaseg/train.hpp"

namespace fs = std::filesystem;

namespace lkaseg::cli {
namespace {

// Numerical-check failures that are not exceptions (gradcheck).
struct CheckFailed {};

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<int> batch_size;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::string data;
  std::string predictions;
  std::string json_out;
};

struct InferArgs {
  std::string checkpoint;
  std::string config;
  std::string image;
  std::string out;
  std::int64_t tile = 0;
  std::int64_t stride = 0;
};

struct CountArgs {
  std::string config;
  std::string input_size = "512";
  bool json = false;
  bool lka_only = false;
  int channels = 64;
  int kernel = 21;
  int dilation = 3;
  bool no_fsc = false;
};

struct GradArgs {
  std::string scope = "ops";
  std::uint64_t seed = 1;
  double tolerance = -1.0;
  bool desk = true;
};

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? RunConfig{} : RunConfig::load(path);
}

// The run directory written by `train` holds config.json next to the
// checkpoints; use it when no --config is given.
RunConfig config_for_checkpoint(const std::string& config, const std::string& checkpoint) {
  if (!config.empty()) return RunConfig::load(config);
  const fs::path sibling = fs::path(checkpoint).parent_path() / "config.json";
  if (fs::exists(sibling)) return RunConfig::load(sibling);
  throw ConfigError(
      fmt::format("no --config given and no config.json next to {}", checkpoint));
}

LabelDecodeOptions decode_options(const DataConfig& data) {
  LabelDecodeOptions o;
  if (data.foreground_only) o.ignore_classes = {Palette::kClutter};
  return o;
}

EvalOptions eval_options(const RunConfig& rc, const Palette& palette) {
  EvalOptions e;
  e.batch_size = rc.train.batch_size;
  e.eval_classes = rc.data.eval_classes;
  e.class_names = palette.names();
  return e;
}

std::pair<std::int64_t, std::int64_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) {
      const std::int64_t v = std::stoll(s);
      return {v, v};
    }
    return {std::stoll(s.substr(0, x)), std::stoll(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw std::invalid_argument(fmt::format("bad input size '{}', expected N or HxW", s));
  }
}

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  a.cfg.validate();
  if (a.cfg.count == 0) err << "warning: count is 0, writing the manifest only\n";
  synth_generate(a.cfg, a.out);
  out << fmt::format("wrote {} samples of {}x{} to {}\n", a.cfg.count, a.cfg.size, a.cfg.size,
                     a.out);
  return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(a.config);
  if (!a.data.empty()) rc.data.dir = a.data;
  if (a.epochs) rc.train.epochs = *a.epochs;
  if (a.lr) rc.train.lr = *a.lr;
  if (a.batch_size) rc.train.batch_size = *a.batch_size;
  if (a.seed) rc.train.seed = *a.seed;
  rc.validate();
  if (rc.data.dir.empty()) throw ConfigError("no data directory (--data or data.dir)");

  const Corpus<float> corpus = load_corpus<float>(rc.data.dir, decode_options(rc.data));
  Model<float> model(rc.model, rc.train.seed);
  const TrainResult result = train_loop(
      model, corpus, rc.train, eval_options(rc, corpus.palette), RunOutput{a.out, rc.to_json()},
      [&](const EpochLog& e) { out << e.to_json().dump() << '\n' << std::flush; });
  out << fmt::format("best mIoU {:.4f} at epoch {}\n", result.best_miou, result.best_epoch);
  return kExitOk;
}

void print_scores(const EvalResult& r, const std::string& json_out, std::ostream& out) {
  const nlohmann::json j = to_json(r.scores);
  out << j.dump(2) << '\n' << format_table(r.scores);
  if (!json_out.empty()) std::ofstream(json_out, std::ios::trunc) << j.dump(2) << '\n';
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.predictions.empty() == a.checkpoint.empty()) {
    throw std::invalid_argument("eval needs exactly one of --checkpoint or --predictions");
  }
  if (!a.predictions.empty()) {
    RunConfig rc = load_run_config(a.config);
    const Corpus<float> corpus = load_corpus<float>(a.data, decode_options(rc.data));
    ConfusionMatrix cm(corpus.num_classes);
    for (std::size_t i = 0; i < corpus.files.size(); ++i) {
      const fs::path pred = fs::path(a.predictions) / corpus.files[i].filename();
      cm.accumulate(labels_from_palette(read_ppm(pred), corpus.palette),
                    corpus.samples[i].labels);
    }
    EvalResult r{cm, class_scores(cm, rc.data.eval_classes, corpus.palette.names())};
    print_scores(r, a.json_out, out);
    return kExitOk;
  }
  RunConfig rc = config_for_checkpoint(a.config, a.checkpoint);
  const Corpus<float> corpus = load_corpus<float>(a.data, decode_options(rc.data));
  if (corpus.num_classes != rc.model.num_classes) {
    throw ConfigError(fmt::format("data has {} classes, model expects {}", corpus.num_classes,
                                  rc.model.num_classes));
  }
  Model<float> model(rc.model, load_checkpoint<float>(a.checkpoint));
  print_scores(eval_loop(model, corpus.samples, eval_options(rc, corpus.palette)), a.json_out,
               out);
  return kExitOk;
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  RunConfig rc = config_for_checkpoint(a.config, a.checkpoint);
  Model<float> model(rc.model, load_checkpoint<float>(a.checkpoint));
  const Raster raster = read_ppm(a.image);
  const Tensor<float> image = raster_to_tensor<float>(raster);
  Tensor<float> logits;
  if (a.tile > 0) {
    const TileLayout layout =
        TileLayout::make(raster.height, raster.width, a.tile, a.stride > 0 ? a.stride : a.tile);
    std::vector<Tensor<float>> tiles;
    for (const auto& t : tile_image(image, layout)) tiles.push_back(model.logits(t));
    logits = stitch(tiles, layout);
  } else {
    if (raster.height % kInputMultiple != 0 || raster.width % kInputMultiple != 0) {
      throw std::invalid_argument(
          fmt::format("image {}x{} is not divisible by {}; pass --tile", raster.height,
                      raster.width, kInputMultiple));
    }
    logits = model.logits(image);
  }
  const Palette palette = Palette::isprs();
  const Raster pred = labels_to_palette(argmax_channels(logits), palette);
  fs::path pred_path(a.out);
  fs::path overlay_path = pred_path;
  overlay_path.replace_filename(pred_path.stem().string() + "_overlay.ppm");
  write_ppm(pred, pred_path);
  write_ppm(overlay(raster, pred), overlay_path);
  out << fmt::format("wrote {} and {}\n", pred_path.string(), overlay_path.string());
  return kExitOk;
}

int cmd_count(const CountArgs& a, std::ostream& out) {
  const auto [h, w] = parse_size(a.input_size);
  CostReport report;
  if (a.lka_only) {
    const LkaConfig cfg{a.channels, a.kernel, a.dilation};
    cfg.validate();
    report = count_lka(cfg, h, w);
  } else {
    RunConfig rc = load_run_config(a.config);
    if (a.no_fsc) rc.model.use_fsc = false;
    report = count_flops(rc.model, h, w);
  }
  out << (a.json ? to_json(report).dump(2) + "\n" : format_table(report));
  return kExitOk;
}

int cmd_gradcheck(const GradArgs& a, std::ostream& out) {
  std::vector<GradCheckReport> reports;
  if (a.scope == "ops") {
    reports = gradcheck_ops(a.seed, a.tolerance > 0 ? a.tolerance : 1e-4);
  } else if (a.scope == "lka") {
    reports = gradcheck_blocks(a.seed, a.tolerance > 0 ? a.tolerance : 1e-4);
  } else {
    reports = gradcheck_model(ModelConfig::desk(), a.seed, a.tolerance > 0 ? a.tolerance : 1e-3);
  }
  int failed = 0;
  for (const auto& r : reports) {
    out << format_report(r) << '\n';
    failed += r.passed ? 0 : 1;
  }
  out << fmt::format("{} checks, {} failed\n", reports.size(), failed);
  if (failed > 0) throw CheckFailed{};
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"lkaseg: large-kernel-attention segmentation engine", "lkaseg"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
  s->add_option("--seed", synth.cfg.seed, "Random seed");
  s->add_option("--count", synth.cfg.count, "Number of samples");
  s->add_option("--size", synth.cfg.size, "Image side, divisible by 32");
  s->add_option("--classes", synth.cfg.num_classes, "Number of classes (2-6)");
  s->add_option("--noise", synth.cfg.noise, "Gaussian noise std-dev in [0,1] units");
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", train.config, "Run config JSON");
  t->add_option("--data", train.data, "Corpus directory (overrides data.dir)");
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--epochs", train.epochs, "Override train.epochs");
  t->add_option("--lr", train.lr, "Override train.lr");
  t->add_option("--batch-size", train.batch_size, "Override train.batch_size");
  t->add_option("--seed", train.seed, "Override train.seed");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score a checkpoint or saved predictions on a corpus");
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint (.lkc)");
  e->add_option("--predictions", eval.predictions, "Directory of palette-coded predictions");
  e->add_option("--config", eval.config, "Run config (default: config.json beside checkpoint)");
  e->add_option("--data", eval.data, "Corpus directory")->required();
  e->add_option("--json", eval.json_out, "Also write the metrics JSON here");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Predict one image; writes labels and an overlay");
  i->add_option("--checkpoint", infer.checkpoint, "Checkpoint (.lkc)")->required();
  i->add_option("--config", infer.config, "Run config (default: config.json beside checkpoint)");
  i->add_option("--image", infer.image, "Input P6 image")->required();
  i->add_option("--out", infer.out, "Prediction PPM; the overlay goes to <stem>_overlay.ppm")
      ->required();
  i->add_option("--tile", infer.tile, "Tile size (multiple of 32) for large images");
  i->add_option("--stride", infer.stride, "Tile stride (default: tile size)");

  CountArgs count;
  auto* c = app.add_subcommand("count", "Parameter and FLOP accounting");
  c->add_option("--config", count.config, "Run config JSON (model section used)");
  c->add_option("--input-size", count.input_size, "N or HxW");
  c->add_flag("--json", count.json, "JSON instead of a table");
  c->add_flag("--no-fsc", count.no_fsc, "Disable full-scale skip connections");
  c->add_flag("--lka", count.lka_only, "Count a single LKA block");
  c->add_option("--channels", count.channels, "LKA channels");
  c->add_option("--kernel", count.kernel, "LKA nominal kernel");
  c->add_option("--dilation", count.dilation, "LKA dilation");

  GradArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
  g->add_option("--scope", grad.scope, "ops, lka or model")
      ->check(CLI::IsMember({"ops", "lka", "model"}));
  g->add_option("--seed", grad.seed, "Random seed");
  g->add_option("--tolerance", grad.tolerance, "Relative tolerance override");

  std::vector<std::string> reversed(args.rbegin(), args.rend());  // CLI11 pops from the back
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*s) return cmd_synth(synth, out, err);
    if (*t) return cmd_train(train, out);
    if (*e) return cmd_eval(eval, out);
    if (*i) return cmd_infer(infer, out);
    if (*c) return cmd_count(count, out);
    if (*g) return cmd_gradcheck(grad, out);
  } catch (const CheckFailed&) {
    err << "error: gradient check failed\n";
    return kExitNumerical;
  } catch (const NumericalError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace lkaseg::cli
