#include "lkaseg/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace lkaseg {
namespace {

void reject_unknown(const nlohmann::json& j, const std::string& section,
                    const std::set<std::string>& known) {
  if (!j.is_object()) throw ConfigError(fmt::format("config: '{}' must be an object", section));
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) {
      throw ConfigError(fmt::format("config: unknown key '{}{}'",
                                    section.empty() ? "" : section + ".", key));
    }
  }
}

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config: bad value for '{}.{}': {}", section, key, e.what()));
  }
}

}  // namespace

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"widths", c.widths},
          {"in_channels", c.in_channels},
          {"num_classes", c.num_classes},
          {"fsc_channels", c.fsc_channels},
          {"decoder_channels", c.decoder_channels},
          {"lka_kernel", c.lka_kernel},
          {"lka_dilation", c.lka_dilation},
          {"decoder_depth", c.decoder_depth},
          {"use_fsc", c.use_fsc},
          {"bn_momentum", c.bn_momentum}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  const std::string s = "model";
  reject_unknown(j, s,
                 {"widths", "in_channels", "num_classes", "fsc_channels", "decoder_channels",
                  "lka_kernel", "lka_dilation", "decoder_depth", "use_fsc", "bn_momentum"});
  ModelConfig c;
  read(j, "widths", c.widths, s);
  read(j, "in_channels", c.in_channels, s);
  read(j, "num_classes", c.num_classes, s);
  read(j, "fsc_channels", c.fsc_channels, s);
  read(j, "decoder_channels", c.decoder_channels, s);
  read(j, "lka_kernel", c.lka_kernel, s);
  read(j, "lka_dilation", c.lka_dilation, s);
  read(j, "decoder_depth", c.decoder_depth, s);
  read(j, "use_fsc", c.use_fsc, s);
  read(j, "bn_momentum", c.bn_momentum, s);
  return c;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, "", {"model", "train", "data"});
  RunConfig rc;
  if (j.contains("model")) rc.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) {
    const auto& t = j.at("train");
    const std::string s = "train";
    reject_unknown(t, s,
                   {"lr", "momentum", "weight_decay", "batch_size", "epochs", "seed",
                    "eval_every_epoch", "decay_norm_and_gates"});
    read(t, "lr", rc.train.lr, s);
    read(t, "momentum", rc.train.momentum, s);
    read(t, "weight_decay", rc.train.weight_decay, s);
    read(t, "batch_size", rc.train.batch_size, s);
    read(t, "epochs", rc.train.epochs, s);
    read(t, "seed", rc.train.seed, s);
    read(t, "eval_every_epoch", rc.train.eval_every_epoch, s);
    read(t, "decay_norm_and_gates", rc.train.decay_norm_and_gates, s);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    const std::string s = "data";
    reject_unknown(d, s, {"dir", "foreground_only", "eval_classes"});
    read(d, "dir", rc.data.dir, s);
    read(d, "foreground_only", rc.data.foreground_only, s);
    read(d, "eval_classes", rc.data.eval_classes, s);
  }
  rc.validate();
  return rc;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("config: cannot open {}", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("config: {}: {}", path.string(), e.what()));
  }
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  return {{"model", model_config_to_json(model)},
          {"train",
           {{"lr", train.lr},
            {"momentum", train.momentum},
            {"weight_decay", train.weight_decay},
            {"batch_size", train.batch_size},
            {"epochs", train.epochs},
            {"seed", train.seed},
            {"eval_every_epoch", train.eval_every_epoch},
            {"decay_norm_and_gates", train.decay_norm_and_gates}}},
          {"data",
           {{"dir", data.dir},
            {"foreground_only", data.foreground_only},
            {"eval_classes", data.eval_classes}}}};
}

void RunConfig::validate() const {
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (int c : data.eval_classes) {
    if (c < 0 || c >= model.num_classes) {
      throw ConfigError(fmt::format("config: eval class {} outside [0, {})", c, model.num_classes));
    }
  }
}

}  // namespace lkaseg
