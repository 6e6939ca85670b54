#include "lkaseg/accounting.hpp"

#include <stdexcept>

#include <fmt/format.h>

namespace lkaseg {

std::int64_t CostReport::total_params() const { return params_with_prefix(""); }

std::int64_t CostReport::total_buffers() const {
  std::int64_t t = 0;
  for (const auto& r : rows) t += r.buffers;
  return t;
}

std::int64_t CostReport::total_flops() const { return flops_with_prefix(""); }

std::int64_t CostReport::params_with_prefix(std::string_view prefix) const {
  std::int64_t t = 0;
  for (const auto& r : rows) {
    if (std::string_view(r.name).starts_with(prefix)) t += r.params;
  }
  return t;
}

std::int64_t CostReport::flops_with_prefix(std::string_view prefix) const {
  std::int64_t t = 0;
  for (const auto& r : rows) {
    if (std::string_view(r.name).starts_with(prefix)) t += r.flops;
  }
  return t;
}

namespace {

struct Extent {
  std::int64_t c;
  std::int64_t h;
  std::int64_t w;
  [[nodiscard]] std::int64_t numel() const { return c * h * w; }
};

// Mirrors Model<T>::forward at the level of shapes.
class Walker {
 public:
  Walker(CostReport& report, bool with_flops) : r_(report), flops_(with_flops) {}

  Extent conv(const ConvLayer& l, Extent in) {
    const ConvSpec& s = l.spec;
    const Extent out{l.out_channels, s.out_h(in.h), s.out_w(in.w)};
    const std::int64_t taps =
        std::int64_t{s.kernel_h} * s.kernel_w * (l.in_channels / s.groups);
    CostRow row{l.name, "conv", taps * l.out_channels + (l.bias ? l.out_channels : 0), 0, 0};
    row.flops = 2 * taps * out.numel();
    add(std::move(row));
    return out;
  }

  Extent batch_norm(const BatchNormLayer& l, Extent in) {
    add(CostRow{l.name, "batch_norm", 2 * std::int64_t{l.channels}, 2 * std::int64_t{l.channels},
                kFlopsPerBatchNorm * in.numel()});
    return in;
  }

  Extent op(std::string name, std::string kind, std::int64_t per_element, Extent out) {
    add(CostRow{std::move(name), std::move(kind), 0, 0, per_element * out.numel()}, true);
    return out;
  }

  void gate(const std::string& name, Extent out) {
    add(CostRow{name, "gate", 1, 0, kFlopsPerBlend * out.numel()});
  }

  Extent resblock(const ResBlock& b, Extent in) {
    Extent h = conv(b.conv1, in);
    h = batch_norm(b.bn1, h);
    op(b.name + ".relu1", "activation", kFlopsPerRelu, h);
    h = conv(b.conv2, h);
    h = batch_norm(b.bn2, h);
    if (b.proj) {
      Extent s = conv(*b.proj, in);
      batch_norm(*b.proj_bn, s);
    }
    op(b.name + ".add", "elementwise", kFlopsPerElementwise, h);
    return op(b.name + ".relu2", "activation", kFlopsPerRelu, h);
  }

  Extent lka(const LkaBlock& b, Extent in) {
    Extent a = conv(b.dw, in);
    a = conv(b.dwd, a);
    a = conv(b.pw, a);
    return op(b.name + ".mul", "elementwise", kFlopsPerElementwise, a);
  }

  Extent decoder_block(const DecoderBlock& b, Extent in) {
    Extent h = batch_norm(b.bn, in);
    h = conv(b.pw1, h);
    h = lka(b.lka, h);
    op(b.name + ".gelu", "activation", kFlopsPerGelu, h);
    h = conv(b.pw2, h);
    return op(b.name + ".add", "elementwise", kFlopsPerElementwise, h);
  }

 private:
  void add(CostRow row, bool flops_only = false) {
    if (!flops_) {
      if (flops_only) return;
      row.flops = 0;
    }
    r_.rows.push_back(std::move(row));
  }

  CostReport& r_;
  bool flops_;
};

CostReport walk_model(const ModelConfig& cfg, std::int64_t h, std::int64_t w, bool with_flops) {
  const Architecture a = Architecture::build(cfg);
  CostReport report;
  Walker wk(report, with_flops);

  Extent x = wk.conv(a.stem_conv, Extent{cfg.in_channels, h, w});
  x = wk.batch_norm(a.stem_bn, x);
  wk.op("encoder.stem.relu", "activation", kFlopsPerRelu, x);
  x = wk.op("encoder.stem.pool", "pool", 3 * 3 - 1,
            Extent{x.c, (x.h + 2 - 3) / 2 + 1, (x.w + 2 - 3) / 2 + 1});
  std::array<Extent, kEncoderStages> taps{};
  for (int s = 0; s < kEncoderStages; ++s) {
    for (const auto& block : a.stages[static_cast<std::size_t>(s)]) x = wk.resblock(block, x);
    taps[static_cast<std::size_t>(s)] = x;
  }

  Extent prev = wk.conv(a.start, taps[3]);
  prev = wk.op("decoder.start.resize", "resize", kFlopsPerBilinear,
               Extent{prev.c, prev.h * 2, prev.w * 2});
  for (int s = 0; s < kDecoderStages; ++s) {
    const auto& st = a.decoder[static_cast<std::size_t>(s)];
    const Extent target = taps[static_cast<std::size_t>(st.skip_tap)];
    Extent m = prev;
    if (cfg.use_fsc) {
      for (int t = 0; t < kEncoderStages; ++t) {
        const auto& proj = st.fsc[static_cast<std::size_t>(t)];
        Extent e = taps[static_cast<std::size_t>(t)];
        const Extent scaled{e.c, target.h, target.w};
        if (e.h > target.h) {
          const std::int64_t ratio = e.h / target.h;
          wk.op(proj.name + ".pool", "pool", ratio * ratio - 1, scaled);
        } else if (e.h < target.h) {
          wk.op(proj.name + ".resize", "resize", kFlopsPerBilinear, scaled);
        }
        wk.conv(proj, scaled);
      }
      m = Extent{kEncoderStages * cfg.fsc_channels + prev.c, target.h, target.w};
    }
    if (st.merge) m = wk.conv(*st.merge, m);
    for (const auto& block : st.blocks) m = wk.decoder_block(block, m);
    wk.conv(st.skip, target);
    wk.gate(st.gate, m);
    prev = m;
    if (s != kDecoderStages - 1) {
      const std::string name = fmt::format("decoder.scale{}.resize", st.divisor);
      prev = wk.op(name, "resize", kFlopsPerBilinear, Extent{m.c, m.h * 2, m.w * 2});
    }
  }

  Extent y = wk.conv(a.head_conv, prev);
  y = wk.batch_norm(a.head_bn, y);
  wk.op("head.relu", "activation", kFlopsPerRelu, y);
  y = wk.conv(a.classifier, y);
  wk.op("head.resize", "resize", kFlopsPerBilinear, Extent{y.c, h, w});

  if (with_flops) {
    report.input_h = h;
    report.input_w = w;
  }
  return report;
}

}  // namespace

CostReport count_params(const ModelConfig& cfg) {
  return walk_model(cfg, kInputMultiple, kInputMultiple, false);
}

CostReport count_flops(const ModelConfig& cfg, std::int64_t h, std::int64_t w) {
  if (h <= 0 || w <= 0 || h % kInputMultiple != 0 || w % kInputMultiple != 0) {
    throw std::invalid_argument(
        fmt::format("count_flops: input {}x{} must be a positive multiple of {}", h, w,
                    kInputMultiple));
  }
  return walk_model(cfg, h, w, true);
}

CostReport count_lka(const LkaConfig& cfg, std::int64_t h, std::int64_t w) {
  const LkaBlock block = LkaBlock::make("lka", cfg);
  CostReport report;
  report.input_h = h;
  report.input_w = w;
  Walker wk(report, true);
  wk.lka(block, Extent{cfg.channels, h, w});
  return report;
}

CostRow dense_kernel_row(const LkaConfig& cfg, std::int64_t h, std::int64_t w) {
  const std::int64_t c = cfg.channels;
  const std::int64_t k = cfg.kernel;
  return CostRow{"dense", "conv", k * k * c * c + c, 0, 2 * k * k * c * c * h * w};
}

nlohmann::json to_json(const CostReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"name", r.name},
                    {"kind", r.kind},
                    {"params", r.params},
                    {"buffers", r.buffers},
                    {"flops", r.flops}});
  }
  return {{"convention", "1 MAC = 2 FLOPs"},
          {"per_element_flops",
           {{"batch_norm", kFlopsPerBatchNorm},
            {"relu", kFlopsPerRelu},
            {"gelu", kFlopsPerGelu},
            {"add_mul", kFlopsPerElementwise},
            {"bilinear", kFlopsPerBilinear},
            {"gate_blend", kFlopsPerBlend},
            {"max_pool", "kernel^2 - 1"}}},
          {"input_size", {report.input_h, report.input_w}},
          {"rows", rows},
          {"total_params", report.total_params()},
          {"total_buffers", report.total_buffers()},
          {"total_flops", report.total_flops()}};
}

std::string format_table(const CostReport& report) {
  std::string out = fmt::format(
      "# 1 MAC = 2 FLOPs; per-element: bn {}, relu {}, gelu {}, add/mul {}, bilinear {}, "
      "blend {}, max-pool k^2-1\n",
      kFlopsPerBatchNorm, kFlopsPerRelu, kFlopsPerGelu, kFlopsPerElementwise, kFlopsPerBilinear,
      kFlopsPerBlend);
  if (report.input_h > 0) {
    out += fmt::format("# input size {}x{}\n", report.input_h, report.input_w);
  } else {
    out += "# parameters only\n";
  }
  out += fmt::format("{:<44} {:<12} {:>12} {:>10} {:>16}\n", "layer", "kind", "params",
                     "buffers", "flops");
  for (const auto& r : report.rows) {
    out += fmt::format("{:<44} {:<12} {:>12} {:>10} {:>16}\n", r.name, r.kind, r.params,
                       r.buffers, r.flops);
  }
  out += fmt::format("{:<44} {:<12} {:>12} {:>10} {:>16}\n", "total", "", report.total_params(),
                     report.total_buffers(), report.total_flops());
  out += fmt::format("# params {:.3f} M, flops {:.3f} G\n", report.total_params() / 1e6,
                     report.total_flops() / 1e9);
  return out;
}

}  // namespace lkaseg
