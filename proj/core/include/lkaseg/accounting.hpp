#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lkaseg/lka.hpp"
#include "lkaseg/model.hpp"

// Analytic cost model. One multiply-accumulate counts as 2 FLOPs. Convolution
// rows count 2 * (k_h * k_w * C_in / groups) * C_out * H_out * W_out; bias
// adds are not counted. Other ops are charged a fixed number of FLOPs per
// output element, listed in kFlopsPer*.

namespace lkaseg {

inline constexpr std::int64_t kFlopsPerBatchNorm = 2;      // scale + shift
inline constexpr std::int64_t kFlopsPerRelu = 1;
inline constexpr std::int64_t kFlopsPerGelu = 8;
inline constexpr std::int64_t kFlopsPerElementwise = 1;   // add or mul
inline constexpr std::int64_t kFlopsPerBilinear = 7;      // 3 lerps of 2 FLOPs + index math
inline constexpr std::int64_t kFlopsPerBlend = 3;         // a*x + (1-a)*y

struct CostRow {
  std::string name;
  std::string kind;            // conv, batch_norm, gate, pool, resize, activation, elementwise
  std::int64_t params = 0;     // trainable scalars
  std::int64_t buffers = 0;    // non-trainable scalars (running statistics)
  std::int64_t flops = 0;
};

struct CostReport {
  std::int64_t input_h = 0;  // 0 when only parameters were counted
  std::int64_t input_w = 0;
  std::vector<CostRow> rows;

  [[nodiscard]] std::int64_t total_params() const;
  [[nodiscard]] std::int64_t total_buffers() const;
  [[nodiscard]] std::int64_t total_flops() const;
  /// Sums over rows whose name starts with `prefix`.
  [[nodiscard]] std::int64_t params_with_prefix(std::string_view prefix) const;
  [[nodiscard]] std::int64_t flops_with_prefix(std::string_view prefix) const;
};

/// Parameter rows only (one per parameterized layer), in registration order.
CostReport count_params(const ModelConfig& cfg);

/// Parameter and FLOP rows for one image of size h x w (multiples of 32).
CostReport count_flops(const ModelConfig& cfg, std::int64_t h, std::int64_t w);

/// A single LKA block on a C x h x w map.
CostReport count_lka(const LkaConfig& cfg, std::int64_t h, std::int64_t w);

/// Parameters and FLOPs of a dense K x K conv (C -> C, with bias) on h x w.
CostRow dense_kernel_row(const LkaConfig& cfg, std::int64_t h, std::int64_t w);

nlohmann::json to_json(const CostReport& report);
std::string format_table(const CostReport& report);

}  // namespace lkaseg
