#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lkaseg {

/// Seeded generator with a portable distribution layer.
///
/// The std:: distributions are implementation-defined, so uniform and normal
/// draws are derived from raw 64-bit engine output here. Independent streams
/// for different purposes (init, shuffle, noise) come from `substream`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Deterministic child stream keyed by a name.
  [[nodiscard]] static Rng substream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lkaseg
