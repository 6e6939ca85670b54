#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lkaseg/autodiff.hpp"
#include "lkaseg/gradcheck.hpp"
#include "lkaseg/model.hpp"
#include "lkaseg/rng.hpp"

namespace lkaseg {

using LeafLoss = std::function<Var(Tape<double>&, std::span<const Var>)>;
using StoreLoss = std::function<Var(Tape<double>&)>;

/// Checks d loss / d leaf for every leaf tensor. The relative-error floor
/// is shared by all leaves (floor_fraction times the largest numeric
/// derivative seen in the check). At most `probes` entries
/// per leaf are compared (all when the leaf is smaller). One report per leaf.
std::vector<GradCheckReport> check_leaves(const std::string& label, const LeafLoss& loss,
                                          const std::vector<Tensor<double>>& leaves,
                                          const GradCheckOptions& options, Rng& rng,
                                          std::int64_t probes = 64);

/// Same for the trainable entries of a store; `loss` reads them through
/// Tape::param. One report per entry.
std::vector<GradCheckReport> check_store(const std::string& label, ParamStore<double>& store,
                                         const StoreLoss& loss, const GradCheckOptions& options,
                                         Rng& rng, std::int64_t probes = 64);

/// Every differentiable op in several configurations.
std::vector<GradCheckReport> gradcheck_ops(std::uint64_t seed, double tolerance = 1e-4);

/// LKA block and decoder block (parameters and input).
std::vector<GradCheckReport> gradcheck_blocks(std::uint64_t seed, double tolerance = 1e-4);

/// Side of the images used by gradcheck_model. At 32x32 the deepest
/// batch-norm layers see two values per channel and the loss becomes too
/// badly conditioned for finite differences.
inline constexpr std::int64_t kGradcheckImage = 64;

/// Whole model on a batch of two kGradcheckImage^2 images with cross-entropy
/// loss. Relative errors use a floor derived from the gradient scale of the
/// whole check.
std::vector<GradCheckReport> gradcheck_model(const ModelConfig& cfg, std::uint64_t seed,
                                             double tolerance = 1e-3,
                                             std::int64_t probes_per_tensor = 3);

}  // namespace lkaseg
