#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lkaseg/param_store.hpp"

// Checkpoint layout, all integers little-endian:
//
//   "LKC1"                       4-byte magic
//   u32 tensor_count
//   per tensor:
//     u16 name_length, name bytes (UTF-8)
//     u8  kind   (ParamKind)
//     u8  dtype  (0 = f32, 1 = f64)
//     u8  rank, then rank x u32 extents
//     raw payload, numel x sizeof(dtype)
//
// Tensors are written with rank 4 in store order. Readers accept rank 1..4
// and pad missing trailing extents with 1.

namespace lkaseg {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'L', 'K', 'C', '1'};

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ParamStore<T>& store);

/// Parses a whole checkpoint; converts payloads to T. Throws CheckpointError
/// naming the byte offset of the first problem.
template <typename T>
ParamStore<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::filesystem::path& path);

template <typename T>
ParamStore<T> load_checkpoint(const std::filesystem::path& path);

/// Copy every entry of `loaded` that `target` also holds. Validates all
/// names and shapes first so a failure leaves `target` untouched. Entries of
/// kind optimizer_state are skipped; missing model entries are an error.
template <typename T>
void assign_checkpoint(ParamStore<T>& target, const ParamStore<T>& loaded);

}  // namespace lkaseg
