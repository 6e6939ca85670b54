#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>

#include "lkaseg/tensor.hpp"

namespace lkaseg {

enum class ParamKind : std::uint8_t {
  trainable = 0,
  buffer = 1,           // e.g. batch-norm running statistics
  optimizer_state = 2,  // e.g. momentum velocity
};

/// Insertion-ordered registry of named tensors.
///
/// Entries live in a deque so references handed out stay valid as the store
/// grows. Every trainable entry carries a gradient slot of the same shape.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    ParamKind kind = ParamKind::trainable;
    Tensor<T> value;
    Tensor<T> grad;  // empty unless trainable
    bool weight_decay = true;
  };

  Entry& add(std::string name, Tensor<T> value, ParamKind kind = ParamKind::trainable,
             bool weight_decay = true);

  [[nodiscard]] bool contains(std::string_view name) const;
  [[nodiscard]] Entry& entry(std::string_view name);
  [[nodiscard]] const Entry& entry(std::string_view name) const;
  [[nodiscard]] Entry* find(std::string_view name);
  [[nodiscard]] const Entry* find(std::string_view name) const;

  Tensor<T>& value(std::string_view name) { return entry(name).value; }
  [[nodiscard]] const Tensor<T>& value(std::string_view name) const { return entry(name).value; }
  Tensor<T>& grad(std::string_view name) { return entry(name).grad; }

  void zero_grad();

  /// Number of scalar values held in entries of the given kind.
  [[nodiscard]] std::int64_t count(ParamKind kind = ParamKind::trainable) const;
  /// Trainable scalar count over entries whose name starts with `prefix`.
  [[nodiscard]] std::int64_t count_prefix(std::string_view prefix,
                                          ParamKind kind = ParamKind::trainable) const;

  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  [[nodiscard]] auto begin() const { return entries_.begin(); }
  [[nodiscard]] auto end() const { return entries_.end(); }

 private:
  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace lkaseg
