#include "lkaseg/param_store.hpp"

#include <stdexcept>

namespace lkaseg {

template <typename T>
typename ParamStore<T>::Entry& ParamStore<T>::add(std::string name, Tensor<T> value,
                                                  ParamKind kind, bool weight_decay) {
  if (name.empty()) throw std::invalid_argument("ParamStore: empty name");
  if (index_.contains(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  Entry e;
  e.name = name;
  e.kind = kind;
  if (kind == ParamKind::trainable) e.grad = Tensor<T>(value.shape());
  e.value = std::move(value);
  e.weight_decay = weight_decay;
  index_.emplace(std::move(name), entries_.size());
  entries_.push_back(std::move(e));
  return entries_.back();
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

template <typename T>
typename ParamStore<T>::Entry* ParamStore<T>::find(std::string_view name) {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

template <typename T>
const typename ParamStore<T>::Entry* ParamStore<T>::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &entries_[it->second];
}

template <typename T>
typename ParamStore<T>::Entry& ParamStore<T>::entry(std::string_view name) {
  Entry* e = find(name);
  if (e == nullptr) throw std::out_of_range("ParamStore: no entry named " + std::string(name));
  return *e;
}

template <typename T>
const typename ParamStore<T>::Entry& ParamStore<T>::entry(std::string_view name) const {
  const Entry* e = find(name);
  if (e == nullptr) throw std::out_of_range("ParamStore: no entry named " + std::string(name));
  return *e;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (Entry& e : entries_) {
    if (e.kind == ParamKind::trainable) e.grad.fill(T(0));
  }
}

template <typename T>
std::int64_t ParamStore<T>::count(ParamKind kind) const {
  return count_prefix("", kind);
}

template <typename T>
std::int64_t ParamStore<T>::count_prefix(std::string_view prefix, ParamKind kind) const {
  std::int64_t total = 0;
  for (const Entry& e : entries_) {
    if (e.kind == kind && std::string_view(e.name).starts_with(prefix)) total += e.value.numel();
  }
  return total;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace lkaseg
