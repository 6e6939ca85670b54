#include "lkaseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

namespace lkaseg {
namespace {

class Writer {
 public:
  template <typename U>
  void put(U value) {
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                 std::conditional_t<sizeof(U) == 4, std::uint32_t,
                 std::conditional_t<sizeof(U) == 2, std::uint16_t, std::uint8_t>>>;
    const auto bits = std::bit_cast<Bits>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bytes.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
    }
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                 std::conditional_t<sizeof(U) == 4, std::uint32_t,
                 std::conditional_t<sizeof(U) == 2, std::uint16_t, std::uint8_t>>>;
    Bits bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      bits |= static_cast<Bits>(static_cast<Bits>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(U);
    return std::bit_cast<U>(bits);
  }
  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(fmt::format("checkpoint truncated at byte {} while reading {}", pos_,
                                        what));
    }
  }
  /// Reports a problem with the field that started at `at`.
  [[noreturn]] static void fail(std::size_t at, const std::string& msg) {
    throw CheckpointError(fmt::format("checkpoint byte {}: {}", at, msg));
  }
  [[nodiscard]] std::size_t pos() const { return pos_; }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const ParamStore<T>& store) {
  Writer w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put(static_cast<std::uint32_t>(store.size()));
  for (const auto& e : store) {
    if (e.name.size() > 0xFFFF) throw CheckpointError("tensor name too long: " + e.name);
    w.put(static_cast<std::uint16_t>(e.name.size()));
    w.put_bytes(e.name.data(), e.name.size());
    w.put(static_cast<std::uint8_t>(e.kind));
    w.put(static_cast<std::uint8_t>(dtype_of<T>()));
    w.put(std::uint8_t{4});
    const Shape& s = e.value.shape();
    for (std::int64_t d : {s.n, s.c, s.h, s.w}) w.put(static_cast<std::uint32_t>(d));
    for (T v : e.value.data()) w.put(v);
  }
  return std::move(w.bytes);
}

template <typename T>
ParamStore<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.get_string(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("checkpoint byte 0: bad magic, expected \"LKC1\"");
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  ParamStore<T> store;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = r.get<std::uint16_t>("name length");
    const std::size_t name_at = r.pos();
    std::string name = r.get_string(name_len, "name");
    std::size_t at = r.pos();
    const auto kind = r.get<std::uint8_t>("kind");
    if (kind > 2) Reader::fail(at, fmt::format("unknown tensor kind {}", kind));
    at = r.pos();
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype > 1) Reader::fail(at, fmt::format("unknown dtype code {}", dtype));
    at = r.pos();
    const auto rank = r.get<std::uint8_t>("rank");
    if (rank < 1 || rank > 4) Reader::fail(at, fmt::format("unsupported rank {}", rank));
    std::int64_t dims[4] = {1, 1, 1, 1};
    for (int i = 0; i < rank; ++i) {
      at = r.pos();
      dims[i] = r.get<std::uint32_t>("extent");
      if (dims[i] == 0) Reader::fail(at, "zero extent");
    }
    const Shape shape{dims[0], dims[1], dims[2], dims[3]};
    const std::size_t width = dtype == 0 ? 4 : 8;
    r.need(static_cast<std::size_t>(shape.numel()) * width, "payload");
    std::vector<T> values(static_cast<std::size_t>(shape.numel()));
    for (auto& v : values) {
      v = dtype == 0 ? static_cast<T>(r.get<float>("payload"))
                     : static_cast<T>(r.get<double>("payload"));
    }
    if (store.contains(name)) Reader::fail(name_at, "duplicate tensor name " + name);
    store.add(std::move(name), Tensor<T>(shape, std::move(values)), static_cast<ParamKind>(kind));
  }
  if (!r.done()) Reader::fail(r.pos(), "trailing bytes after last tensor");
  return store;
}

template <typename T>
void save_checkpoint(const ParamStore<T>& store, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

template <typename T>
ParamStore<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint<T>(bytes);
}

template <typename T>
void assign_checkpoint(ParamStore<T>& target, const ParamStore<T>& loaded) {
  for (const auto& e : target) {
    const auto* src = loaded.find(e.name);
    if (src == nullptr) throw CheckpointError("checkpoint lacks tensor " + e.name);
    if (src->value.shape() != e.value.shape()) {
      throw CheckpointError(fmt::format("checkpoint tensor {} has shape {}, model expects {}",
                                        e.name, src->value.shape().str(),
                                        e.value.shape().str()));
    }
  }
  for (auto& e : target) e.value = loaded.entry(e.name).value;
}

#define LKASEG_INSTANTIATE_CKPT(T)                                                       \
  template std::vector<std::uint8_t> encode_checkpoint(const ParamStore<T>&);           \
  template ParamStore<T> decode_checkpoint(const std::vector<std::uint8_t>&);           \
  template void save_checkpoint(const ParamStore<T>&, const std::filesystem::path&);    \
  template ParamStore<T> load_checkpoint(const std::filesystem::path&);                 \
  template void assign_checkpoint(ParamStore<T>&, const ParamStore<T>&);

LKASEG_INSTANTIATE_CKPT(float)
LKASEG_INSTANTIATE_CKPT(double)

}  // namespace lkaseg
