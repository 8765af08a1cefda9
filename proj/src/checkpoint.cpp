#include "subens/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "subens/error.hpp"

namespace subens {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'U', 'B', 'E', 'N', 'S', 'C', 'K'};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw FormatError("cannot open " + path + " for writing");
  }
  template <class T>
  void put(T value) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    auto bits = std::bit_cast<U>(value);
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out_.write(bytes.data(), bytes.size());
  }
  void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void tensor(const Tensor& t) {
    put(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put(static_cast<std::uint64_t>(d));
    for (double v : t.data()) put(v);
  }
  void finish() {
    out_.flush();
    if (!out_) throw FormatError("write failed for " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw FormatError("cannot open checkpoint " + path);
  }
  template <class T>
  T get() {
    std::array<unsigned char, sizeof(T)> bytes{};
    in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in_) throw FormatError("truncated checkpoint " + path_);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
    return std::bit_cast<T>(bits);
  }
  void raw(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (!in_) throw FormatError("truncated checkpoint " + path_);
  }
  Tensor tensor() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw FormatError("implausible tensor rank in " + path_);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get<std::uint64_t>());
    const std::size_t count = shape_size(shape);
    if (count > (std::size_t{1} << 32)) throw FormatError("implausible tensor size in " + path_);
    std::vector<double> values(count);
    for (double& v : values) v = get<double>();
    return Tensor(std::move(shape), std::move(values));
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void write_checkpoint(const std::string& path, const ParamStore& params) {
  Writer w(path);
  w.raw(kMagic.data(), kMagic.size());
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint64_t>(params.seed()));
  w.put(static_cast<std::uint32_t>(params.layer_count()));
  for (const auto& [layer, p] : params) {
    w.put(static_cast<std::uint32_t>(layer));
    w.put(static_cast<std::uint8_t>(params.is_frozen(layer) ? 1 : 0));
    w.tensor(p.weight);
    w.tensor(p.bias);
  }
  w.finish();
}

ParamStore read_checkpoint(const std::string& path) {
  Reader r(path);
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kMagic) throw FormatError("bad checkpoint magic in " + path);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  }
  ParamStore params(r.get<std::uint64_t>());
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto layer = static_cast<std::size_t>(r.get<std::uint32_t>());
    const bool frozen = r.get<std::uint8_t>() != 0;
    LayerParams p;
    p.weight = r.tensor();
    p.bias = r.tensor();
    params.set(layer, std::move(p));
    if (frozen) params.freeze(layer);
  }
  if (!r.at_end()) throw FormatError("trailing bytes in checkpoint " + path);
  return params;
}

}  // namespace subens
