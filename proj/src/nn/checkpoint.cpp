#include "camho/nn/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "camho/error.hpp"

namespace camho::nn {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'M', 'H', 'O', 'Q', 'N', 'N'};

template <class T>
void put(std::string& out, T v) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t k = 0; k < sizeof(T); ++k) out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * k)) & 0xff));
}

void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}

  template <class T>
  T get() {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + k])) << (8 * k);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("checkpoint: truncated file");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const Layout layout(ck.arch);
  if (ck.params.size() != layout.parameter_count())
    throw InvalidArgument("checkpoint: parameter count does not match architecture");
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, Checkpoint::kVersion);
  const std::string meta = nlohmann::json{{"arch", arch_to_json(ck.arch)}, {"metadata", ck.metadata}}.dump();
  put<std::uint64_t>(out, meta.size());
  out += meta;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(layout.blocks().size()));
  for (const auto& b : layout.blocks()) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(b.name.size()));
    out += b.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(b.shape.size()));
    for (int d : b.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    put<std::uint64_t>(out, b.size);
    for (std::size_t k = 0; k < b.size; ++k) put_f64(out, ck.params[b.offset + k]);
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw FormatError("checkpoint: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw CompatibilityError("checkpoint: unsupported format version " + std::to_string(version));
  const auto meta_len = r.get<std::uint64_t>();
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(r.bytes(meta_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("checkpoint: metadata is not JSON: ") + e.what());
  }
  Checkpoint ck;
  if (!meta.contains("arch")) throw FormatError("checkpoint: metadata lacks 'arch'");
  ck.arch = arch_from_json(meta["arch"]);
  ck.metadata = meta.value("metadata", nlohmann::json::object());
  const Layout layout(ck.arch);
  ck.params.assign(layout.parameter_count(), 0.0);
  const auto nblocks = r.get<std::uint32_t>();
  if (nblocks != layout.blocks().size()) throw FormatError("checkpoint: block count does not match architecture");
  for (const auto& b : layout.blocks()) {
    const std::string name = r.bytes(r.get<std::uint16_t>());
    if (name != b.name) throw FormatError("checkpoint: expected block '" + b.name + "', found '" + name + "'");
    const auto rank = r.get<std::uint8_t>();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.get<std::uint32_t>());
    if (shape != b.shape) throw FormatError("checkpoint: block '" + name + "' has the wrong shape");
    if (r.get<std::uint64_t>() != b.size) throw FormatError("checkpoint: block '" + name + "' has the wrong size");
    for (std::size_t k = 0; k < b.size; ++k) {
      const double v = r.get_f64();
      if (!std::isfinite(v)) throw FormatError("checkpoint: block '" + name + "' holds a non-finite value");
      ck.params[b.offset + k] = v;
    }
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ck);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace camho::nn
