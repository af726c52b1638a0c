#include "camho/trace.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "camho/error.hpp"

namespace camho {

struct TraceData {
  RawTrace raw;
  std::vector<std::vector<double>> capacities;
  // Per camera CSR over epochs: deviation_offsets[i][t-1]..[t] index deviations[i].
  std::vector<std::vector<std::size_t>> deviation_offsets;
  std::vector<std::vector<PixelDelta>> deviations;
};

namespace {

std::string where(int camera, int t, int row, int col) {
  std::ostringstream os;
  os << "(camera " << camera << ", t " << t << ", row " << row << ", col " << col << ")";
  return os.str();
}

}  // namespace

std::vector<Violation> validate(const RawTrace& raw) {
  std::vector<Violation> out;
  auto add = [&](Violation v) { out.push_back(std::move(v)); };

  if (raw.epoch_interval_ms <= 0)
    add({"header", "epoch_interval_ms must be > 0"});
  if (raw.frame_width <= 0 || raw.frame_height <= 0)
    add({"header", "frame dimensions must be positive"});
  if (raw.length <= 0) add({"header", "length must be positive"});
  if (raw.frames.empty()) add({"header", "trace has no camera streams"});
  if (raw.powers_dbm.empty()) add({"header", "trace has no BS power streams"});
  if (raw.budgets.size() != raw.powers_dbm.size())
    add({"header", "budget count " + std::to_string(raw.budgets.size()) +
                       " != BS count " + std::to_string(raw.powers_dbm.size())});
  for (std::size_t j = 0; j < raw.budgets.size(); ++j) {
    try {
      raw.budgets[j].validate();
    } catch (const InvalidArgument& e) {
      add({"budget", e.what(), 0, static_cast<int>(j + 1)});
    }
  }
  if (!out.empty() && (raw.frame_width <= 0 || raw.frame_height <= 0)) return out;

  const auto frame_size = static_cast<std::size_t>(raw.frame_width) * raw.frame_height;
  for (std::size_t i = 0; i < raw.frames.size(); ++i) {
    const auto& stream = raw.frames[i];
    const int cam = static_cast<int>(i + 1);
    if (stream.size() % frame_size != 0) {
      add({"length-mismatch",
           "camera " + std::to_string(cam) + " stream is not a whole number of frames", cam});
    }
    const auto frames = static_cast<long long>(stream.size() / frame_size);
    if (frames != raw.length) {
      add({"length-mismatch",
           "camera " + std::to_string(cam) + " has " + std::to_string(frames) +
               " frames, expected " + std::to_string(raw.length),
           cam});
    }
    for (std::size_t k = 0; k < stream.size(); ++k) {
      const float v = stream[k];
      if (!(v >= 0.0f && v <= 1.0f)) {
        const int t = static_cast<int>(k / frame_size) + 1;
        const int pix = static_cast<int>(k % frame_size);
        const int row = pix / raw.frame_width;
        const int col = pix % raw.frame_width;
        add({"pixel-range", "pixel " + std::to_string(v) + " outside [0,1] at " +
                                where(cam, t, row, col),
             cam, 0, t, row, col});
      }
    }
  }
  for (std::size_t j = 0; j < raw.powers_dbm.size(); ++j) {
    const auto& series = raw.powers_dbm[j];
    const int bs = static_cast<int>(j + 1);
    if (static_cast<long long>(series.size()) != raw.length) {
      add({"length-mismatch",
           "BS " + std::to_string(bs) + " has " + std::to_string(series.size()) +
               " power samples, expected " + std::to_string(raw.length),
           0, bs});
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double p = series[k];
      if (std::isnan(p) || p == std::numeric_limits<double>::infinity()) {
        add({"power-nan", "BS " + std::to_string(bs) + " power invalid at t " +
                              std::to_string(k + 1),
             0, bs, static_cast<int>(k + 1)});
      }
    }
  }
  return out;
}

std::string format_violations(const std::vector<Violation>& report) {
  std::ostringstream os;
  for (const auto& v : report) os << v.kind << ": " << v.detail << "\n";
  return os.str();
}

Trace Trace::from_raw(RawTrace raw) {
  const auto report = validate(raw);
  if (!report.empty()) throw FormatError("invalid trace:\n" + format_violations(report));

  auto data = std::make_shared<TraceData>();
  const int T = raw.length;
  const auto frame_size = static_cast<std::size_t>(raw.frame_width) * raw.frame_height;

  data->capacities.resize(raw.powers_dbm.size());
  for (std::size_t j = 0; j < raw.powers_dbm.size(); ++j) {
    auto& cap = data->capacities[j];
    cap.resize(T);
    for (int t = 0; t < T; ++t) cap[t] = capacity_bps(PowerDbm{raw.powers_dbm[j][t]}, raw.budgets[j]);
  }

  data->deviation_offsets.resize(raw.frames.size());
  data->deviations.resize(raw.frames.size());
  for (std::size_t i = 0; i < raw.frames.size(); ++i) {
    auto& offsets = data->deviation_offsets[i];
    auto& devs = data->deviations[i];
    offsets.assign(T + 1, 0);
    const float* px = raw.frames[i].data();
    for (int t = 0; t < T; ++t) {
      for (std::size_t k = 0; k < frame_size; ++k) {
        const float v = px[t * frame_size + k];
        if (v != 1.0f) devs.push_back({static_cast<std::uint32_t>(k), static_cast<double>(v) - 1.0});
      }
      offsets[t + 1] = devs.size();
    }
  }

  data->raw = std::move(raw);
  return Trace(std::move(data), 0, T);
}

int Trace::num_cameras() const { return static_cast<int>(data_->raw.frames.size()); }
int Trace::num_bs() const { return static_cast<int>(data_->raw.powers_dbm.size()); }
int Trace::frame_width() const { return data_->raw.frame_width; }
int Trace::frame_height() const { return data_->raw.frame_height; }
int Trace::epoch_interval_ms() const { return data_->raw.epoch_interval_ms; }
const std::string& Trace::provenance() const { return data_->raw.provenance; }
std::optional<std::uint64_t> Trace::seed() const { return data_->raw.seed; }

const LinkBudget& Trace::budget(int bs) const {
  if (bs < 1 || bs > num_bs()) throw InvalidArgument("BS index out of range: " + std::to_string(bs));
  return data_->raw.budgets[bs - 1];
}

void Trace::check_epoch(int t) const {
  if (t < 1 || t > length_)
    throw EndOfTrace("epoch " + std::to_string(t) + " outside segment of length " +
                     std::to_string(length_));
}

std::span<const float> Trace::frame(int camera, int t) const {
  if (camera < 1 || camera > num_cameras())
    throw InvalidArgument("camera index out of range: " + std::to_string(camera));
  check_epoch(t);
  const auto n = static_cast<std::size_t>(frame_size());
  return std::span<const float>(data_->raw.frames[camera - 1]).subspan((offset_ + t - 1) * n, n);
}

std::span<const PixelDelta> Trace::frame_deviations(int camera, int t) const {
  if (camera < 1 || camera > num_cameras())
    throw InvalidArgument("camera index out of range: " + std::to_string(camera));
  check_epoch(t);
  const auto& offsets = data_->deviation_offsets[camera - 1];
  const std::size_t a = offsets[offset_ + t - 1];
  const std::size_t b = offsets[offset_ + t];
  return std::span<const PixelDelta>(data_->deviations[camera - 1]).subspan(a, b - a);
}

PowerDbm Trace::power(int bs, int t) const {
  if (bs < 1 || bs > num_bs()) throw InvalidArgument("BS index out of range: " + std::to_string(bs));
  check_epoch(t);
  return PowerDbm{data_->raw.powers_dbm[bs - 1][offset_ + t - 1]};
}

double Trace::capacity(int bs, int t) const {
  if (bs < 1 || bs > num_bs()) throw InvalidArgument("BS index out of range: " + std::to_string(bs));
  check_epoch(t);
  return data_->capacities[bs - 1][offset_ + t - 1];
}

std::span<const double> Trace::capacity_series(int bs) const {
  if (bs < 1 || bs > num_bs()) throw InvalidArgument("BS index out of range: " + std::to_string(bs));
  return std::span<const double>(data_->capacities[bs - 1]).subspan(offset_, length_);
}

Trace Trace::segment(int first, int count) const {
  if (first < 1 || count < 1 || first + count - 1 > length_)
    throw InvalidArgument("segment [" + std::to_string(first) + ", +" + std::to_string(count) +
                          ") outside view of length " + std::to_string(length_));
  return Trace(data_, offset_ + first - 1, count);
}

RawTrace Trace::to_raw() const {
  const auto& src = data_->raw;
  RawTrace out;
  out.epoch_interval_ms = src.epoch_interval_ms;
  out.length = length_;
  out.frame_width = src.frame_width;
  out.frame_height = src.frame_height;
  out.budgets = src.budgets;
  out.provenance = src.provenance;
  out.seed = src.seed;
  const auto n = static_cast<std::size_t>(frame_size());
  for (const auto& stream : src.frames)
    out.frames.emplace_back(stream.begin() + offset_ * n, stream.begin() + (offset_ + length_) * n);
  for (const auto& series : src.powers_dbm)
    out.powers_dbm.emplace_back(series.begin() + offset_, series.begin() + offset_ + length_);
  return out;
}

std::pair<Trace, Trace> split(const Trace& trace, SplitSpec spec) {
  const int T = trace.length();
  if (!(1 < spec.boundary && spec.boundary < T))
    throw InvalidArgument("split boundary T'=" + std::to_string(spec.boundary) +
                          " must satisfy 1 < T' < " + std::to_string(T));
  return {trace.segment(1, spec.boundary), trace.segment(spec.boundary + 1, T - spec.boundary)};
}

// ---------------------------------------------------------------------------
// On-disk format

std::string format_double(double v) {
  if (v == -std::numeric_limits<double>::infinity()) return "-inf";
  if (v == std::numeric_limits<double>::infinity()) return "inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw FormatError("not a number: '" + std::string(text) + "'");
  return v;
}

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<char> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot open " + p.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + p.string());
}

std::vector<float> decode_f32(const std::vector<char>& bytes, const fs::path& p) {
  if (bytes.size() % 4 != 0) throw FormatError(p.string() + ": size is not a multiple of 4 bytes");
  std::vector<float> out(bytes.size() / 4);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : out) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<std::uint32_t>(f)));
  }
  return out;
}

std::string encode_f32(const std::vector<float>& values) {
  std::string out(values.size() * 4, '\0');
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      const auto w = __builtin_bswap32(std::bit_cast<std::uint32_t>(values[k]));
      std::memcpy(out.data() + 4 * k, &w, 4);
    }
  } else {
    std::memcpy(out.data(), values.data(), out.size());
  }
  return out;
}

template <class T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("manifest.json: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: field '") + key + "': " + e.what());
  }
}

}  // namespace

RawTrace read_trace_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw FormatError("not a trace directory: " + dir.string());
  json manifest;
  {
    const auto bytes = read_file(dir / "manifest.json");
    try {
      manifest = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
      throw FormatError("manifest.json: " + std::string(e.what()));
    }
  }
  if (required<int>(manifest, "format_version") != kTraceFormatVersion)
    throw FormatError("manifest.json: unsupported format_version");

  RawTrace raw;
  raw.epoch_interval_ms = required<int>(manifest, "epoch_interval_ms");
  raw.length = required<int>(manifest, "length");
  raw.frame_width = required<int>(manifest, "frame_width");
  raw.frame_height = required<int>(manifest, "frame_height");
  const int I = required<int>(manifest, "num_cameras");
  const int J = required<int>(manifest, "num_bs");
  if (I < 1 || J < 1) throw FormatError("manifest.json: num_cameras and num_bs must be >= 1");
  raw.provenance = manifest.value("provenance", std::string());
  if (manifest.contains("seed") && !manifest["seed"].is_null())
    raw.seed = manifest["seed"].get<std::uint64_t>();
  const auto budgets = required<json>(manifest, "budgets");
  if (!budgets.is_array() || static_cast<int>(budgets.size()) != J)
    throw FormatError("manifest.json: budgets must list one entry per BS");
  for (const auto& b : budgets)
    raw.budgets.push_back({required<double>(b, "bandwidth_hz"), required<double>(b, "noise_psd_dbm_hz")});

  for (int i = 1; i <= I; ++i) {
    const auto p = dir / ("camera_" + std::to_string(i) + ".f32");
    raw.frames.push_back(decode_f32(read_file(p), p));
  }

  const auto csv_bytes = read_file(dir / "powers.csv");
  std::istringstream csv(std::string(csv_bytes.begin(), csv_bytes.end()));
  std::string line;
  if (!std::getline(csv, line)) throw FormatError("powers.csv: empty file");
  {
    std::string expected = "t";
    for (int j = 1; j <= J; ++j) expected += ",bs_" + std::to_string(j) + "_dbm";
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected) throw FormatError("powers.csv: header must be '" + expected + "'");
  }
  raw.powers_dbm.assign(J, {});
  int row = 0;
  while (std::getline(csv, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (static_cast<int>(cells.size()) != J + 1)
      throw FormatError("powers.csv: row " + std::to_string(row) + " has wrong column count");
    if (parse_double(cells[0]) != row)
      throw FormatError("powers.csv: row " + std::to_string(row) + " has out-of-order t");
    for (int j = 0; j < J; ++j) raw.powers_dbm[j].push_back(parse_double(cells[j + 1]));
  }
  return raw;
}

Trace load_trace_dir(const fs::path& dir) { return Trace::from_raw(read_trace_dir(dir)); }

void write_raw_trace_dir(const RawTrace& raw, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest = {
      {"format_version", kTraceFormatVersion},
      {"epoch_interval_ms", raw.epoch_interval_ms},
      {"num_cameras", raw.frames.size()},
      {"num_bs", raw.powers_dbm.size()},
      {"length", raw.length},
      {"frame_width", raw.frame_width},
      {"frame_height", raw.frame_height},
      {"provenance", raw.provenance},
      {"seed", raw.seed ? json(*raw.seed) : json(nullptr)},
  };
  json budgets = json::array();
  for (const auto& b : raw.budgets)
    budgets.push_back({{"bandwidth_hz", b.bandwidth_hz}, {"noise_psd_dbm_hz", b.noise_psd_dbm_hz}});
  manifest["budgets"] = budgets;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  for (std::size_t i = 0; i < raw.frames.size(); ++i)
    write_file(dir / ("camera_" + std::to_string(i + 1) + ".f32"), encode_f32(raw.frames[i]));

  std::string csv = "t";
  for (std::size_t j = 1; j <= raw.powers_dbm.size(); ++j) csv += ",bs_" + std::to_string(j) + "_dbm";
  csv += "\n";
  for (int t = 0; t < raw.length; ++t) {
    csv += std::to_string(t + 1);
    for (const auto& series : raw.powers_dbm) {
      csv += ',';
      csv += format_double(series.at(t));
    }
    csv += '\n';
  }
  write_file(dir / "powers.csv", csv);
}

void write_trace_dir(const Trace& trace, const fs::path& dir) { write_raw_trace_dir(trace.to_raw(), dir); }

}  // namespace camho
