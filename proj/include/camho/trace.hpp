#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "camho/channel.hpp"

namespace camho {

inline constexpr int kTraceFormatVersion = 1;

/// Unvalidated trace contents as read from disk or produced by synthesis.
/// frames[i] holds camera i's frames back to back, row-major; powers_dbm[j]
/// holds one sample per epoch for BS j.
struct RawTrace {
  int epoch_interval_ms = 30;
  int length = 0;
  int frame_width = 40;
  int frame_height = 40;
  std::vector<std::vector<float>> frames;
  std::vector<std::vector<double>> powers_dbm;
  std::vector<LinkBudget> budgets;
  std::string provenance;
  std::optional<std::uint64_t> seed;
};

struct Violation {
  std::string kind;  // length-mismatch, pixel-range, power-nan, budget, header
  std::string detail;
  int camera = 0;  // 1-based, 0 = not applicable
  int bs = 0;
  int t = 0;
  int row = -1;
  int col = -1;
};

/// Every problem found in the raw trace; empty when the trace is valid.
std::vector<Violation> validate(const RawTrace& raw);
std::string format_violations(const std::vector<Violation>& report);

/// A pixel that differs from the far background (1.0).
struct PixelDelta {
  std::uint32_t index;  // row * width + col
  double delta;         // pixel - 1.0, exact in double
};

struct TraceData;

/// Immutable, shareable view over a validated trace. Copies and segments
/// alias the same storage. Epochs, cameras and BSs are 1-based.
class Trace {
 public:
  /// Validates and takes ownership; throws FormatError listing violations.
  static Trace from_raw(RawTrace raw);

  int length() const { return length_; }
  int offset() const { return offset_; }
  int num_cameras() const;
  int num_bs() const;
  int frame_width() const;
  int frame_height() const;
  int frame_size() const { return frame_width() * frame_height(); }
  int epoch_interval_ms() const;
  const LinkBudget& budget(int bs) const;
  const std::string& provenance() const;
  std::optional<std::uint64_t> seed() const;

  std::span<const float> frame(int camera, int t) const;
  std::span<const PixelDelta> frame_deviations(int camera, int t) const;
  PowerDbm power(int bs, int t) const;
  double capacity(int bs, int t) const;
  /// capacity(bs, 1..length) for this segment.
  std::span<const double> capacity_series(int bs) const;

  /// Epochs [first, first + count) of this view, renumbered from 1.
  Trace segment(int first, int count) const;
  bool shares_storage_with(const Trace& other) const { return data_ == other.data_; }

  /// Copy of this view's samples as a standalone raw trace.
  RawTrace to_raw() const;

 private:
  Trace(std::shared_ptr<const TraceData> data, int offset, int length)
      : data_(std::move(data)), offset_(offset), length_(length) {}
  void check_epoch(int t) const;

  std::shared_ptr<const TraceData> data_;
  int offset_ = 0;  // absolute epoch of local epoch 1, minus one
  int length_ = 0;
};

struct SplitSpec {
  int boundary = 0;  // last training epoch T'
};

/// Train segment covers 1..T', eval segment T'+1..T. Requires 1 < T' < T.
std::pair<Trace, Trace> split(const Trace& trace, SplitSpec spec);

/// Directory layout: manifest.json, camera_<i>.f32, powers.csv.
RawTrace read_trace_dir(const std::filesystem::path& dir);
Trace load_trace_dir(const std::filesystem::path& dir);
void write_trace_dir(const Trace& trace, const std::filesystem::path& dir);
void write_raw_trace_dir(const RawTrace& raw, const std::filesystem::path& dir);

/// Shortest decimal that round-trips; -inf as the literal "-inf".
std::string format_double(double v);
double parse_double(std::string_view text);

}  // namespace camho
