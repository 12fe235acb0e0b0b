#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hsvt/tensor.hpp"

namespace hsvt {

struct Event {
  uint64_t t = 0;  // microseconds
  uint16_t x = 0;  // column
  uint16_t y = 0;  // row
  int8_t p = 1;    // +1 bright, -1 dark

  bool operator==(const Event&) const = default;
};

struct EventStream {
  int sensor_width = 0;
  int sensor_height = 0;
  std::vector<Event> events;  // nondecreasing t
};

struct WindowSpec {
  double delta_t_ms = 50.0;
  int t_bins = 10;
  int height = 0;
  int width = 0;

  uint64_t delta_t_us() const { return static_cast<uint64_t>(delta_t_ms * 1000.0); }
};

struct AccumStats {
  int64_t kept = 0;
  int64_t dropped = 0;  // events outside all requested windows
};

struct FrameTensorSequence {
  std::vector<Tensor> frames;  // each [2*t_bins, H, W], nonnegative counts
  std::vector<uint64_t> window_starts;
  AccumStats stats;
};

struct BoxRecord {
  uint64_t t = 0;  // microseconds
  float x = 0, y = 0;  // top-left, pixels
  float w = 0, h = 0;  // pixels, > 0
  uint32_t class_id = 0;
  float class_confidence = 1.0f;  // in [0, 1]
  uint32_t track_id = 0;

  bool operator==(const BoxRecord&) const = default;
};

struct CornerBox {
  double x1, y1, x2, y2;  // x2 > x1, y2 > y1
};

enum class EventFormat { Csv, Bin };

// CSV: header "t_us,x,y,p". Bin: raw 16-byte records
// (t:u64, x:u16, y:u16, p:i8, 3 pad bytes), little-endian.
EventStream read_events(const std::string& path, EventFormat fmt,
                        int sensor_width, int sensor_height,
                        bool* warned_unsorted = nullptr);
void write_events(const std::string& path, EventFormat fmt, const EventStream& s);

// Windowed accumulation: window i covers [t0 + i*dt, t0 + (i+1)*dt);
// sub-bin = floor(t_bins * (t - start) / dt); channel = 2*sub_bin + (p>0 ? 0:1).
// t0 defaults to the first event's timestamp; num_windows defaults to covering
// the last event.
FrameTensorSequence accumulate(const EventStream& stream, const WindowSpec& spec,
                               std::optional<uint64_t> t0 = std::nullopt,
                               std::optional<int64_t> num_windows = std::nullopt,
                               bool binarize = false);

BoxRecord corner_to_xywh(const CornerBox& b);
CornerBox xywh_to_corner(const BoxRecord& r);

// Label file: magic "HSVTLBL1", u32 record count, then fixed 24-byte records
// (t:u64, x:u16, y:u16, w:u16, h:u16, class_id:u16, track_id:u16,
//  class_confidence:f32), little-endian. Geometry is rounded to the nearest
// pixel on write.
std::vector<BoxRecord> read_labels(const std::string& path);
void write_labels(const std::string& path, const std::vector<BoxRecord>& records);

struct LabelGroups {
  std::vector<std::vector<BoxRecord>> per_window;
  int64_t dropped = 0;
};

LabelGroups align_labels(const std::vector<BoxRecord>& labels,
                         const std::vector<uint64_t>& window_starts,
                         uint64_t delta_t_us);

// 50 ms (gen1), 200 ms (fall), 10 ms (air); throws on unknown preset.
double preset_delta_t_ms(const std::string& dataset);

}  // namespace hsvt
