#include "hsvt/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hsvt/errors.hpp"

namespace hsvt {

namespace {

void put_le(std::ostream& os, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) {
    const char b = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(&b, 1);
  }
}

uint64_t get_le(std::istream& is, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    unsigned char b;
    is.read(reinterpret_cast<char*>(&b), 1);
    if (!is) throw ValidationError("truncated record");
    v |= static_cast<uint64_t>(b) << (8 * i);
  }
  return v;
}

void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, 4);
  put_le(os, u, 4);
}

float get_f32(std::istream& is) {
  const uint32_t u = static_cast<uint32_t>(get_le(is, 4));
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}

void validate_event(const Event& e, int w, int h, const std::string& where) {
  if (e.x >= w || e.y >= h) {
    throw ValidationError("event coordinates out of range at " + where);
  }
  if (e.p != 1 && e.p != -1) {
    throw ValidationError("event polarity must be +1/-1 at " + where);
  }
}

}  // namespace

EventStream read_events(const std::string& path, EventFormat fmt,
                        int sensor_width, int sensor_height,
                        bool* warned_unsorted) {
  std::ifstream is(path, fmt == EventFormat::Bin ? std::ios::binary : std::ios::in);
  if (!is) throw IoError("cannot open event file: " + path);
  EventStream s;
  s.sensor_width = sensor_width;
  s.sensor_height = sensor_height;

  if (fmt == EventFormat::Csv) {
    std::string line;
    int64_t line_no = 0;
    bool saw_header = false;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      if (!saw_header) {
        saw_header = true;
        if (line.rfind("t_us", 0) == 0) continue;  // header optional on read
      }
      std::istringstream ls(line);
      std::string field;
      long long vals[4];
      for (int i = 0; i < 4; ++i) {
        if (!std::getline(ls, field, ',')) {
          throw ValidationError("malformed event at line " + std::to_string(line_no));
        }
        try {
          vals[i] = std::stoll(field);
        } catch (const std::exception&) {
          throw ValidationError("malformed event at line " + std::to_string(line_no));
        }
      }
      if (vals[0] < 0 || vals[1] < 0 || vals[2] < 0) {
        throw ValidationError("negative field at line " + std::to_string(line_no));
      }
      Event e;
      e.t = static_cast<uint64_t>(vals[0]);
      e.x = static_cast<uint16_t>(vals[1]);
      e.y = static_cast<uint16_t>(vals[2]);
      e.p = static_cast<int8_t>(vals[3]);
      validate_event(e, sensor_width, sensor_height, "line " + std::to_string(line_no));
      s.events.push_back(e);
    }
  } else {
    int64_t offset = 0;
    while (true) {
      is.peek();
      if (is.eof()) break;
      Event e;
      e.t = get_le(is, 8);
      e.x = static_cast<uint16_t>(get_le(is, 2));
      e.y = static_cast<uint16_t>(get_le(is, 2));
      e.p = static_cast<int8_t>(get_le(is, 1));
      get_le(is, 3);  // pad
      validate_event(e, sensor_width, sensor_height,
                     "byte offset " + std::to_string(offset));
      s.events.push_back(e);
      offset += 16;
    }
  }

  const bool sorted = std::is_sorted(
      s.events.begin(), s.events.end(),
      [](const Event& a, const Event& b) { return a.t < b.t; });
  if (!sorted) {
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
  }
  if (warned_unsorted) *warned_unsorted = !sorted;
  return s;
}

void write_events(const std::string& path, EventFormat fmt, const EventStream& s) {
  std::ofstream os(path, fmt == EventFormat::Bin ? std::ios::binary : std::ios::out);
  if (!os) throw IoError("cannot open event file for write: " + path);
  if (fmt == EventFormat::Csv) {
    os << "t_us,x,y,p\n";
    for (const auto& e : s.events) {
      os << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
    }
  } else {
    for (const auto& e : s.events) {
      put_le(os, e.t, 8);
      put_le(os, e.x, 2);
      put_le(os, e.y, 2);
      put_le(os, static_cast<uint8_t>(e.p), 1);
      put_le(os, 0, 3);
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

FrameTensorSequence accumulate(const EventStream& stream, const WindowSpec& spec,
                               std::optional<uint64_t> t0_opt,
                               std::optional<int64_t> num_windows_opt,
                               bool binarize) {
  if (spec.width != stream.sensor_width || spec.height != stream.sensor_height) {
    throw ValidationError("window spec extent does not match sensor");
  }
  if (spec.delta_t_ms <= 0.0 || spec.t_bins < 1) {
    throw ValidationError("window spec requires delta_t > 0 and t_bins >= 1");
  }
  const uint64_t dt = spec.delta_t_us();
  FrameTensorSequence out;
  if (stream.events.empty() && !num_windows_opt) return out;

  const uint64_t t0 = t0_opt.value_or(stream.events.empty() ? 0 : stream.events.front().t);
  int64_t num_windows;
  if (num_windows_opt) {
    num_windows = *num_windows_opt;
  } else {
    const uint64_t t_last = stream.events.back().t;
    num_windows = t_last < t0 ? 0 : static_cast<int64_t>((t_last - t0) / dt) + 1;
  }
  const int64_t H = spec.height, W = spec.width, C = 2 * spec.t_bins;
  for (int64_t i = 0; i < num_windows; ++i) {
    out.frames.push_back(Tensor::zeros({C, H, W}));
    out.window_starts.push_back(t0 + static_cast<uint64_t>(i) * dt);
  }
  for (const auto& e : stream.events) {
    if (e.t < t0) {
      ++out.stats.dropped;
      continue;
    }
    const int64_t win = static_cast<int64_t>((e.t - t0) / dt);
    if (win >= num_windows) {
      ++out.stats.dropped;
      continue;
    }
    const uint64_t rel = e.t - out.window_starts[static_cast<size_t>(win)];
    const int64_t sub = static_cast<int64_t>(rel * static_cast<uint64_t>(spec.t_bins) / dt);
    const int64_t c = 2 * sub + (e.p > 0 ? 0 : 1);
    auto& v = out.frames[static_cast<size_t>(win)]
                  .data()[static_cast<size_t>((c * H + e.y) * W + e.x)];
    v = binarize ? 1.0 : v + 1.0;
    ++out.stats.kept;
  }
  return out;
}

BoxRecord corner_to_xywh(const CornerBox& b) {
  if (b.x2 <= b.x1 || b.y2 <= b.y1) {
    throw ValidationError("corner box must satisfy x2 > x1 and y2 > y1");
  }
  BoxRecord r;
  r.x = static_cast<float>(b.x1);
  r.y = static_cast<float>(b.y1);
  r.w = static_cast<float>(b.x2 - b.x1);
  r.h = static_cast<float>(b.y2 - b.y1);
  return r;
}

CornerBox xywh_to_corner(const BoxRecord& r) {
  if (r.w <= 0 || r.h <= 0) throw ValidationError("box width/height must be positive");
  return CornerBox{r.x, r.y, r.x + r.w, r.y + r.h};
}

namespace {
constexpr char kLabelMagic[8] = {'H', 'S', 'V', 'T', 'L', 'B', 'L', '1'};

void validate_record(const BoxRecord& r, const std::string& where) {
  if (r.w <= 0 || r.h <= 0) {
    throw ValidationError("box width/height must be positive at " + where);
  }
  if (r.class_confidence < 0.0f || r.class_confidence > 1.0f) {
    throw ValidationError("class_confidence outside [0,1] at " + where);
  }
}
}  // namespace

std::vector<BoxRecord> read_labels(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open label file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kLabelMagic, 8) != 0) {
    throw ValidationError("bad label file magic: " + path);
  }
  const uint32_t count = static_cast<uint32_t>(get_le(is, 4));
  std::vector<BoxRecord> out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    BoxRecord r;
    r.t = get_le(is, 8);
    r.x = static_cast<float>(get_le(is, 2));
    r.y = static_cast<float>(get_le(is, 2));
    r.w = static_cast<float>(get_le(is, 2));
    r.h = static_cast<float>(get_le(is, 2));
    r.class_id = static_cast<uint32_t>(get_le(is, 2));
    r.track_id = static_cast<uint32_t>(get_le(is, 2));
    r.class_confidence = get_f32(is);
    validate_record(r, "record " + std::to_string(i));
    out.push_back(r);
  }
  return out;
}

void write_labels(const std::string& path, const std::vector<BoxRecord>& records) {
  for (size_t i = 0; i < records.size(); ++i) {
    validate_record(records[i], "record " + std::to_string(i));
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open label file for write: " + path);
  os.write(kLabelMagic, 8);
  put_le(os, records.size(), 4);
  for (const auto& r : records) {
    put_le(os, r.t, 8);
    put_le(os, static_cast<uint64_t>(std::llround(r.x)), 2);
    put_le(os, static_cast<uint64_t>(std::llround(r.y)), 2);
    put_le(os, static_cast<uint64_t>(std::llround(r.w)), 2);
    put_le(os, static_cast<uint64_t>(std::llround(r.h)), 2);
    put_le(os, r.class_id, 2);
    put_le(os, r.track_id, 2);
    put_f32(os, r.class_confidence);
  }
  if (!os) throw IoError("write failed: " + path);
}

LabelGroups align_labels(const std::vector<BoxRecord>& labels,
                         const std::vector<uint64_t>& window_starts,
                         uint64_t delta_t_us) {
  LabelGroups g;
  g.per_window.resize(window_starts.size());
  if (window_starts.empty()) {
    g.dropped = static_cast<int64_t>(labels.size());
    return g;
  }
  const uint64_t t0 = window_starts.front();
  for (const auto& r : labels) {
    if (r.t < t0) {
      ++g.dropped;
      continue;
    }
    const uint64_t win = (r.t - t0) / delta_t_us;
    if (win >= window_starts.size()) {
      ++g.dropped;
      continue;
    }
    g.per_window[static_cast<size_t>(win)].push_back(r);
  }
  return g;
}

double preset_delta_t_ms(const std::string& dataset) {
  if (dataset == "gen1") return 50.0;
  if (dataset == "fall") return 200.0;
  if (dataset == "air") return 10.0;
  if (dataset == "synthetic") return 10.0;
  throw ValidationError("unknown dataset preset: " + dataset);
}

}  // namespace hsvt
