#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hsvt/errors.hpp"
#include "hsvt/events.hpp"
#include "hsvt/nn.hpp"

using namespace hsvt;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

EventStream random_stream(int64_t n, int w, int h, uint64_t t_max, Rng& rng) {
  EventStream s;
  s.sensor_width = w;
  s.sensor_height = h;
  s.events.reserve(static_cast<size_t>(n));
  uint64_t t = 0;
  for (int64_t i = 0; i < n; ++i) {
    t += static_cast<uint64_t>(rng.randint(0, static_cast<int64_t>(t_max / static_cast<uint64_t>(n))));
    Event e;
    e.t = t;
    e.x = static_cast<uint16_t>(rng.randint(0, w - 1));
    e.y = static_cast<uint16_t>(rng.randint(0, h - 1));
    e.p = rng.randint(0, 1) ? 1 : -1;
    s.events.push_back(e);
  }
  return s;
}

}  // namespace

TEST_CASE("event file round-trips in both formats") {
  Rng rng(21);
  EventStream s = random_stream(500, 32, 24, 100000, rng);
  for (EventFormat fmt : {EventFormat::Csv, EventFormat::Bin}) {
    const std::string p = tmp_path(fmt == EventFormat::Csv ? "ev_rt.csv" : "ev_rt.bin");
    write_events(p, fmt, s);
    EventStream r = read_events(p, fmt, 32, 24);
    CHECK(r.events == s.events);
    std::remove(p.c_str());
  }
}

TEST_CASE("csv header and validation") {
  const std::string p = tmp_path("ev_hdr.csv");
  {
    std::ofstream f(p);
    f << "t_us,x,y,p\n10,1,2,1\n20,3,0,-1\n";
  }
  EventStream r = read_events(p, EventFormat::Csv, 8, 8);
  CHECK(r.events.size() == 2);
  CHECK(r.events[0].t == 10);
  CHECK(r.events[1].p == -1);

  {
    std::ofstream f(p);
    f << "10,1,2,5\n";  // bad polarity
  }
  CHECK_THROWS_AS(read_events(p, EventFormat::Csv, 8, 8), ValidationError);
  {
    std::ofstream f(p);
    f << "10,9,2,1\n";  // x out of range
  }
  CHECK_THROWS_AS(read_events(p, EventFormat::Csv, 8, 8), ValidationError);
  {
    std::ofstream f(p);
    f << "10,notanumber,2,1\n";
  }
  CHECK_THROWS_AS(read_events(p, EventFormat::Csv, 8, 8), ValidationError);
  std::remove(p.c_str());
  CHECK_THROWS_AS(read_events(tmp_path("missing_events.csv"), EventFormat::Csv, 8, 8), IoError);
}

TEST_CASE("unsorted input is sorted with a warning flag") {
  const std::string p = tmp_path("ev_unsorted.csv");
  {
    std::ofstream f(p);
    f << "t_us,x,y,p\n30,0,0,1\n10,1,1,1\n20,2,2,-1\n";
  }
  bool warned = false;
  EventStream r = read_events(p, EventFormat::Csv, 8, 8, &warned);
  CHECK(warned);
  CHECK(r.events[0].t == 10);
  CHECK(r.events[2].t == 30);
  std::remove(p.c_str());
}

TEST_CASE("accumulate conserves event counts on a large random stream") {
  Rng rng(22);
  EventStream s = random_stream(1000000, 64, 48, 2000000, rng);
  WindowSpec spec;
  spec.delta_t_ms = 10.0;
  spec.t_bins = 5;
  spec.width = 64;
  spec.height = 48;
  FrameTensorSequence seq = accumulate(s, spec);
  CHECK(seq.stats.kept + seq.stats.dropped == static_cast<int64_t>(s.events.size()));
  double total = 0;
  for (const auto& f : seq.frames) {
    for (double v : f.data()) {
      CHECK(v >= 0.0);
      total += v;
    }
  }
  CHECK(total == static_cast<double>(seq.stats.kept));
}

TEST_CASE("accumulate bin and channel indexing") {
  EventStream s;
  s.sensor_width = 4;
  s.sensor_height = 4;
  // dt = 10ms, t_bins = 2 -> sub-bin boundary at 5 ms
  s.events = {{0, 1, 2, 1}, {4999, 1, 2, 1}, {5000, 3, 0, -1}, {10000, 0, 0, 1}};
  WindowSpec spec;
  spec.delta_t_ms = 10.0;
  spec.t_bins = 2;
  spec.width = 4;
  spec.height = 4;
  FrameTensorSequence seq = accumulate(s, spec, uint64_t{0}, int64_t{1});
  REQUIRE(seq.frames.size() == 1);
  const auto& d = seq.frames[0].data();
  CHECK(d[(0 * 4 + 2) * 4 + 1] == 2.0);   // ch 0: sub-bin 0, positive
  CHECK(d[(3 * 4 + 0) * 4 + 3] == 1.0);   // ch 3: sub-bin 1, negative
  CHECK(seq.stats.dropped == 1);          // t=10000 is outside the one window
  FrameTensorSequence seqb = accumulate(s, spec, uint64_t{0}, int64_t{1}, true);
  CHECK(seqb.frames[0].data()[(0 * 4 + 2) * 4 + 1] == 1.0);  // binarized
}

TEST_CASE("accumulate window count defaults to covering the last event") {
  EventStream s;
  s.sensor_width = 2;
  s.sensor_height = 2;
  s.events = {{1000, 0, 0, 1}, {35000, 1, 1, -1}};
  WindowSpec spec;
  spec.delta_t_ms = 10.0;
  spec.t_bins = 1;
  spec.width = 2;
  spec.height = 2;
  FrameTensorSequence seq = accumulate(s, spec);
  CHECK(seq.frames.size() == 4);  // t0 = 1000, last event in window 3
  CHECK(seq.window_starts[0] == 1000);
  CHECK(seq.stats.dropped == 0);
}

TEST_CASE("delta-t presets") {
  CHECK(preset_delta_t_ms("gen1") == 50.0);
  CHECK(preset_delta_t_ms("fall") == 200.0);
  CHECK(preset_delta_t_ms("air") == 10.0);
  CHECK(preset_delta_t_ms("synthetic") == 10.0);
  CHECK_THROWS_AS(preset_delta_t_ms("imagenet"), ValidationError);
}

TEST_CASE("corner/xywh conversions") {
  BoxRecord r = corner_to_xywh({2, 3, 10, 7});
  CHECK(r.x == 2.0f);
  CHECK(r.w == 8.0f);
  CHECK(r.h == 4.0f);
  CornerBox c = xywh_to_corner(r);
  CHECK(c.x2 == 10.0);
  CHECK_THROWS_AS(corner_to_xywh({5, 3, 5, 7}), ValidationError);
}

TEST_CASE("label file round-trip and validation") {
  std::vector<BoxRecord> recs;
  for (int i = 0; i < 7; ++i) {
    BoxRecord r;
    r.t = static_cast<uint64_t>(i) * 50000;
    r.x = static_cast<float>(3 * i);
    r.y = static_cast<float>(2 * i);
    r.w = 10;
    r.h = 12;
    r.class_id = static_cast<uint32_t>(i % 2);
    r.track_id = static_cast<uint32_t>(i);
    r.class_confidence = 1.0f;
    recs.push_back(r);
  }
  const std::string p = tmp_path("labels.bin");
  write_labels(p, recs);
  // 8 magic + 4 count + 24 per record
  CHECK(std::filesystem::file_size(p) == 8 + 4 + 24 * recs.size());
  auto rt = read_labels(p);
  CHECK(rt == recs);
  std::remove(p.c_str());

  BoxRecord bad;
  bad.w = 0;
  bad.h = 5;
  CHECK_THROWS_AS(write_labels(p, {bad}), ValidationError);
  {
    std::ofstream f(p, std::ios::binary);
    f << "NOTMAGIC";
  }
  CHECK_THROWS_AS(read_labels(p), ValidationError);
  std::remove(p.c_str());
  CHECK_THROWS_AS(read_labels(tmp_path("missing_labels.bin")), IoError);
}

TEST_CASE("align_labels groups records into windows") {
  std::vector<BoxRecord> recs(3);
  recs[0].t = 500;
  recs[1].t = 10500;
  recs[2].t = 99999999;
  for (auto& r : recs) {
    r.w = 1;
    r.h = 1;
  }
  LabelGroups g = align_labels(recs, {0, 10000}, 10000);
  CHECK(g.per_window[0].size() == 1);
  CHECK(g.per_window[1].size() == 1);
  CHECK(g.dropped == 1);
}
