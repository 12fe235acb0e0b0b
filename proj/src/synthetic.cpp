#include "hsvt/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "hsvt/errors.hpp"

namespace hsvt {

SyntheticSequence moving_square_sequence(const SyntheticConfig& cfg, Rng& rng) {
  if (cfg.min_side < 2 || cfg.max_side >= std::min(cfg.width, cfg.height)) {
    throw ValidationError("square side out of range for the frame");
  }
  const int side = static_cast<int>(rng.randint(cfg.min_side, cfg.max_side));
  double px = static_cast<double>(rng.randint(0, cfg.width - side - 1));
  double py = static_cast<double>(rng.randint(0, cfg.height - side - 1));
  double vx = 0, vy = 0;
  while (vx == 0 && vy == 0) {
    vx = static_cast<double>(rng.randint(-cfg.max_speed, cfg.max_speed));
    vy = static_cast<double>(rng.randint(-cfg.max_speed, cfg.max_speed));
  }

  SyntheticSequence out;
  out.events.sensor_width = cfg.width;
  out.events.sensor_height = cfg.height;
  const uint64_t dt_us = static_cast<uint64_t>(cfg.delta_t_ms * 1000.0);
  const uint64_t sub_us = dt_us / static_cast<uint64_t>(cfg.t_bins);

  for (int w = 0; w < cfg.seq_len; ++w) {
    for (int sub = 0; sub < cfg.t_bins; ++sub) {
      // advance by a sub-bin's share of the per-window velocity, bouncing
      px += vx / cfg.t_bins;
      py += vy / cfg.t_bins;
      if (px < 0) { px = -px; vx = -vx; }
      if (py < 0) { py = -py; vy = -vy; }
      if (px + side > cfg.width - 1) { px = 2 * (cfg.width - 1 - side) - px; vx = -vx; }
      if (py + side > cfg.height - 1) { py = 2 * (cfg.height - 1 - side) - py; vy = -vy; }

      const int x0 = static_cast<int>(std::lround(px));
      const int y0 = static_cast<int>(std::lround(py));
      const uint64_t t = static_cast<uint64_t>(w) * dt_us +
                         static_cast<uint64_t>(sub) * sub_us + sub_us / 2;
      // vertical edges bright, horizontal edges dark
      for (int y = y0; y < y0 + side; ++y) {
        out.events.events.push_back({t, static_cast<uint16_t>(x0), static_cast<uint16_t>(y), 1});
      }
      for (int y = y0; y < y0 + side; ++y) {
        out.events.events.push_back({t, static_cast<uint16_t>(x0 + side - 1), static_cast<uint16_t>(y), 1});
      }
      for (int x = x0 + 1; x < x0 + side - 1; ++x) {
        out.events.events.push_back({t, static_cast<uint16_t>(x), static_cast<uint16_t>(y0), -1});
      }
      for (int x = x0 + 1; x < x0 + side - 1; ++x) {
        out.events.events.push_back({t, static_cast<uint16_t>(x), static_cast<uint16_t>(y0 + side - 1), -1});
      }
    }
    const int x0 = static_cast<int>(std::lround(px));
    const int y0 = static_cast<int>(std::lround(py));
    GroundTruth g;
    g.box = {static_cast<double>(x0), static_cast<double>(y0),
             static_cast<double>(side), static_cast<double>(side)};
    g.class_id = 0;
    out.labels.push_back({g});
  }

  std::sort(out.events.events.begin(), out.events.events.end(),
            [](const Event& a, const Event& b) {
              if (a.t != b.t) return a.t < b.t;
              if (a.y != b.y) return a.y < b.y;
              if (a.x != b.x) return a.x < b.x;
              return a.p < b.p;
            });
  return out;
}

std::vector<SequenceSample> make_moving_square_dataset(const SyntheticConfig& cfg,
                                                       Rng& rng) {
  std::vector<SequenceSample> out;
  WindowSpec spec;
  spec.delta_t_ms = cfg.delta_t_ms;
  spec.t_bins = cfg.t_bins;
  spec.height = cfg.height;
  spec.width = cfg.width;
  for (int i = 0; i < cfg.num_sequences; ++i) {
    SyntheticSequence seq = moving_square_sequence(cfg, rng);
    FrameTensorSequence frames =
        accumulate(seq.events, spec, uint64_t{0}, int64_t{cfg.seq_len}, /*binarize=*/true);
    SequenceSample sample;
    for (int w = 0; w < cfg.seq_len; ++w) {
      const Tensor& f = frames.frames[static_cast<size_t>(w)];
      WindowSample ws;
      ws.input = reshape(f, {1, f.dim(0), f.dim(1), f.dim(2)});
      ws.gts = seq.labels[static_cast<size_t>(w)];
      sample.push_back(std::move(ws));
    }
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace hsvt
