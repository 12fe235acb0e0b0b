#pragma once

#include <vector>

#include "hsvt/events.hpp"

namespace hsvt {

struct FrameSequence {
  int height = 0;
  int width = 0;
  double fps = 0.0;
  std::vector<std::vector<double>> frames;  // H*W row-major intensities, >= 0
};

struct ConverterConfig {
  double c_pos = 0.2;
  double c_neg = 0.2;
  double log_eps = 1e-3;
};

// Threshold-crossing converter: per pixel, log intensity is linearly
// interpolated between consecutive frames and one event is emitted per full
// crossing of the contrast threshold, advancing the reference by the signed
// threshold. Output is sorted by (t, y, x, p).
EventStream frames_to_events(const FrameSequence& seq, const ConverterConfig& cfg);

}  // namespace hsvt
