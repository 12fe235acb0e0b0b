#pragma once

#include <vector>

#include "hsvt/detect.hpp"
#include "hsvt/events.hpp"
#include "hsvt/nn.hpp"

namespace hsvt {

// Built-in "moving square" dataset: a square of random size and velocity
// bounces around the frame, emitting events along its boundary each sub-bin;
// its bounding box at the end of each window is the label.
struct SyntheticConfig {
  int height = 64;
  int width = 64;
  int num_sequences = 32;
  int seq_len = 5;          // windows per sequence
  double delta_t_ms = 10.0; // synthetic preset window
  int t_bins = 4;
  int min_side = 12;
  int max_side = 24;
  int max_speed = 3;        // px per window, each axis
};

struct WindowSample {
  Tensor input;  // [1, 2*t_bins, H, W]
  std::vector<GroundTruth> gts;
};
using SequenceSample = std::vector<WindowSample>;

struct SyntheticSequence {
  EventStream events;
  std::vector<std::vector<GroundTruth>> labels;  // per window
};

SyntheticSequence moving_square_sequence(const SyntheticConfig& cfg, Rng& rng);

std::vector<SequenceSample> make_moving_square_dataset(const SyntheticConfig& cfg,
                                                       Rng& rng);

}  // namespace hsvt
