#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hsvt/detect.hpp"
#include "hsvt/synthetic.hpp"

namespace hsvt {

struct TrainConfig {
  int epochs = 10;
  double lr_max = 1e-3;
  std::string metrics_path;     // empty = no log file
  std::string checkpoint_path;  // empty = no checkpoint
  uint64_t shuffle_seed = 1;
};

struct TrainResult {
  double map50 = 0;
  double map5095 = 0;
  int64_t steps = 0;
  double final_loss = 0;
};

// Truncated BPTT: each sequence starts from a fresh (detached) recurrent
// state, the loss is backpropagated through all of its windows, then one
// optimizer step is taken. Per-epoch mAP on the validation split goes to the
// metrics log. Divergence (non-finite loss) aborts with the step recorded.
TrainResult train_detector(Detector& model,
                           const std::vector<SequenceSample>& train_set,
                           const std::vector<SequenceSample>& val_set,
                           const TrainConfig& cfg);

// (mAP@0.5, mAP@50:95) on a read-only pass.
std::pair<double, double> evaluate_detector(Detector& model,
                                            const std::vector<SequenceSample>& data);

}  // namespace hsvt
