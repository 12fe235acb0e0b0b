#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hsvt/backbone.hpp"
#include "hsvt/nn.hpp"
#include "hsvt/tensor.hpp"

namespace hsvt {

// Axis-aligned box, top-left corner + size, pixels.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;
};

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0;  // in [0,1]
};

struct GroundTruth {
  Box box;
  int class_id = 0;
};

struct HeadConfig {
  int num_classes = 1;
  double score_threshold = 0.25;
  double nms_iou = 0.5;
  std::array<int, 3> strides{8, 16, 32};
};

double iou(const Box& a, const Box& b);

// Class-wise greedy NMS by descending score.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

// Predictions per scale: [1, num_classes+5, H_s, W_s] with channel layout
// (dx, dy, dw, dh, obj, class logits...). Box center = (cell + 0.5 + dx)*stride,
// size = exp(dw)*stride; score = sigmoid(obj)*sigmoid(class).
std::vector<Detection> decode(const std::array<Tensor, 3>& preds,
                              const HeadConfig& cfg);

// ---- evaluation ----

struct EvalImage {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
};

// 101-point interpolated AP, greedy matching by descending score, one match
// per ground truth (ties: higher IoU, then lower GT index). Classes with no
// ground truth are skipped.
double map_at(const std::vector<EvalImage>& images, int num_classes,
              double iou_threshold);
double map_50_95(const std::vector<EvalImage>& images, int num_classes);

// ---- loss ----

struct LossTerms {
  Tensor total;      // scalar, on the tape
  double obj = 0, cls = 0, iou_term = 0;
  int positives = 0;
};

// Center-cell assignment: each GT claims the cell containing its center at
// the scale whose stride best matches the box size. BCE objectness over all
// cells + BCE class + (1 - IoU) over positives, normalized by max(1, #pos).
LossTerms detection_loss(const std::array<Tensor, 3>& preds,
                         const std::vector<GroundTruth>& gts,
                         const HeadConfig& cfg);

// ---- optimizer & schedule ----

class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);
  void zero_grad();

  std::vector<Tensor> params;
  std::vector<std::vector<double>> m, v;
  int64_t t = 0;
  double beta1, beta2, eps;
};

struct ScheduleConfig {
  double lr_max = 1e-3;
  int64_t total_steps = 1;
};

// lr_max * (1 - step/S), clamped at 0.
double lr_at(const ScheduleConfig& sched, int64_t step);

// ---- detector = backbone + light FPN + per-scale heads ----

struct DetectorConfig {
  BackboneConfig backbone;
  HeadConfig head;
  int64_t fpn_channels = 64;
};

class Detector : public Module {
 public:
  Detector(const DetectorConfig& config, Rng& rng);
  // window: [1, 2*t_bins, H, W]; returns per-scale prediction maps for
  // strides 8/16/32.
  std::array<Tensor, 3> forward(const Tensor& window, HsVTState& st, bool train);
  void collect(std::vector<NamedTensor>& out) const override;

  DetectorConfig cfg;
  std::unique_ptr<HsVT> backbone;
  // top-down merge: 1x1 lateral + nearest upsample + add
  std::array<std::unique_ptr<Conv2d>, 3> lateral;
  std::array<std::unique_ptr<Conv2d>, 3> head_conv;  // 3x3 + relu
  std::array<std::unique_ptr<Conv2d>, 3> head_pred;  // 1x1 -> num_classes+5
};

}  // namespace hsvt
