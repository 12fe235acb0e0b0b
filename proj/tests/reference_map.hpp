#pragma once

// Brute-force reference implementations of IoU/NMS/mAP used only by tests.
// Deliberately written straight from the definitions, independent of the
// library code, to serve as an oracle.

#include <algorithm>
#include <vector>

#include "hsvt/detect.hpp"

namespace refimpl {

inline double ref_iou(const hsvt::Box& a, const hsvt::Box& b) {
  const double ax2 = a.x + a.w, ay2 = a.y + a.h;
  const double bx2 = b.x + b.w, by2 = b.y + b.h;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(a.x, b.x));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(a.y, b.y));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

// O(n^2) NMS: a detection is kept iff no higher-scored kept detection of the
// same class overlaps it above the threshold.
inline std::vector<hsvt::Detection> ref_nms(std::vector<hsvt::Detection> dets,
                                            double thr) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const hsvt::Detection& a, const hsvt::Detection& b) {
                     return a.score > b.score;
                   });
  std::vector<hsvt::Detection> kept;
  for (const auto& d : dets) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.class_id == d.class_id && ref_iou(k.box, d.box) > thr) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

// AP for one class at one IoU threshold: rank all detections of the class by
// descending score (stable over image/detection order), match greedily
// against unused ground truth of the class in the same image (highest IoU
// >= thr wins), then evaluate the 101-point interpolated precision integral.
inline double ref_ap(const std::vector<hsvt::EvalImage>& images, int cls,
                     double thr) {
  struct Ranked {
    double score;
    size_t img, det;
  };
  std::vector<Ranked> ranked;
  size_t total_gt = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    for (size_t d = 0; d < images[i].dets.size(); ++d) {
      if (images[i].dets[d].class_id == cls) ranked.push_back({images[i].dets[d].score, i, d});
    }
    for (const auto& g : images[i].gts) {
      if (g.class_id == cls) ++total_gt;
    }
  }
  if (total_gt == 0) return -1.0;  // caller skips the class
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> used(images.size());
  for (size_t i = 0; i < images.size(); ++i) used[i].assign(images[i].gts.size(), false);

  std::vector<bool> tp(ranked.size(), false);
  for (size_t r = 0; r < ranked.size(); ++r) {
    const auto& img = images[ranked[r].img];
    double best_iou = 0.0;
    size_t best = img.gts.size();
    for (size_t g = 0; g < img.gts.size(); ++g) {
      if (img.gts[g].class_id != cls || used[ranked[r].img][g]) continue;
      const double v = ref_iou(img.dets[ranked[r].det].box, img.gts[g].box);
      if (v >= thr && v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best < img.gts.size()) {
      tp[r] = true;
      used[ranked[r].img][best] = true;
    }
  }

  double ap = 0.0;
  for (int q = 0; q <= 100; ++q) {
    const double want_recall = q / 100.0;
    double best_precision = 0.0;
    size_t hits = 0;
    for (size_t r = 0; r < ranked.size(); ++r) {
      if (tp[r]) ++hits;
      const double recall = static_cast<double>(hits) / static_cast<double>(total_gt);
      const double precision = static_cast<double>(hits) / static_cast<double>(r + 1);
      if (recall >= want_recall) best_precision = std::max(best_precision, precision);
    }
    ap += best_precision;
  }
  return ap / 101.0;
}

inline double ref_map_at(const std::vector<hsvt::EvalImage>& images,
                         int num_classes, double thr) {
  double sum = 0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double ap = ref_ap(images, c, thr);
    if (ap < 0) continue;
    sum += ap;
    ++counted;
  }
  return counted ? sum / counted : 0.0;
}

inline double ref_map_50_95(const std::vector<hsvt::EvalImage>& images,
                            int num_classes) {
  double sum = 0;
  for (int i = 0; i < 10; ++i) sum += ref_map_at(images, num_classes, 0.50 + 0.05 * i);
  return sum / 10.0;
}

}  // namespace refimpl
