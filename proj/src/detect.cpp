#include "hsvt/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hsvt/errors.hpp"

namespace hsvt {

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  std::vector<bool> removed(dets.size(), false);
  for (size_t i = 0; i < dets.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(dets[i]);
    for (size_t j = i + 1; j < dets.size(); ++j) {
      if (removed[j] || dets[j].class_id != dets[i].class_id) continue;
      if (iou(dets[i].box, dets[j].box) > iou_threshold) removed[j] = true;
    }
  }
  return kept;
}

std::vector<Detection> decode(const std::array<Tensor, 3>& preds,
                              const HeadConfig& cfg) {
  std::vector<Detection> cand;
  for (size_t s = 0; s < preds.size(); ++s) {
    const Tensor& p = preds[s];
    if (p.dim(0) != 1) throw std::invalid_argument("decode expects batch size 1");
    const int64_t C = p.dim(1), H = p.dim(2), W = p.dim(3);
    const int K = cfg.num_classes;
    if (C != K + 5) throw std::invalid_argument("decode: channel count mismatch");
    const double stride = cfg.strides[s];
    const auto& d = p.data();
    auto at = [&](int64_t c, int64_t y, int64_t x) {
      return d[static_cast<size_t>((c * H + y) * W + x)];
    };
    auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    for (int64_t y = 0; y < H; ++y) {
      for (int64_t x = 0; x < W; ++x) {
        const double cx = (x + 0.5 + at(0, y, x)) * stride;
        const double cy = (y + 0.5 + at(1, y, x)) * stride;
        const double bw = std::exp(at(2, y, x)) * stride;
        const double bh = std::exp(at(3, y, x)) * stride;
        const double obj = sig(at(4, y, x));
        for (int k = 0; k < K; ++k) {
          const double score = obj * sig(at(5 + k, y, x));
          if (score < cfg.score_threshold) continue;
          Detection det;
          det.box = {cx - bw / 2, cy - bh / 2, bw, bh};
          det.class_id = k;
          det.score = score;
          cand.push_back(det);
        }
      }
    }
  }
  return nms(std::move(cand), cfg.nms_iou);
}

// ------------------------------------------------------------------- mAP

namespace {

// AP for one class at one IoU threshold, COCO-style greedy matching.
double average_precision(const std::vector<EvalImage>& images, int class_id,
                         double thr, int64_t num_gt) {
  struct Cand {
    double score;
    size_t image, index;
  };
  std::vector<Cand> cands;
  for (size_t i = 0; i < images.size(); ++i) {
    for (size_t j = 0; j < images[i].dets.size(); ++j) {
      if (images[i].dets[j].class_id == class_id) cands.push_back({images[i].dets[j].score, i, j});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& a, const Cand& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> gt_used(images.size());
  for (size_t i = 0; i < images.size(); ++i) gt_used[i].assign(images[i].gts.size(), false);

  std::vector<int> is_tp(cands.size(), 0);
  for (size_t c = 0; c < cands.size(); ++c) {
    const auto& img = images[cands[c].image];
    const Box& db = img.dets[cands[c].index].box;
    double best = 0.0;
    int64_t best_g = -1;
    for (size_t g = 0; g < img.gts.size(); ++g) {
      if (img.gts[g].class_id != class_id || gt_used[cands[c].image][g]) continue;
      const double v = iou(db, img.gts[g].box);
      if (v >= thr && v > best) {
        best = v;
        best_g = static_cast<int64_t>(g);
      }
    }
    if (best_g >= 0) {
      is_tp[c] = 1;
      gt_used[cands[c].image][static_cast<size_t>(best_g)] = true;
    }
  }

  std::vector<double> recall(cands.size()), precision(cands.size());
  int64_t tp = 0;
  for (size_t c = 0; c < cands.size(); ++c) {
    tp += is_tp[c];
    recall[c] = static_cast<double>(tp) / static_cast<double>(num_gt);
    precision[c] = static_cast<double>(tp) / static_cast<double>(c + 1);
  }
  // max precision at recall >= r for the 101 interpolation points
  double ap = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double rq = r / 100.0;
    double pmax = 0.0;
    for (size_t c = 0; c < cands.size(); ++c) {
      if (recall[c] >= rq && precision[c] > pmax) pmax = precision[c];
    }
    ap += pmax;
  }
  return ap / 101.0;
}

}  // namespace

double map_at(const std::vector<EvalImage>& images, int num_classes,
              double iou_threshold) {
  double sum = 0.0;
  int counted = 0;
  for (int k = 0; k < num_classes; ++k) {
    int64_t num_gt = 0;
    for (const auto& img : images) {
      for (const auto& g : img.gts) {
        if (g.class_id == k) ++num_gt;
      }
    }
    if (num_gt == 0) continue;
    sum += average_precision(images, k, iou_threshold, num_gt);
    ++counted;
  }
  return counted > 0 ? sum / counted : 0.0;
}

double map_50_95(const std::vector<EvalImage>& images, int num_classes) {
  double sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    sum += map_at(images, num_classes, 0.50 + 0.05 * i);
  }
  return sum / 10.0;
}

// ------------------------------------------------------------------- loss

LossTerms detection_loss(const std::array<Tensor, 3>& preds,
                         const std::vector<GroundTruth>& gts,
                         const HeadConfig& cfg) {
  const int K = cfg.num_classes;
  struct Positive {
    size_t scale;
    int64_t cy, cx;
    const GroundTruth* gt;
  };
  std::vector<Positive> pos;
  for (const auto& g : gts) {
    if (g.box.w <= 0 || g.box.h <= 0) throw ValidationError("ground-truth box must have positive extent");
    const double side = std::sqrt(g.box.w * g.box.h);
    size_t best_s = 0;
    double best_d = 1e300;
    for (size_t s = 0; s < preds.size(); ++s) {
      const double d = std::abs(side - 4.0 * cfg.strides[s]);
      if (d < best_d) {
        best_d = d;
        best_s = s;
      }
    }
    const Tensor& p = preds[best_s];
    const int64_t H = p.dim(2), W = p.dim(3);
    const double stride = cfg.strides[best_s];
    int64_t cx = static_cast<int64_t>((g.box.x + g.box.w / 2) / stride);
    int64_t cy = static_cast<int64_t>((g.box.y + g.box.h / 2) / stride);
    cx = std::min(std::max<int64_t>(cx, 0), W - 1);
    cy = std::min(std::max<int64_t>(cy, 0), H - 1);
    pos.push_back({best_s, cy, cx, &g});
  }

  Tensor total;
  double obj_v = 0, cls_v = 0, iou_v = 0;

  // objectness over every cell of every scale
  for (size_t s = 0; s < preds.size(); ++s) {
    const Tensor& p = preds[s];
    const int64_t H = p.dim(2), W = p.dim(3);
    std::vector<double> target(static_cast<size_t>(H * W), 0.0);
    for (const auto& pp : pos) {
      if (pp.scale == s) target[static_cast<size_t>(pp.cy * W + pp.cx)] = 1.0;
    }
    Tensor obj_logits = reshape(narrow(p, 1, 4, 1), {H * W});
    Tensor l = sum_all(bce_with_logits(obj_logits, Tensor::from({H * W}, std::move(target))));
    obj_v += l.item();
    total = total.defined() ? add(total, l) : l;
  }

  if (!pos.empty()) {
    for (size_t s = 0; s < preds.size(); ++s) {
      std::vector<CellIndex> cells;
      std::vector<const GroundTruth*> cell_gt;
      for (const auto& pp : pos) {
        if (pp.scale != s) continue;
        cells.push_back({0, pp.cy, pp.cx});
        cell_gt.push_back(pp.gt);
      }
      if (cells.empty()) continue;
      const int64_t P = static_cast<int64_t>(cells.size());
      const double stride = cfg.strides[s];
      Tensor rows = gather_rows(preds[s], cells);  // [P, K+5]

      // class BCE against one-hot targets
      std::vector<double> cls_target(static_cast<size_t>(P * K), 0.0);
      for (int64_t i = 0; i < P; ++i) {
        cls_target[static_cast<size_t>(i * K + cell_gt[static_cast<size_t>(i)]->class_id)] = 1.0;
      }
      Tensor cls_logits = narrow(rows, 1, 5, K);
      Tensor lc = sum_all(bce_with_logits(cls_logits, Tensor::from({P, K}, std::move(cls_target))));
      cls_v += lc.item();
      total = add(total, lc);

      // differentiable IoU between decoded boxes and GT constants
      std::vector<double> cellx(static_cast<size_t>(P)), celly(static_cast<size_t>(P));
      std::vector<double> gx1(static_cast<size_t>(P)), gy1(static_cast<size_t>(P));
      std::vector<double> gx2(static_cast<size_t>(P)), gy2(static_cast<size_t>(P));
      std::vector<double> garea(static_cast<size_t>(P));
      for (int64_t i = 0; i < P; ++i) {
        cellx[static_cast<size_t>(i)] = (cells[static_cast<size_t>(i)].w + 0.5) * stride;
        celly[static_cast<size_t>(i)] = (cells[static_cast<size_t>(i)].h + 0.5) * stride;
        const Box& b = cell_gt[static_cast<size_t>(i)]->box;
        gx1[static_cast<size_t>(i)] = b.x;
        gy1[static_cast<size_t>(i)] = b.y;
        gx2[static_cast<size_t>(i)] = b.x + b.w;
        gy2[static_cast<size_t>(i)] = b.y + b.h;
        garea[static_cast<size_t>(i)] = b.w * b.h;
      }
      Tensor cx = add(mul_scalar(narrow(rows, 1, 0, 1), stride), Tensor::from({P, 1}, std::move(cellx)));
      Tensor cy = add(mul_scalar(narrow(rows, 1, 1, 1), stride), Tensor::from({P, 1}, std::move(celly)));
      Tensor bw = mul_scalar(exp_op(narrow(rows, 1, 2, 1)), stride);
      Tensor bh = mul_scalar(exp_op(narrow(rows, 1, 3, 1)), stride);
      Tensor half_w = mul_scalar(bw, 0.5), half_h = mul_scalar(bh, 0.5);
      Tensor px1 = sub(cx, half_w), px2 = add(cx, half_w);
      Tensor py1 = sub(cy, half_h), py2 = add(cy, half_h);
      Tensor tgx1 = Tensor::from({P, 1}, std::move(gx1));
      Tensor tgy1 = Tensor::from({P, 1}, std::move(gy1));
      Tensor tgx2 = Tensor::from({P, 1}, std::move(gx2));
      Tensor tgy2 = Tensor::from({P, 1}, std::move(gy2));
      Tensor iw = relu(sub(emin(px2, tgx2), emax(px1, tgx1)));
      Tensor ih = relu(sub(emin(py2, tgy2), emax(py1, tgy1)));
      Tensor inter = mul(iw, ih);
      Tensor uni = add_scalar(sub(add(mul(bw, bh), Tensor::from({P, 1}, std::move(garea))), inter), 1e-9);
      Tensor iou_t = div(inter, uni);
      Tensor li = sum_all(add_scalar(neg(iou_t), 1.0));
      iou_v += li.item();
      total = add(total, li);
    }
  }

  const double norm = 1.0 / std::max<size_t>(pos.size(), 1);
  LossTerms out;
  out.total = mul_scalar(total, norm);
  out.obj = obj_v * norm;
  out.cls = cls_v * norm;
  out.iou_term = iou_v * norm;
  out.positives = static_cast<int>(pos.size());
  return out;
}

// ------------------------------------------------------------------- Adam

Adam::Adam(std::vector<Tensor> params_, double b1, double b2, double eps_)
    : params(std::move(params_)), beta1(b1), beta2(b2), eps(eps_) {
  for (auto& p : params) {
    m.emplace_back(p.data().size(), 0.0);
    v.emplace_back(p.data().size(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data();
    auto& g = params[i].grad();
    for (size_t j = 0; j < p.size(); ++j) {
      m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g[j];
      v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g[j] * g[j];
      p[j] -= lr * (m[i][j] / bc1) / (std::sqrt(v[i][j] / bc2) + eps);
    }
  }
}

void Adam::zero_grad() { hsvt::zero_grad(params); }

double lr_at(const ScheduleConfig& sched, int64_t step) {
  if (sched.lr_max <= 0.0 || sched.total_steps < 1) {
    throw ValidationError("schedule requires lr_max > 0 and total_steps >= 1");
  }
  const double f = 1.0 - static_cast<double>(step) / static_cast<double>(sched.total_steps);
  return sched.lr_max * std::max(0.0, f);
}

// --------------------------------------------------------------- detector

Detector::Detector(const DetectorConfig& config, Rng& rng)
    : Module("detector"), cfg(config) {
  backbone = std::make_unique<HsVT>(cfg.backbone, rng);
  const int64_t F = cfg.fpn_channels;
  const int K = cfg.head.num_classes;
  for (int i = 0; i < 3; ++i) {
    // stages 2..4 feed strides 8/16/32
    const int64_t C = cfg.backbone.channels[static_cast<size_t>(i + 1)];
    const std::string tag = std::to_string(cfg.head.strides[static_cast<size_t>(i)]);
    lateral[static_cast<size_t>(i)] =
        std::make_unique<Conv2d>("fpn.lat" + tag, C, F, 1, 1, 0, true, rng);
    head_conv[static_cast<size_t>(i)] =
        std::make_unique<Conv2d>("head.s" + tag + ".conv", F, F, 3, 1, 1, true, rng);
    head_pred[static_cast<size_t>(i)] =
        std::make_unique<Conv2d>("head.s" + tag + ".pred", F, K + 5, 1, 1, 0, true, rng);
  }
}

std::array<Tensor, 3> Detector::forward(const Tensor& window, HsVTState& st,
                                        bool train) {
  auto feats = backbone->forward(window, st, train);
  Tensor p32 = lateral[2]->forward(feats[3]);
  Tensor p16 = add(lateral[1]->forward(feats[2]), upsample2x(p32));
  Tensor p8 = add(lateral[0]->forward(feats[1]), upsample2x(p16));
  std::array<Tensor, 3> fpn{p8, p16, p32};
  std::array<Tensor, 3> out;
  for (size_t i = 0; i < 3; ++i) {
    Tensor h = relu(head_conv[i]->forward(fpn[i]));
    out[i] = head_pred[i]->forward(h);
  }
  return out;
}

void Detector::collect(std::vector<NamedTensor>& out) const {
  backbone->collect(out);
  for (const auto& c : lateral) c->collect(out);
  for (const auto& c : head_conv) c->collect(out);
  for (const auto& c : head_pred) c->collect(out);
}

}  // namespace hsvt
