#include "hsvt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "hsvt/errors.hpp"

namespace hsvt {

std::pair<double, double> evaluate_detector(Detector& model,
                                            const std::vector<SequenceSample>& data) {
  std::vector<EvalImage> images;
  for (const auto& seq : data) {
    HsVTState st;
    for (const auto& ws : seq) {
      auto preds = model.forward(ws.input, st, /*train=*/false);
      EvalImage img;
      img.dets = decode(preds, model.cfg.head);
      img.gts = ws.gts;
      images.push_back(std::move(img));
    }
  }
  const int K = model.cfg.head.num_classes;
  return {map_at(images, K, 0.5), map_50_95(images, K)};
}

TrainResult train_detector(Detector& model,
                           const std::vector<SequenceSample>& train_set,
                           const std::vector<SequenceSample>& val_set,
                           const TrainConfig& cfg) {
  if (train_set.empty()) throw ValidationError("empty training set");
  std::ofstream log;
  if (!cfg.metrics_path.empty()) {
    log.open(cfg.metrics_path);
    if (!log) throw IoError("cannot open metrics log: " + cfg.metrics_path);
  }

  Adam opt(model.parameters());
  ScheduleConfig sched{cfg.lr_max,
                       static_cast<int64_t>(cfg.epochs) *
                           static_cast<int64_t>(train_set.size())};
  Rng shuffle_rng(cfg.shuffle_seed);

  TrainResult res;
  int64_t step = 0;
  char line[256];
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) {  // Fisher-Yates
      const size_t j = static_cast<size_t>(shuffle_rng.randint(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    for (size_t si : order) {
      const auto& seq = train_set[si];
      const double lr = lr_at(sched, step);
      double loss_v = 0, obj_v = 0, cls_v = 0, iou_v = 0;
      try {
        HsVTState st;  // fresh (detached) state per sequence
        Tensor total;
        for (const auto& ws : seq) {
          auto preds = model.forward(ws.input, st, /*train=*/true);
          LossTerms lt = detection_loss(preds, ws.gts, model.cfg.head);
          obj_v += lt.obj;
          cls_v += lt.cls;
          iou_v += lt.iou_term;
          total = total.defined() ? add(total, lt.total) : lt.total;
        }
        total = mul_scalar(total, 1.0 / static_cast<double>(seq.size()));
        loss_v = total.item();
        if (!std::isfinite(loss_v)) throw std::runtime_error("non-finite loss");
        opt.zero_grad();
        backward(total);
        opt.step(lr);
      } catch (const std::runtime_error& e) {
        throw ValidationError("training diverged at step " + std::to_string(step) +
                              ": " + e.what());
      }
      const double n = static_cast<double>(seq.size());
      std::snprintf(line, sizeof(line),
                    "step=%lld epoch=%d loss=%.6f obj=%.6f cls=%.6f iou=%.6f lr=%.8f",
                    static_cast<long long>(step), epoch, loss_v, obj_v / n,
                    cls_v / n, iou_v / n, lr);
      if (log) log << line << "\n";
      res.final_loss = loss_v;
      ++step;
    }

    auto [m50, m5095] = evaluate_detector(model, val_set);
    std::snprintf(line, sizeof(line), "epoch=%d map50=%.6f map5095=%.6f", epoch,
                  m50, m5095);
    if (log) log << line << "\n";
    res.map50 = m50;
    res.map5095 = m5095;
  }
  res.steps = step;

  if (!cfg.checkpoint_path.empty()) {
    std::vector<NamedTensor> entries;
    model.collect(entries);
    save_checkpoint(cfg.checkpoint_path, entries);
  }
  return res;
}

}  // namespace hsvt
