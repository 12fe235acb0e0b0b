#include "doctest.h"

#include <cmath>

#include "hsvt/detect.hpp"
#include "hsvt/nn.hpp"
#include "reference_map.hpp"

using namespace hsvt;

namespace {

std::vector<EvalImage> random_instance(Rng& rng, int max_boxes, int num_classes) {
  std::vector<EvalImage> images(static_cast<size_t>(rng.randint(1, 3)));
  for (auto& img : images) {
    const int64_t nd = rng.randint(0, max_boxes);
    const int64_t ng = rng.randint(0, max_boxes);
    for (int64_t i = 0; i < nd; ++i) {
      Detection d;
      d.box = {static_cast<double>(rng.randint(0, 40)), static_cast<double>(rng.randint(0, 40)),
               static_cast<double>(rng.randint(2, 20)), static_cast<double>(rng.randint(2, 20))};
      d.class_id = static_cast<int>(rng.randint(0, num_classes - 1));
      d.score = rng.uniform(0.01, 1.0);
      img.dets.push_back(d);
    }
    for (int64_t i = 0; i < ng; ++i) {
      GroundTruth g;
      g.box = {static_cast<double>(rng.randint(0, 40)), static_cast<double>(rng.randint(0, 40)),
               static_cast<double>(rng.randint(2, 20)), static_cast<double>(rng.randint(2, 20))};
      g.class_id = static_cast<int>(rng.randint(0, num_classes - 1));
      img.gts.push_back(g);
    }
  }
  return images;
}

}  // namespace

TEST_CASE("IoU unit cases are exact") {
  Box a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, Box{5, 5, 2, 2}) == 0.0);
  CHECK(std::abs(iou(a, Box{1, 1, 2, 2}) - 1.0 / 7.0) < 1e-12);
  CHECK(iou(a, Box{2, 0, 2, 2}) == 0.0);  // touching edges do not intersect
}

TEST_CASE("IoU is symmetric, bounded, and 1 only for identical boxes") {
  Rng rng(51);
  for (int trial = 0; trial < 2000; ++trial) {
    Box a{static_cast<double>(rng.randint(0, 30)), static_cast<double>(rng.randint(0, 30)),
          static_cast<double>(rng.randint(1, 15)), static_cast<double>(rng.randint(1, 15))};
    Box b{static_cast<double>(rng.randint(0, 30)), static_cast<double>(rng.randint(0, 30)),
          static_cast<double>(rng.randint(1, 15)), static_cast<double>(rng.randint(1, 15))};
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    const bool identical = a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h;
    CHECK((v == 1.0) == identical);
  }
}

TEST_CASE("NMS basics and oracle equivalence") {
  Detection d1{{0, 0, 10, 10}, 0, 0.9};
  Detection d2{{0, 0, 10, 10}, 0, 0.8};
  auto kept = nms({d1, d2}, 0.5);
  CHECK(kept.size() == 1);
  CHECK(kept[0].score == 0.9);

  Detection d3 = d2;
  d3.class_id = 1;  // other class survives
  CHECK(nms({d1, d3}, 0.5).size() == 2);

  Rng rng(52);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Detection> dets;
    for (int i = 0; i < 20; ++i) {
      Detection d;
      d.box = {static_cast<double>(rng.randint(0, 30)), static_cast<double>(rng.randint(0, 30)),
               static_cast<double>(rng.randint(2, 15)), static_cast<double>(rng.randint(2, 15))};
      d.class_id = static_cast<int>(rng.randint(0, 1));
      d.score = rng.uniform(0.01, 1.0);
      dets.push_back(d);
    }
    auto ours = nms(dets, 0.4);
    auto ref = refimpl::ref_nms(dets, 0.4);
    REQUIRE(ours.size() == ref.size());
    for (size_t i = 0; i < ours.size(); ++i) {
      CHECK(ours[i].box.x == ref[i].box.x);
      CHECK(ours[i].score == ref[i].score);
    }
    // property: kept boxes of one class never overlap above the threshold
    for (size_t i = 0; i < ours.size(); ++i) {
      for (size_t j = i + 1; j < ours.size(); ++j) {
        if (ours[i].class_id == ours[j].class_id) {
          CHECK(iou(ours[i].box, ours[j].box) <= 0.4);
        }
      }
    }
  }
}

TEST_CASE("mAP trivial cases") {
  EvalImage img;
  img.gts = {{{5, 5, 10, 10}, 0}, {{20, 20, 8, 8}, 1}};
  img.dets = {{{5, 5, 10, 10}, 0, 1.0}, {{20, 20, 8, 8}, 1, 1.0}};
  CHECK(map_50_95({img}, 2) == 1.0);
  CHECK(map_at({img}, 2, 0.5) == 1.0);

  img.dets.clear();
  CHECK(map_50_95({img}, 2) == 0.0);
  CHECK(map_at({}, 2, 0.5) == 0.0);  // no images, no ground truth
}

TEST_CASE("mAP matches the brute-force reference exactly on random instances") {
  Rng rng(53);
  for (int trial = 0; trial < 300; ++trial) {
    auto images = random_instance(rng, 10, 2);
    CHECK(map_50_95(images, 2) == refimpl::ref_map_50_95(images, 2));
    CHECK(map_at(images, 2, 0.5) == refimpl::ref_map_at(images, 2, 0.5));
  }
}

TEST_CASE("decode thresholds, box math, and zero-weight scores") {
  HeadConfig cfg;
  cfg.num_classes = 2;
  cfg.score_threshold = 0.3;
  std::array<Tensor, 3> preds{
      Tensor::zeros({1, 7, 4, 4}), Tensor::zeros({1, 7, 2, 2}), Tensor::zeros({1, 7, 1, 1})};
  // all logits 0 -> score = 0.25 < 0.3 everywhere
  CHECK(decode(preds, cfg).empty());

  // raise obj+class at cell (1,2) of the stride-8 scale
  auto& d = preds[0].data();
  const auto idx = [&](int64_t c, int64_t y, int64_t x) {
    return static_cast<size_t>((c * 4 + y) * 4 + x);
  };
  d[idx(4, 1, 2)] = 50.0;   // objectness
  d[idx(5, 1, 2)] = 50.0;   // class 0
  d[idx(6, 1, 2)] = -50.0;  // class 1 stays below threshold
  d[idx(2, 1, 2)] = std::log(2.0);  // width = 2*stride
  auto dets = decode(preds, cfg);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].class_id == 0);
  CHECK(dets[0].score == doctest::Approx(1.0));
  // center = (2 + 0.5) * 8 = 20, w = 16, h = 8
  CHECK(dets[0].box.x == doctest::Approx(20.0 - 8.0));
  CHECK(dets[0].box.y == doctest::Approx(12.0 - 4.0));
  CHECK(dets[0].box.w == doctest::Approx(16.0));
  CHECK(dets[0].box.h == doctest::Approx(8.0));
}

TEST_CASE("loss: empty labels give a nonnegative objectness-only loss") {
  HeadConfig cfg;
  cfg.num_classes = 1;
  std::array<Tensor, 3> preds{
      Tensor::zeros({1, 6, 4, 4}, true), Tensor::zeros({1, 6, 2, 2}, true),
      Tensor::zeros({1, 6, 1, 1}, true)};
  LossTerms lt = detection_loss(preds, {}, cfg);
  CHECK(lt.positives == 0);
  CHECK(lt.cls == 0.0);
  CHECK(lt.iou_term == 0.0);
  CHECK(lt.obj > 0.0);
  CHECK(lt.total.item() == doctest::Approx(lt.obj));
}

TEST_CASE("loss: a perfect prediction has a vanishing IoU term") {
  HeadConfig cfg;
  cfg.num_classes = 1;
  // GT center at cell (1,1) of stride 8, size exactly e^0 * 8 = 8
  GroundTruth g{{8, 8, 8, 8}, 0};
  std::array<Tensor, 3> preds{
      Tensor::zeros({1, 6, 4, 4}), Tensor::zeros({1, 6, 2, 2}), Tensor::zeros({1, 6, 1, 1})};
  LossTerms lt = detection_loss(preds, {g}, cfg);
  CHECK(lt.positives == 1);
  CHECK(lt.iou_term == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("adam: zero gradient is the identity, first step is closed-form") {
  Tensor p = Tensor::from({3}, {1.0, -2.0, 3.0}, true);
  Adam opt({p});
  p.grad();  // allocate zeros
  opt.step(0.1);
  CHECK(p.data() == std::vector<double>{1.0, -2.0, 3.0});

  Tensor q = Tensor::from({2}, {0.0, 0.0}, true);
  Adam opt2({q});
  q.grad() = {0.5, -0.5};
  opt2.step(0.01);
  // bias-corrected first step: lr * g / (|g| + eps) = lr * sign(g)
  CHECK(q.data()[0] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(q.data()[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(q.data()[0] == doctest::Approx(-q.data()[1]));  // symmetry
}

TEST_CASE("linear-decay schedule") {
  ScheduleConfig s{0.02, 100};
  CHECK(lr_at(s, 0) == 0.02);
  CHECK(lr_at(s, 50) == doctest::Approx(0.01));
  CHECK(lr_at(s, 100) == 0.0);
  CHECK(lr_at(s, 150) == 0.0);  // clamped
  double prev = 1e9;
  for (int64_t i = 0; i <= 120; ++i) {
    const double v = lr_at(s, i);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK_THROWS(lr_at(ScheduleConfig{0.0, 10}, 0));
}

TEST_CASE("detector emits the contracted shapes and backprops to the backbone") {
  DetectorConfig dc;
  dc.backbone.channels = {4, 8, 8, 8};
  dc.backbone.t_bins = 2;
  dc.fpn_channels = 8;
  dc.head.num_classes = 3;
  Rng rng(54);
  Detector model(dc, rng);
  HsVTState st;
  std::vector<double> v(4 * 64 * 64);
  Rng drng(55);
  for (auto& x : v) x = drng.uniform(0, 1);
  auto preds = model.forward(Tensor::from({1, 4, 64, 64}, v), st, true);
  CHECK(preds[0].shape() == Shape{1, 8, 8, 8});
  CHECK(preds[1].shape() == Shape{1, 8, 4, 4});
  CHECK(preds[2].shape() == Shape{1, 8, 2, 2});

  GroundTruth g{{10, 12, 14, 14}, 1};
  LossTerms lt = detection_loss(preds, {g}, dc.head);
  backward(lt.total);
  // the stage-1 downsampling conv sits at the far end of the graph
  double gsum = 0;
  for (double x : model.backbone->stages[0]->down->weight.grad()) gsum += std::abs(x);
  CHECK(gsum > 0.0);
}
