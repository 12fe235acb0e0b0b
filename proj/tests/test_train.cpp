#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "hsvt/errors.hpp"
#include "hsvt/train.hpp"

using namespace hsvt;

namespace {

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

DetectorConfig small_config() {
  DetectorConfig dc;
  dc.backbone.channels = {4, 8, 8, 8};
  dc.backbone.t_bins = 2;
  dc.fpn_channels = 8;
  dc.head.num_classes = 1;
  return dc;
}

std::vector<SequenceSample> small_dataset(int sequences, int seq_len, uint64_t seed) {
  SyntheticConfig sc;
  sc.num_sequences = sequences;
  sc.seq_len = seq_len;
  sc.t_bins = 2;
  Rng rng(seed);
  return make_moving_square_dataset(sc, rng);
}

}  // namespace

TEST_CASE("training is deterministic: identical logs and checkpoints") {
  auto run = [&](const std::string& tag) {
    Rng rng(71);
    Detector model(small_config(), rng);
    auto train_set = small_dataset(4, 2, 72);
    auto val_set = small_dataset(2, 2, 73);
    TrainConfig tc;
    tc.epochs = 2;
    tc.lr_max = 1e-3;
    tc.metrics_path = tmp_path("metrics_" + tag + ".log");
    tc.checkpoint_path = tmp_path("ckpt_" + tag + ".bin");
    train_detector(model, train_set, val_set, tc);
    return std::pair{slurp(tc.metrics_path), slurp(tc.checkpoint_path)};
  };
  auto [log_a, ckpt_a] = run("a");
  auto [log_b, ckpt_b] = run("b");
  CHECK(log_a == log_b);
  CHECK(ckpt_a == ckpt_b);
  CHECK(log_a.find("map50=") != std::string::npos);
  for (const char* tag : {"a", "b"}) {
    std::remove(tmp_path(std::string("metrics_") + tag + ".log").c_str());
    std::remove(tmp_path(std::string("ckpt_") + tag + ".bin").c_str());
  }
}

TEST_CASE("loss decreases when overfitting one fixed sample") {
  Rng rng(74);
  Detector model(small_config(), rng);
  auto data = small_dataset(1, 1, 75);
  Adam opt(model.parameters());
  double first = 0, last = 0;
  for (int step = 0; step < 200; ++step) {
    HsVTState st;
    auto preds = model.forward(data[0][0].input, st, true);
    LossTerms lt = detection_loss(preds, data[0][0].gts, model.cfg.head);
    if (step == 0) first = lt.total.item();
    last = lt.total.item();
    opt.zero_grad();
    backward(lt.total);
    opt.step(2e-3);
  }
  CHECK(last < 0.2 * first);
}

TEST_CASE("L=1 sequences equal recurrence-disabled per-window losses") {
  Rng rng(76);
  Detector model(small_config(), rng);
  auto data = small_dataset(3, 1, 77);

  for (const auto& seq : data) {
    // sequence-style: fresh state at sequence start (the training loop's rule)
    HsVTState st;
    auto preds_seq = model.forward(seq[0].input, st, true);
    const double seq_loss = detection_loss(preds_seq, seq[0].gts, model.cfg.head).total.item();

    // recurrence disabled: every window starts from a fresh state
    HsVTState fresh;
    auto preds_off = model.forward(seq[0].input, fresh, true);
    const double off_loss = detection_loss(preds_off, seq[0].gts, model.cfg.head).total.item();
    CHECK(seq_loss == off_loss);
  }
}

TEST_CASE("divergent training aborts with the offending step recorded") {
  Rng rng(78);
  Detector model(small_config(), rng);
  auto data = small_dataset(2, 1, 79);
  TrainConfig tc;
  tc.epochs = 50;
  tc.lr_max = 1e8;  // guaranteed blow-up
  try {
    train_detector(model, data, data, tc);
    FAIL("expected divergence");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("empty training set is rejected") {
  Rng rng(80);
  Detector model(small_config(), rng);
  CHECK_THROWS_AS(train_detector(model, {}, {}, TrainConfig{}), ValidationError);
}

TEST_CASE("checkpoint round-trip restores identical predictions") {
  Rng rng(81);
  Detector model(small_config(), rng);
  auto data = small_dataset(1, 1, 82);
  const std::string p = tmp_path("ckpt_rt.bin");
  {
    std::vector<NamedTensor> entries;
    model.collect(entries);
    save_checkpoint(p, entries);
  }
  HsVTState st1;
  auto before = model.forward(data[0][0].input, st1, false);

  Rng rng2(999);  // different init
  Detector other(small_config(), rng2);
  std::vector<NamedTensor> entries;
  other.collect(entries);
  load_checkpoint(p, entries);
  HsVTState st2;
  auto after = other.forward(data[0][0].input, st2, false);
  for (int s = 0; s < 3; ++s) {
    CHECK(before[static_cast<size_t>(s)].data() == after[static_cast<size_t>(s)].data());
  }
  std::remove(p.c_str());
}
