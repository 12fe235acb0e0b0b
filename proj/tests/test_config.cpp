#include "doctest.h"

#include "hsvt/config.hpp"
#include "hsvt/errors.hpp"

using namespace hsvt;

TEST_CASE("key=value text parses with comments and whitespace") {
  auto kv = parse_config_text(
      "# model\n"
      "variant = small\n"
      "\n"
      "t_bins=4  # trailing comment\n"
      "  placement = lstm, lstm, stfe, stfe\n",
      "inline");
  CHECK(kv.size() == 3);
  CHECK(kv.at("variant") == "small");
  CHECK(kv.at("t_bins") == "4");
  CHECK(kv.at("placement") == "lstm, lstm, stfe, stfe");
}

TEST_CASE("parse errors carry origin and line number") {
  try {
    parse_config_text("a = 1\nno equals sign\n", "model.cfg");
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("model.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("= 3\n", "x"), ValidationError);
}

TEST_CASE("detector config applies recognized keys over the preset") {
  auto kv = parse_config_text(
      "variant = base\n"
      "t_bins = 4\n"
      "neuron = if\n"
      "surrogate = sigmoid\n"
      "tau = 3.0\n"
      "placement = stfe,stfe,stfe,stfe\n"
      "additive_fusion = true\n"
      "num_classes = 3\n"
      "score_threshold = 0.4\n"
      "fpn_channels = 32\n",
      "inline");
  DetectorConfig cfg = detector_config_from(kv);
  CHECK(cfg.backbone.channels == std::array<int64_t, 4>{64, 128, 256, 512});
  CHECK(cfg.backbone.t_bins == 4);
  CHECK(cfg.backbone.neuron.kind == NeuronKind::IF);
  CHECK(cfg.backbone.neuron.surrogate == Surrogate::Sigmoid);
  CHECK(cfg.backbone.neuron.tau == 3.0);
  for (auto k : cfg.backbone.placement) CHECK(k == TemporalKind::STFE);
  CHECK(cfg.backbone.additive_fusion);
  CHECK(cfg.head.num_classes == 3);
  CHECK(cfg.head.score_threshold == 0.4);
  CHECK(cfg.fpn_channels == 32);
}

TEST_CASE("detector config rejects bad values") {
  auto cfg_of = [](const std::string& text) {
    return detector_config_from(parse_config_text(text, "inline"));
  };
  CHECK_THROWS_AS(cfg_of("unknown_key = 1\n"), ValidationError);
  CHECK_THROWS_AS(cfg_of("t_bins = zero\n"), ValidationError);
  CHECK_THROWS_AS(cfg_of("t_bins = 0\n"), ValidationError);
  CHECK_THROWS_AS(cfg_of("channels = 1,2,3\n"), ValidationError);
  CHECK_THROWS_AS(cfg_of("neuron = izhikevich\n"), ValidationError);
  CHECK_THROWS_AS(cfg_of("placement = lstm\n"), ValidationError);
  CHECK_THROWS_AS(cfg_of("score_threshold = 1.5\n"), ValidationError);
  CHECK_THROWS_AS(cfg_of("additive_fusion = maybe\n"), ValidationError);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/model.cfg"), IoError);
}
