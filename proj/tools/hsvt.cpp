// Command-line front end: dataset conversion, frame-to-event simulation,
// training, evaluation, energy profiling, and attention dumps.
//
// Exit codes: 0 success, 1 validation failure, 2 I/O failure.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hsvt/backbone.hpp"
#include "hsvt/config.hpp"
#include "hsvt/detect.hpp"
#include "hsvt/errors.hpp"
#include "hsvt/esim.hpp"
#include "hsvt/events.hpp"
#include "hsvt/profiler.hpp"
#include "hsvt/synthetic.hpp"
#include "hsvt/train.hpp"

namespace fs = std::filesystem;
using namespace hsvt;

namespace {

EventFormat format_for(const std::string& flag, const std::string& path) {
  std::string f = flag;
  if (f.empty()) {
    const auto ext = fs::path(path).extension().string();
    f = (ext == ".csv") ? "csv" : "bin";
  }
  if (f == "csv") return EventFormat::Csv;
  if (f == "bin") return EventFormat::Bin;
  throw ValidationError("unknown event format '" + f + "' (expected csv|bin)");
}

// ------------------------------------------------------------------ frames

std::vector<double> read_pgm(const std::string& path, int& width, int& height) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open frame " + path);
  auto next_token = [&]() {
    std::string tok;
    for (;;) {
      if (!(f >> tok)) throw ValidationError(path + ": truncated PGM header");
      if (tok[0] == '#') {
        std::string rest;
        std::getline(f, rest);
        continue;
      }
      return tok;
    }
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5") {
    throw ValidationError(path + ": not a PGM file (magic '" + magic + "')");
  }
  width = std::stoi(next_token());
  height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw ValidationError(path + ": bad PGM dimensions");
  }
  std::vector<double> px(static_cast<size_t>(width) * height);
  if (magic == "P2") {
    for (auto& v : px) {
      int x;
      if (!(f >> x)) throw ValidationError(path + ": truncated PGM data");
      v = x;
    }
  } else {
    f.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(px.size() * static_cast<size_t>(bytes));
    f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!f) throw ValidationError(path + ": truncated PGM data");
    for (size_t i = 0; i < px.size(); ++i) {
      px[i] = bytes == 1 ? raw[i] : raw[2 * i] * 256.0 + raw[2 * i + 1];
    }
  }
  return px;
}

void write_pgm(const std::string& path, const std::vector<double>& px, int width,
               int height) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  double hi = 0;
  for (double v : px) hi = std::max(hi, v);
  if (hi <= 0) hi = 1;
  f << "P2\n" << width << " " << height << "\n255\n";
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      f << static_cast<int>(std::lround(px[static_cast<size_t>(y) * width + x] / hi * 255.0))
        << (x + 1 == width ? '\n' : ' ');
    }
  }
}

// ------------------------------------------------------------------ model

struct ModelArgs {
  std::string config_path;
  std::string variant;
  std::string checkpoint;
  uint64_t seed = 42;

  void attach(CLI::App* cmd, bool with_checkpoint) {
    cmd->add_option("--config", config_path, "key=value model config file");
    cmd->add_option("--variant", variant, "preset when no config file: tiny|small|base");
    cmd->add_option("--seed", seed, "model init seed");
    if (with_checkpoint) cmd->add_option("--checkpoint", checkpoint, "weights to load");
  }

  DetectorConfig config() const {
    if (!config_path.empty()) return detector_config_from(parse_config_file(config_path));
    DetectorConfig dc;
    dc.backbone = BackboneConfig::variant(variant.empty() ? "tiny" : variant);
    return dc;
  }

  std::unique_ptr<Detector> build() const {
    Rng rng(seed);
    auto model = std::make_unique<Detector>(config(), rng);
    if (!checkpoint.empty()) {
      std::vector<NamedTensor> entries;
      model->collect(entries);
      load_checkpoint(checkpoint, entries);
    }
    return model;
  }
};

// ------------------------------------------------------------------ data

struct DataArgs {
  std::string dataset = "synthetic";
  std::string dir;  // event/label directory for file-backed presets
  double delta_t_ms = 0;  // 0 = preset default
  int height = 64, width = 64;
  int sequences = 32, seq_len = 5;
  uint64_t data_seed = 7;

  void attach(CLI::App* cmd) {
    cmd->add_option("--dataset", dataset, "gen1|fall|air|synthetic");
    cmd->add_option("--data", dir,
                    "directory of <seq>.bin|csv + <seq>.lbl pairs "
                    "(default $HSVT_DATA_ROOT/<dataset>)");
    cmd->add_option("--delta-t", delta_t_ms, "window length override, ms");
    cmd->add_option("--height", height, "frame height (divisible by 32)");
    cmd->add_option("--width", width, "frame width (divisible by 32)");
    cmd->add_option("--sequences", sequences, "synthetic sequence count");
    cmd->add_option("--seq-len", seq_len, "synthetic windows per sequence");
    cmd->add_option("--data-seed", data_seed, "synthetic generator seed");
  }

  double dt() const {
    if (delta_t_ms > 0) return delta_t_ms;
    return dataset == "synthetic" ? 10.0 : preset_delta_t_ms(dataset);
  }

  std::string resolved_dir() const {
    if (!dir.empty()) return dir;
    const char* root = std::getenv("HSVT_DATA_ROOT");
    if (!root) {
      throw ValidationError("dataset '" + dataset +
                            "' needs --data or HSVT_DATA_ROOT");
    }
    return (fs::path(root) / dataset).string();
  }

  std::vector<SequenceSample> load(int t_bins) const {
    if (dataset == "synthetic") {
      SyntheticConfig sc;
      sc.height = height;
      sc.width = width;
      sc.num_sequences = sequences;
      sc.seq_len = seq_len;
      sc.delta_t_ms = dt();
      sc.t_bins = t_bins;
      Rng rng(data_seed);
      return make_moving_square_dataset(sc, rng);
    }
    (void)preset_delta_t_ms(dataset);  // rejects unknown presets
    const std::string root = resolved_dir();
    if (!fs::is_directory(root)) throw IoError("data directory not found: " + root);

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(root)) {
      const auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".bin" || ext == ".csv")) {
        files.push_back(e.path());
      }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no event files under " + root);

    WindowSpec spec;
    spec.delta_t_ms = dt();
    spec.t_bins = t_bins;
    spec.height = height;
    spec.width = width;

    std::vector<SequenceSample> out;
    for (const auto& p : files) {
      const auto fmt = p.extension() == ".csv" ? EventFormat::Csv : EventFormat::Bin;
      EventStream stream = read_events(p.string(), fmt, width, height);
      auto labels = read_labels(fs::path(p).replace_extension(".lbl").string());
      FrameTensorSequence frames = accumulate(stream, spec, std::nullopt, std::nullopt,
                                              /*binarize=*/true);
      LabelGroups groups =
          align_labels(labels, frames.window_starts, spec.delta_t_us());
      SequenceSample sample;
      for (size_t w = 0; w < frames.frames.size(); ++w) {
        const Tensor& f = frames.frames[w];
        WindowSample ws;
        ws.input = reshape(f, {1, f.dim(0), f.dim(1), f.dim(2)});
        for (const auto& r : groups.per_window[w]) {
          ws.gts.push_back({{double(r.x), double(r.y), double(r.w), double(r.h)},
                            static_cast<int>(r.class_id)});
        }
        sample.push_back(std::move(ws));
      }
      out.push_back(std::move(sample));
    }
    return out;
  }
};

// --------------------------------------------------------------- commands

void cmd_convert_events(const std::string& in, const std::string& out,
                        const std::string& from, const std::string& to, int width,
                        int height) {
  bool warned = false;
  EventStream s = read_events(in, format_for(from, in), width, height, &warned);
  if (warned) std::cerr << "note: input events were unsorted; output is sorted\n";
  write_events(out, format_for(to, out), s);
  std::cout << "wrote " << s.events.size() << " events to " << out << "\n";
}

void cmd_convert_labels(const std::string& in, const std::string& out, double fps) {
  if (fps <= 0) throw ValidationError("--fps must be positive");
  std::ifstream f(in);
  if (!f) throw IoError("cannot open " + in);
  std::vector<BoxRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::replace(line.begin(), line.end(), ',', ' ');
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    double frame, x1, y1, x2, y2;
    long cls;
    if (!(ss >> frame >> x1 >> y1 >> x2 >> y2 >> cls) || frame < 0 || cls < 0 ||
        x2 <= x1 || y2 <= y1) {
      throw ValidationError(in + ":" + std::to_string(lineno) +
                            ": expected 'frame x1 y1 x2 y2 class [track [conf]]'");
    }
    BoxRecord r = corner_to_xywh({x1, y1, x2, y2});
    r.t = static_cast<uint64_t>(std::llround(frame * 1e6 / fps));
    r.class_id = static_cast<uint32_t>(cls);
    long track = 0;
    double conf = 1.0;
    if (ss >> track) r.track_id = static_cast<uint32_t>(track);
    if (ss >> conf) r.class_confidence = static_cast<float>(conf);
    records.push_back(r);
  }
  write_labels(out, records);
  std::cout << "wrote " << records.size() << " label records to " << out << "\n";
}

void cmd_simulate(const std::string& frames_dir, const std::string& out,
                  const std::string& to, double fps, const ConverterConfig& cc) {
  if (!fs::is_directory(frames_dir)) {
    throw IoError("frames directory not found: " + frames_dir);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(frames_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .pgm frames under " + frames_dir);

  FrameSequence seq;
  seq.fps = fps;
  for (const auto& p : files) {
    int w = 0, h = 0;
    auto px = read_pgm(p.string(), w, h);
    if (seq.frames.empty()) {
      seq.width = w;
      seq.height = h;
    } else if (w != seq.width || h != seq.height) {
      throw ValidationError(p.string() + ": frame extent mismatch");
    }
    seq.frames.push_back(std::move(px));
  }
  EventStream s = frames_to_events(seq, cc);
  write_events(out, format_for(to, out), s);
  std::cout << "simulated " << s.events.size() << " events from " << files.size()
            << " frames\n";
}

void cmd_train(const ModelArgs& margs, const DataArgs& train_data,
               const DataArgs& val_data, const TrainConfig& tc) {
  auto model = margs.build();
  const int t_bins = model->cfg.backbone.t_bins;
  auto train_set = train_data.load(t_bins);
  auto val_set = val_data.load(t_bins);
  TrainResult r = train_detector(*model, train_set, val_set, tc);
  std::cout << "steps=" << r.steps << " final_loss=" << r.final_loss
            << " map50=" << r.map50 << " map5095=" << r.map5095 << "\n";
}

void cmd_eval(const ModelArgs& margs, const DataArgs& data) {
  auto model = margs.build();
  auto set = data.load(model->cfg.backbone.t_bins);
  auto [map50, map5095] = evaluate_detector(*model, set);
  std::cout << "map50=" << map50 << " map5095=" << map5095 << "\n";
}

ComponentEnergy injected_component(double flops_m, double sops_m) {
  ComponentEnergy c;
  c.flops = flops_m * 1e6;
  c.sops = sops_m * 1e6;
  c.e_ann_mj = energy_ann_mj(c.flops);
  c.e_snn_mj = energy_snn_mj(c.sops);
  return c;
}

void cmd_profile(const ModelArgs& margs, const DataArgs& data, bool audit,
                 bool records, const std::vector<double>& inject,
                 const std::string& out_path) {
  if (audit) {
    for (const auto& row : audit_published_rows()) {
      std::cout << row.name << ": sops=" << row.sops_m << "M listed=" << row.listed_mj
                << "mJ computed=" << row.computed_mj << "mJ"
                << (row.flagged ? " [inconsistent]" : "") << "\n";
    }
    return;
  }
  EnergyReport report;
  if (!inject.empty()) {
    if (inject.size() != 4) {
      throw ValidationError("--inject takes backbone_flops_m backbone_sops_m "
                            "fpn_flops_m fpn_sops_m");
    }
    report = report_from_components(injected_component(inject[0], inject[1]),
                                    injected_component(inject[2], inject[3]));
  } else {
    auto model = margs.build();
    auto calib = data.load(model->cfg.backbone.t_bins);
    report = energy_report(*model, calib, data.height, data.width);
  }
  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw IoError("cannot write " + out_path);
    os = &file;
  }
  if (records) {
    write_energy_records(*os, report);
  } else {
    write_energy_report(*os, report);
  }
}

// mean attention matrix over windows and heads, plus a per-pixel map of the
// attention each token receives, cropped back to the stage extent
struct AttnDump {
  std::vector<double> matrix;  // T x T, rows sum to 1
  int64_t tokens = 0;
  std::vector<double> received;  // H_s x W_s
};

AttnDump summarize_attention(const Tensor& weights, bool grid, int64_t part,
                             int64_t H, int64_t W) {
  const int64_t BH = weights.dim(0), T = weights.dim(1);
  AttnDump d;
  d.tokens = T;
  d.matrix.assign(static_cast<size_t>(T * T), 0.0);
  const auto& w = weights.data();
  for (int64_t b = 0; b < BH; ++b) {
    for (int64_t i = 0; i < T * T; ++i) {
      d.matrix[static_cast<size_t>(i)] += w[static_cast<size_t>(b * T * T + i)];
    }
  }
  for (auto& v : d.matrix) v /= static_cast<double>(BH);

  // received attention per token, kept per window for the spatial overlay
  const int64_t S = std::min<int64_t>(part, std::min(H, W));
  const int64_t Hp = (H + S - 1) / S * S, Wp = (W + S - 1) / S * S;
  const int64_t nwin = (Hp / S) * (Wp / S);
  const int64_t heads = BH / nwin;
  std::vector<double> scores(static_cast<size_t>(nwin * T), 0.0);
  for (int64_t b = 0; b < BH; ++b) {
    const int64_t win = b / heads;
    for (int64_t i = 0; i < T; ++i) {
      for (int64_t j = 0; j < T; ++j) {
        scores[static_cast<size_t>(win * T + j)] +=
            w[static_cast<size_t>((b * T + i) * T + j)];
      }
    }
  }
  Tensor tok = Tensor::from({nwin, T, 1}, std::move(scores));
  Tensor map = grid ? grid_unpartition(tok, 1, 1, Hp, Wp, S)
                    : window_unpartition(tok, 1, 1, Hp, Wp, S);
  d.received.reserve(static_cast<size_t>(H * W));
  for (int64_t y = 0; y < H; ++y) {
    for (int64_t x = 0; x < W; ++x) {
      d.received.push_back(map.data()[static_cast<size_t>(y * Wp + x)]);
    }
  }
  return d;
}

void write_matrix_csv(const std::string& path, const std::vector<double>& m,
                      int64_t T) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f.precision(12);
  for (int64_t i = 0; i < T; ++i) {
    for (int64_t j = 0; j < T; ++j) {
      f << m[static_cast<size_t>(i * T + j)] << (j + 1 == T ? '\n' : ',');
    }
  }
}

void cmd_dump_attention(const ModelArgs& margs, const DataArgs& data,
                        const std::string& out_dir) {
  auto model = margs.build();
  auto set = data.load(model->cfg.backbone.t_bins);
  if (set.empty() || set[0].empty()) throw ValidationError("empty sample set");
  const Tensor& input = set[0][0].input;
  const int64_t H = input.dim(2), W = input.dim(3);

  fs::create_directories(out_dir);
  model->backbone->set_retain_attention(true);
  HsVTState st;
  model->forward(input, st, false);

  // accumulated event frame for the overlays
  std::vector<double> frame(static_cast<size_t>(H * W), 0.0);
  for (int64_t c = 0; c < input.dim(1); ++c) {
    for (int64_t i = 0; i < H * W; ++i) {
      frame[static_cast<size_t>(i)] += input.data()[static_cast<size_t>(c * H * W + i)];
    }
  }
  double frame_hi = 0;
  for (double v : frame) frame_hi = std::max(frame_hi, v);
  if (frame_hi <= 0) frame_hi = 1;
  write_pgm((fs::path(out_dir) / "events.pgm").string(), frame, int(W), int(H));

  int64_t sh = H, sw = W;
  for (int s = 0; s < 4; ++s) {
    sh /= model->cfg.backbone.strides[static_cast<size_t>(s)];
    sw /= model->cfg.backbone.strides[static_cast<size_t>(s)];
    const auto& blk = *model->backbone->stages[static_cast<size_t>(s)]->spatial;
    const std::string stem = (fs::path(out_dir) / ("stage" + std::to_string(s + 1))).string();
    for (bool grid : {false, true}) {
      const auto& att = grid ? *blk.grid_sa : *blk.block_sa;
      const int64_t part = grid ? blk.grid_size : blk.window_size;
      AttnDump d = summarize_attention(att.last_weights, grid, part, sh, sw);
      const std::string kind = grid ? "_grid" : "_block";
      write_matrix_csv(stem + kind + ".csv", d.matrix, d.tokens);
      write_pgm(stem + kind + ".pgm", d.matrix, int(d.tokens), int(d.tokens));

      // overlay: received attention upsampled to the input extent + events
      double hi = 0;
      for (double v : d.received) hi = std::max(hi, v);
      if (hi <= 0) hi = 1;
      const int64_t sy = H / sh, sx = W / sw;
      std::vector<double> over(static_cast<size_t>(H * W));
      for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x) {
          const double a =
              d.received[static_cast<size_t>((y / sy) * sw + (x / sx))] / hi;
          const double e = frame[static_cast<size_t>(y * W + x)] / frame_hi;
          over[static_cast<size_t>(y * W + x)] = 0.5 * a + 0.5 * e;
        }
      }
      write_pgm(stem + kind + "_overlay.pgm", over, int(W), int(H));
    }
  }
  std::cout << "attention maps written to " << out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid spiking vision transformer: event detection pipeline"};
  app.require_subcommand(1);

  // convert-events
  auto* ce = app.add_subcommand("convert-events", "convert an event file between csv and bin");
  std::string ce_in, ce_out, ce_from, ce_to;
  int ce_w = 304, ce_h = 240;
  ce->add_option("input", ce_in)->required();
  ce->add_option("output", ce_out)->required();
  ce->add_option("--from", ce_from, "input format (default: by extension)");
  ce->add_option("--to", ce_to, "output format (default: by extension)");
  ce->add_option("--width", ce_w, "sensor width");
  ce->add_option("--height", ce_h, "sensor height");
  ce->callback([&] { cmd_convert_events(ce_in, ce_out, ce_from, ce_to, ce_w, ce_h); });

  // convert-labels
  auto* cl = app.add_subcommand(
      "convert-labels", "corner-format text labels + fps -> timestamped label file");
  std::string cl_in, cl_out;
  double cl_fps = 0;
  cl->add_option("input", cl_in)->required();
  cl->add_option("output", cl_out)->required();
  cl->add_option("--fps", cl_fps, "source video frame rate")->required();
  cl->callback([&] { cmd_convert_labels(cl_in, cl_out, cl_fps); });

  // simulate-events
  auto* se = app.add_subcommand("simulate-events",
                                "threshold-crossing conversion of PGM frames to events");
  std::string se_dir, se_out, se_to;
  double se_fps = 30.0;
  ConverterConfig se_cc;
  se->add_option("frames", se_dir, "directory of .pgm frames")->required();
  se->add_option("output", se_out)->required();
  se->add_option("--to", se_to, "output format (default: by extension)");
  se->add_option("--fps", se_fps, "frame rate of the source frames");
  se->add_option("--c-pos", se_cc.c_pos, "positive contrast threshold");
  se->add_option("--c-neg", se_cc.c_neg, "negative contrast threshold");
  se->add_option("--log-eps", se_cc.log_eps, "log-intensity offset");
  se->callback([&] { cmd_simulate(se_dir, se_out, se_to, se_fps, se_cc); });

  // train
  auto* tr = app.add_subcommand("train", "train a detector");
  ModelArgs tr_model;
  DataArgs tr_data, tr_val;
  TrainConfig tr_tc;
  tr_model.attach(tr, false);
  tr_data.attach(tr);
  tr->add_option("--val-sequences", tr_val.sequences, "synthetic validation sequences");
  tr->add_option("--val-data", tr_val.dir, "validation event/label directory");
  tr->add_option("--val-seed", tr_val.data_seed, "synthetic validation seed");
  tr->add_option("--epochs", tr_tc.epochs);
  tr->add_option("--lr", tr_tc.lr_max, "peak learning rate (linear decay)");
  tr->add_option("--metrics", tr_tc.metrics_path, "metrics log path");
  tr->add_option("--out", tr_tc.checkpoint_path, "checkpoint path");
  tr->add_option("--shuffle-seed", tr_tc.shuffle_seed);
  tr_val.sequences = 8;
  tr_val.data_seed = 1007;
  tr->callback([&] {
    DataArgs val = tr_data;
    val.sequences = tr_val.sequences;
    val.data_seed = tr_val.data_seed;
    val.dir = tr_val.dir;
    cmd_train(tr_model, tr_data, val, tr_tc);
  });

  // eval
  auto* ev = app.add_subcommand("eval", "report mAP@0.5 and mAP@50:95");
  ModelArgs ev_model;
  DataArgs ev_data;
  ev_model.attach(ev, true);
  ev_data.attach(ev);
  ev->callback([&] { cmd_eval(ev_model, ev_data); });

  // profile
  auto* pr = app.add_subcommand("profile", "energy report from a calibrated forward pass");
  ModelArgs pr_model;
  DataArgs pr_data;
  pr_data.sequences = 4;
  bool pr_audit = false, pr_records = false;
  std::vector<double> pr_inject;
  std::string pr_out;
  pr_model.attach(pr, true);
  pr_data.attach(pr);
  pr->add_flag("--audit", pr_audit, "check published SOPs/energy rows for consistency");
  pr->add_flag("--records", pr_records, "line-delimited output instead of a table");
  pr->add_option("--inject", pr_inject,
                 "skip measurement; use published numbers (millions): "
                 "backbone_flops backbone_sops fpn_flops fpn_sops")
      ->expected(4);
  pr->add_option("--out", pr_out, "write the report to a file");
  pr->callback([&] { cmd_profile(pr_model, pr_data, pr_audit, pr_records, pr_inject, pr_out); });

  // dump-attention
  auto* da = app.add_subcommand("dump-attention",
                                "per-stage Block-SA/Grid-SA heatmaps, CSVs, and overlays");
  ModelArgs da_model;
  DataArgs da_data;
  da_data.sequences = 1;
  std::string da_out = "attention";
  da_model.attach(da, true);
  da_data.attach(da);
  da->add_option("--out", da_out, "output directory");
  da->callback([&] { cmd_dump_attention(da_model, da_data, da_out); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
