#include "hsvt/config.hpp"

#include <fstream>
#include <sstream>

#include "hsvt/errors.hpp"

namespace hsvt {

std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const char* ws = " \t\r";
    const auto a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(origin + ":" + std::to_string(lineno) +
                            ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    kv[key] = val;
  }
  return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path);
}

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

int to_int(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError("config key " + k + ": not an integer: " + v);
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError("config key " + k + ": not a number: " + v);
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config key " + k + ": expected true/false: " + v);
}

}  // namespace

DetectorConfig detector_config_from(const std::map<std::string, std::string>& kv) {
  DetectorConfig cfg;
  if (auto it = kv.find("variant"); it != kv.end()) {
    cfg.backbone = BackboneConfig::variant(it->second);
  }
  for (const auto& [k, v] : kv) {
    if (k == "variant") {
      // handled above so later keys can override the preset
    } else if (k == "channels") {
      auto parts = split_commas(v);
      if (parts.size() != 4) throw ValidationError("channels: need 4 values");
      for (int i = 0; i < 4; ++i) {
        cfg.backbone.channels[static_cast<size_t>(i)] = to_int(k, parts[static_cast<size_t>(i)]);
      }
    } else if (k == "t_bins") {
      cfg.backbone.t_bins = to_int(k, v);
      if (cfg.backbone.t_bins < 1) throw ValidationError("t_bins must be >= 1");
    } else if (k == "window_size") {
      cfg.backbone.window_size = to_int(k, v);
    } else if (k == "grid_size") {
      cfg.backbone.grid_size = to_int(k, v);
    } else if (k == "head_dim") {
      cfg.backbone.head_dim = to_int(k, v);
    } else if (k == "mlp_ratio") {
      cfg.backbone.mlp_ratio = to_int(k, v);
    } else if (k == "mlp_spiking_layers") {
      cfg.backbone.mlp_spiking_layers = to_int(k, v);
    } else if (k == "neuron") {
      if (v == "lif") cfg.backbone.neuron.kind = NeuronKind::LIF;
      else if (v == "if") cfg.backbone.neuron.kind = NeuronKind::IF;
      else throw ValidationError("neuron: expected lif or if");
    } else if (k == "surrogate") {
      NeuronConfig base = cfg.backbone.neuron;
      if (v == "atan") cfg.backbone.neuron = NeuronConfig::with_surrogate(Surrogate::ATan);
      else if (v == "sigmoid") cfg.backbone.neuron = NeuronConfig::with_surrogate(Surrogate::Sigmoid);
      else throw ValidationError("surrogate: expected atan or sigmoid");
      cfg.backbone.neuron.kind = base.kind;
      cfg.backbone.neuron.tau = base.tau;
      cfg.backbone.neuron.v_threshold = base.v_threshold;
      cfg.backbone.neuron.v_reset = base.v_reset;
    } else if (k == "alpha") {
      cfg.backbone.neuron.alpha = to_double(k, v);
    } else if (k == "tau") {
      cfg.backbone.neuron.tau = to_double(k, v);
    } else if (k == "v_threshold") {
      cfg.backbone.neuron.v_threshold = to_double(k, v);
    } else if (k == "v_reset") {
      cfg.backbone.neuron.v_reset = to_double(k, v);
    } else if (k == "placement") {
      auto parts = split_commas(v);
      if (parts.size() != 4) throw ValidationError("placement: need 4 entries");
      for (int i = 0; i < 4; ++i) {
        cfg.backbone.placement[static_cast<size_t>(i)] =
            temporal_kind_from_string(parts[static_cast<size_t>(i)]);
      }
    } else if (k == "additive_fusion") {
      cfg.backbone.additive_fusion = to_bool(k, v);
    } else if (k == "num_classes") {
      cfg.head.num_classes = to_int(k, v);
      if (cfg.head.num_classes < 1) throw ValidationError("num_classes must be >= 1");
    } else if (k == "score_threshold") {
      cfg.head.score_threshold = to_double(k, v);
      if (cfg.head.score_threshold <= 0 || cfg.head.score_threshold >= 1) {
        throw ValidationError("score_threshold must lie in (0,1)");
      }
    } else if (k == "nms_iou") {
      cfg.head.nms_iou = to_double(k, v);
      if (cfg.head.nms_iou <= 0 || cfg.head.nms_iou >= 1) {
        throw ValidationError("nms_iou must lie in (0,1)");
      }
    } else if (k == "fpn_channels") {
      cfg.fpn_channels = to_int(k, v);
    } else {
      throw ValidationError("unknown config key: " + k);
    }
  }
  return cfg;
}

}  // namespace hsvt
