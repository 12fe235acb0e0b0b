#pragma once

#include <map>
#include <string>

#include "hsvt/detect.hpp"

namespace hsvt {

// Plain key=value model config ('#' comments, blank lines ignored).
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::map<std::string, std::string> parse_config_text(const std::string& text,
                                                     const std::string& origin);

// Recognized keys: variant, channels, t_bins, window_size, grid_size,
// head_dim, mlp_ratio, mlp_spiking_layers, neuron, surrogate, alpha, tau,
// v_threshold, v_reset, placement, additive_fusion, num_classes,
// score_threshold, nms_iou, fpn_channels. Unknown keys are rejected.
DetectorConfig detector_config_from(const std::map<std::string, std::string>& kv);

}  // namespace hsvt
