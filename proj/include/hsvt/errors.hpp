#pragma once

#include <stdexcept>
#include <string>

namespace hsvt {

// CLI maps ValidationError -> exit 1, IoError -> exit 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hsvt
