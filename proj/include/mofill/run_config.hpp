#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include "mofill/training.hpp"

namespace mofill {

// Flat key=value run description. `#` starts a comment; unknown keys and
// repeated keys are rejected.
struct RunConfig {
  TrainConfig train;
  std::filesystem::path data;     // directory of clip files
  std::filesystem::path weights;  // output weights
  std::filesystem::path stats;    // output normalization stats
  std::filesystem::path log;      // output training log
  std::set<std::string> keys;     // keys present in the file

  bool has(const std::string& key) const { return keys.count(key) != 0; }
};

RunConfig parse_run_config(std::string_view text, const std::string& origin = "<memory>");
RunConfig load_run_config(const std::filesystem::path& path);

// Accepts true/false, 1/0, on/off, yes/no.
bool parse_bool(std::string_view text);

}  // namespace mofill
