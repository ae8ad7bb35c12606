#pragma once

#include <iosfwd>
#include <string>

#include "retrologic/model/gln_model.hpp"
#include "retrologic/training/training.hpp"

namespace retrologic {

/// Everything a run reads from a config file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  int radius = 1;
  std::size_t support_cap = kDefaultSupportCap;
  std::string train_path;
  std::string val_path;
  std::string test_path;
  std::string templates_path;
  std::string model_path;
  std::string metrics_path;
};

/// Flat `key = value` lines; '#' starts a comment. Unknown keys and bad
/// values throw std::invalid_argument naming the line.
RunConfig parse_config(std::istream& in, RunConfig base = {});

/// As parse_config; relative paths are resolved against the file's
/// directory. Throws DataError when the file cannot be opened.
RunConfig load_config_file(const std::string& path, RunConfig base = {});

}  // namespace retrologic
