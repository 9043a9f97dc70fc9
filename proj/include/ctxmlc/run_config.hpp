#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxmlc/model.hpp"
#include "ctxmlc/noise.hpp"
#include "ctxmlc/train.hpp"

namespace ctxmlc {

enum class LabelInit { word, random };

/// Everything an experiment needs, read from `key = value` lines.
struct RunConfig {
  std::filesystem::path train_path, val_path, test_path;
  std::filesystem::path label_names_path, embeddings_path;
  std::filesystem::path checkpoint_path, history_path;

  // num_features / num_labels are normally taken from the training data;
  // label_dim 0 means "use the word-embedding width".
  ModelConfig model;
  TrainConfig train;
  LabelInit label_init = LabelInit::word;
  std::optional<NoiseSpec> train_noise;  // applied to training labels before fitting
};

/// Directory relative paths are resolved against: $CTXMLC_DATA_ROOT when
/// set, otherwise `fallback`.
std::filesystem::path data_root(const std::filesystem::path& fallback);

/// Applies one setting. Throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value,
                   const std::filesystem::path& base_dir);

/// Parses `key = value` lines; '#' starts a comment.
void parse_run_config(std::istream& in, RunConfig& config, const std::filesystem::path& base_dir);

/// Loads `path` (when non-empty) and then applies `overrides` of the form
/// key=value.
RunConfig load_run_config(const std::filesystem::path& path,
                          std::span<const std::string> overrides);

/// All recognised keys, sorted.
std::vector<std::string> run_config_keys();

}  // namespace ctxmlc
