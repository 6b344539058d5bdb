#ifndef SEPKIT_CONFIG_HPP
#define SEPKIT_CONFIG_HPP

#include "sepkit/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sepkit {

/// Everything a `sepkit` invocation can be configured with. On disk this is a
/// JSON object with optional sections "corpus", "train", "model", "experiment",
/// "stft" and a top-level "sample_rate" and "preset" ("desk" or "paper").
struct SepkitConfig {
  std::string preset = "desk";
  int sample_rate = 8000;
  StftConfig stft;
  CorpusConfig corpus;
  ExperimentConfig experiment;  ///< experiment.train holds the training config

  TrainConfig& train() { return experiment.train; }
  const TrainConfig& train() const { return experiment.train; }
};

/// Defaults for a preset; "desk" shrinks widths and schedule.
SepkitConfig default_config(const std::string& preset = "desk");

/// Parses JSON text. `overrides` are "section.key=value" strings, type-checked
/// against the field they replace. Throws InvalidConfig.
SepkitConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
SepkitConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::string to_json_string(const SepkitConfig& config);
std::string to_json_string(const TrainConfig& config);

}  // namespace sepkit

#endif  // SEPKIT_CONFIG_HPP
