#ifndef SEPKIT_CHECKPOINT_HPP
#define SEPKIT_CHECKPOINT_HPP

#include "sepkit/dsp.hpp"
#include "sepkit/neural.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sepkit {

enum class Stage { dc, joint, dl };
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view s);

struct Checkpoint {
  Stage stage = Stage::dc;
  /// Stage tags of the checkpoints this one descends from, oldest first.
  std::vector<std::string> lineage;
  nn::Model<double> model;
  std::optional<nn::AdamState<double>> optimizer;
  NormStats norm;
  StftConfig stft;
  int sample_rate = 8000;
  std::string meta_json = "{}";  ///< free-form metadata (training config, seed)
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned binary container: magic, version, JSON header with block names and
/// shapes, raw little-endian float64 blocks, FNV-1a checksum.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IncompatibleCheckpoint on any version, checksum or shape problem.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Content hash of parameters, optimizer state and normalization statistics.
std::uint64_t checkpoint_hash(const Checkpoint& ckpt);

}  // namespace sepkit

#endif  // SEPKIT_CHECKPOINT_HPP
