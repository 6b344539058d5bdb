#ifndef SEPKIT_DATAGEN_HPP
#define SEPKIT_DATAGEN_HPP

#include "sepkit/dsp.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sepkit {

/// Synthetic stand-in for a talker: a pitch range plus a fixed formant envelope.
struct SpeakerProfile {
  std::string id;
  double f0_min = 100.0;  ///< Hz
  double f0_max = 200.0;  ///< Hz
  std::uint64_t formant_seed = 0;
  double modulation_rate = 4.0;  ///< Hz, syllable-rate amplitude modulation

  void validate() const;
};

/// Deterministically derives a profile; `seed` controls pitch range, formants and rate.
SpeakerProfile make_speaker_profile(const std::string& id, std::uint64_t seed);

struct MixtureSpec {
  SpeakerProfile source_a;
  SpeakerProfile source_b;
  double snr_db = 0.0;
  double duration_s = 1.0;
  std::uint64_t seed = 0;
};

struct Utterance {
  AudioBuffer mixture;
  std::vector<AudioBuffer> references;
  MixtureSpec spec;

  int num_sources() const { return static_cast<int>(references.size()); }
};

/// Harmonic tone complex with a wandering F0 inside the profile range, syllabic
/// amplitude modulation and short pauses. Output has unit RMS.
AudioBuffer synth_source(const SpeakerProfile& profile, double duration_s, std::uint64_t seed,
                         int sample_rate = 8000);

/// Scales `b` so that 10 log10(P_a / P_b) = snr_db and sums. The stored
/// references are the scaled signals, so mixture == sum(references).
Utterance mix(const AudioBuffer& a, const AudioBuffer& b, double snr_db);

double power(const AudioBuffer& audio);

struct CorpusConfig {
  std::uint64_t master_seed = 1234;
  int sample_rate = 8000;
  double duration_s = 0.5;
  int num_train = 500;
  int num_dev = 100;
  int num_test = 100;
  int train_speakers = 16;  ///< pool shared by train and dev (closed condition)
  int test_speakers = 8;    ///< disjoint pool for test (open condition)
  double snr_min_db = 0.0;
  double snr_max_db = 5.0;
  double peak_level = 0.9;  ///< mixture peak after gain, before 16-bit quantization

  void validate() const;
};

struct ManifestRecord {
  std::string id;
  std::string split;
  std::filesystem::path mixture_path;
  std::vector<std::filesystem::path> ref_paths;
  double snr_db = 0.0;
  std::vector<std::string> speaker_ids;
};

struct Manifest {
  std::vector<ManifestRecord> records;

  std::vector<const ManifestRecord*> split(const std::string& name) const;
};

/// One JSON object per line; paths are written relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
/// Paths in the returned records are resolved against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);

/// Loads the WAV files behind a record into an Utterance.
Utterance load_utterance(const ManifestRecord& record, int expected_rate);

/// Speaker pools for a corpus; throws SplitViolation if the pools overlap.
struct SpeakerPools {
  std::vector<SpeakerProfile> train;
  std::vector<SpeakerProfile> test;
};
SpeakerPools make_speaker_pools(const CorpusConfig& config);
void check_disjoint(const SpeakerPools& pools);

/// Generates the utterance with the given split/index, before any gain or quantization.
Utterance generate_utterance(const CorpusConfig& config, const SpeakerPools& pools, const std::string& split,
                             int index);

/// Writes `out_dir/manifest.jsonl` plus `out_dir/wav/<split>/*.wav`.
Manifest build_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir);

}  // namespace sepkit

#endif  // SEPKIT_DATAGEN_HPP
