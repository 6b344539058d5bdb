#ifndef SEPKIT_METRICS_HPP
#define SEPKIT_METRICS_HPP

#include "sepkit/datagen.hpp"
#include "sepkit/losses.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace sepkit {

/// Serialized stand-in for +/- infinity.
inline constexpr double kSentinelDb = 150.0;

inline double clamp_db(double v) { return v > kSentinelDb ? kSentinelDb : (v < -kSentinelDb ? -kSentinelDb : v); }

struct Decomposition {
  VectorXd target;        ///< projection onto the target reference
  VectorXd interference;  ///< projection onto all references minus target
  VectorXd artifact;      ///< remainder
};

/// Zero-delay BSS-eval style decomposition of an estimate.
Decomposition decompose(const AudioBuffer& estimate, const std::vector<AudioBuffer>& references, int target_index);

/// SDR, SIR, SAR in dB for one decomposition; exact +/-inf for degenerate energies.
struct SourceScore {
  double sdr = 0.0;
  double sir = 0.0;
  double sar = 0.0;
};
SourceScore source_score(const Decomposition& d);

enum class AssignMode { optimal, default_order };
std::string_view to_string(AssignMode mode);
AssignMode assign_mode_from_string(std::string_view s);

struct SeparationScore {
  std::vector<double> sdr_db, sir_db, sar_db;  ///< indexed by estimate (output) index
  Permutation assignment;                      ///< estimate i scored against reference assignment[i]
  AssignMode mode = AssignMode::optimal;

  /// Means over sources of sentinel-clamped values.
  double mean_sdr() const;
  double mean_sir() const;
  double mean_sar() const;
};

/// Scores of every estimate against every reference, computed once.
struct PairwiseScores {
  std::vector<std::vector<SourceScore>> table;  ///< [estimate][reference]

  SeparationScore select(AssignMode mode) const;
};

PairwiseScores pairwise_scores(const std::vector<AudioBuffer>& estimates, const std::vector<AudioBuffer>& references);
SeparationScore score(const std::vector<AudioBuffer>& estimates, const std::vector<AudioBuffer>& references,
                      AssignMode mode);

/// Maps a mixture (with its references available for oracles) to S estimates.
using Estimator = std::function<std::vector<AudioBuffer>(const Utterance&)>;

struct UtteranceScore {
  std::string id;
  std::string split;
  AssignMode mode = AssignMode::optimal;
  SeparationScore score;
  std::vector<double> mixture_sdr_db;  ///< per reference, mixture used as the estimate
  double mean_sdr_improvement() const;  ///< mean over outputs of SDR - mixture SDR of the assigned reference
};

struct SplitSummary {
  std::string split;
  AssignMode mode = AssignMode::optimal;
  double sdr = 0.0, sir = 0.0, sar = 0.0, sdr_improvement = 0.0;
  int n = 0;
  int neg_inf_sdr = 0;  ///< sources whose SDR is -inf
};

struct CorpusReport {
  std::vector<UtteranceScore> utterances;
  std::vector<SplitSummary> summaries;

  const SplitSummary* find(const std::string& split, AssignMode mode) const;
  std::vector<const UtteranceScore*> select(const std::string& split, AssignMode mode) const;
};

/// Scores `estimator` on the given splits of a manifest in the requested modes.
CorpusReport corpus_report(const Manifest& manifest, const Estimator& estimator,
                           const std::vector<std::string>& splits, const std::vector<AssignMode>& modes,
                           int sample_rate = 8000);

/// Aligned text table: split, mode, SDR, SIR, SAR, SDRi, n.
void write_report_table(std::ostream& os, const CorpusReport& report, const std::string& title = {});
/// One JSON record per utterance and mode, followed by summary records.
void write_report_jsonl(std::ostream& os, const CorpusReport& report, const std::string& system = {});

}  // namespace sepkit

#endif  // SEPKIT_METRICS_HPP
