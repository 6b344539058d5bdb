#ifndef SEPKIT_PIPELINE_HPP
#define SEPKIT_PIPELINE_HPP

#include "sepkit/checkpoint.hpp"
#include "sepkit/datagen.hpp"
#include "sepkit/losses.hpp"
#include "sepkit/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sepkit {

/// Training hyperparameters. Defaults are the published values; desk_preset()
/// shrinks the schedule so a full run fits on a laptop.
struct TrainConfig {
  Stage stage = Stage::dc;
  double lambda = 0.05;
  double alpha = 0.1;
  int batch_utts = 16;
  double lr_init = 5e-4;
  double lr_decay = 0.7;
  int min_epochs = 30;
  int max_epochs = 40;
  int dc_epochs = 30;          ///< stage dc runs a fixed number of epochs
  double early_stop_rel = 0.01;
  std::uint64_t seed = 1;
  bool normalize_dc = true;    ///< divide J_DC by (TF)^2
  bool truncate_targets = false;  ///< clamp IPSM to [0, 1] inside the PSA target
  int max_train_utts = 0;      ///< 0 = all
  nn::ModelConfig model;

  void validate() const;
};

TrainConfig paper_preset();
TrainConfig desk_preset();

/// Features and targets of one utterance, computed once before training.
struct PreparedUtterance {
  std::string id;
  MatrixXd magnitude;             ///< |Y|, T x F
  MatrixXd input;                 ///< normalized |Y|
  std::vector<MatrixXd> targets;  ///< PSA targets, one per source
  MatrixXd membership;            ///< (T F) x S dominant-source one-hot
};

struct Dataset {
  std::vector<PreparedUtterance> items;
};

PreparedUtterance prepare_utterance(const Utterance& utt, const std::string& id, const StftConfig& stft,
                                    const NormStats& norm, bool truncate_targets = false);
/// Loads every record of `split`; at most `limit` records when limit > 0.
Dataset prepare_split(const Manifest& manifest, const std::string& split, const StftConfig& stft,
                      const NormStats& norm, int sample_rate, bool truncate_targets = false, int limit = 0);
/// Per-bin statistics over the training mixtures.
NormStats training_norm_stats(const Manifest& manifest, const StftConfig& stft, int sample_rate, int limit = 0);

/// Which terms the objective contains.
struct Objective {
  Stage stage = Stage::dc;
  double lambda = 0.05;
  double alpha = 0.1;
  bool normalize_dc = true;

  static Objective for_config(const TrainConfig& config) {
    return {config.stage, config.lambda, config.alpha, config.normalize_dc};
  }
};

/// Builds the objective for one utterance on `g`; returns the root and the report.
/// Stage dc: J_DC. Stage joint: lambda J_DC + (1 - lambda) phi*. Stage dl: lambda J_DC + (1 - lambda) J_DL.
/// A baseline model has no embeddings, so its objective is phi* (or J_DL in stage dl).
std::pair<nn::Var<double>, LossReport> utterance_objective(nn::Graph<double>& g, const nn::Model<double>& model,
                                                           const PreparedUtterance& item, const Objective& objective,
                                                           nn::Mode mode, std::mt19937_64& rng);

/// Eval-mode objective averaged over a dataset.
struct DatasetLoss {
  double total = 0.0;
  double j_dc = 0.0;
  double phi_star = 0.0;
  double dl_term = 0.0;
  double separation_gap = 0.0;  ///< mean(non-chosen costs) - chosen cost, averaged
};
DatasetLoss evaluate_objective(const nn::Model<double>& model, const Dataset& data, const Objective& objective);

struct TrainLogEntry {
  std::string type;  ///< "step" or "epoch"
  int epoch = 0;
  std::int64_t step = 0;
  Stage stage = Stage::dc;
  double total = 0.0, j_dc = 0.0, phi_star = 0.0, dl_term = 0.0;
  double dev_loss = 0.0;
  double lr = 0.0;
};
void write_log_entry(std::ostream& os, const TrainLogEntry& e);

/// Learning rate for the next epoch: scaled by `decay` when the dev loss went up.
double next_learning_rate(double lr, double previous_dev, double dev, double decay);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<TrainLogEntry> log;
  double initial_dev_loss = 0.0;
  double final_dev_loss = 0.0;  ///< dev loss of the returned parameters
  int epochs = 0;               ///< epochs run
  int best_epoch = 0;           ///< epoch whose parameters are returned
};

/// Stage order: dc has no init; joint needs a dc checkpoint (or no init for a
/// baseline model); dl needs a joint checkpoint. Violations throw StageOrderViolation.
nn::Model<double> init_stage_model(const TrainConfig& config, const std::optional<Checkpoint>& init);

/// Trains one stage. Progress lines go to `log_stream` when given.
TrainResult train_stage(const TrainConfig& config, const Manifest& manifest, const std::optional<Checkpoint>& init,
                        std::ostream* log_stream = nullptr, int sample_rate = 8000, const StftConfig& stft = {});

/// Mask-based separation with a joint or dl checkpoint.
std::vector<AudioBuffer> separate(const Checkpoint& ckpt, const AudioBuffer& mixture);
/// Deep-clustering inference: embeddings, K-means with k = S, binary masks.
std::vector<AudioBuffer> separate_dc_baseline(const Checkpoint& ckpt, const AudioBuffer& mixture,
                                              std::uint64_t seed = 0);
/// File variants: read a mixture WAV, write <out_dir>/<stem>_s<k>.wav.
std::vector<std::filesystem::path> separate_file(const Checkpoint& ckpt, const std::filesystem::path& mixture_wav,
                                                 const std::filesystem::path& out_dir, bool dc_baseline = false);

/// IPSM oracle estimator (uses the references).
Estimator ipsm_oracle_estimator(const StftConfig& stft = {});
/// Mixture-as-estimate for every source.
Estimator mixture_estimator(int num_sources = 2);
Estimator checkpoint_estimator(const Checkpoint& ckpt);
Estimator dc_kmeans_estimator(const Checkpoint& ckpt, std::uint64_t seed = 0);

struct ExperimentConfig {
  TrainConfig train;                  ///< base config; stage/lambda set per row
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<double> lambdas = {0.01, 0.05, 0.1};
  double dl_lambda = 0.05;            ///< DL fine-tune starts from this joint row
  int joint_max_epochs = 0;           ///< 0 = train.max_epochs
  int dl_max_epochs = 0;              ///< 0 = train.max_epochs
  int dl_min_epochs = -1;             ///< -1 = train.min_epochs
  bool include_dc_kmeans = true;
};

struct SystemResult {
  std::string system;  ///< "uPIT", "uPIT+DEF", "uPIT+DEF+DL", "DC+kmeans"
  double lambda = -1.0;  ///< -1 when not applicable
  std::uint64_t seed = 0;
  CorpusReport report;
  std::uint64_t checkpoint_hash = 0;
};

struct ExperimentSeedResult {
  std::uint64_t seed = 0;
  std::vector<SystemResult> systems;
  double joint_dev_gap = 0.0;  ///< separation gap on dev for the DL init (joint, dl_lambda)
  double dl_dev_gap = 0.0;     ///< same after DL fine-tuning
  double dc_initial_dev = 0.0;
  double dc_final_dev = 0.0;

  const SystemResult* find(const std::string& system, double lambda = -1.0) const;
};

struct ExperimentResult {
  std::vector<ExperimentSeedResult> seeds;
};

/// Trains the uPIT baseline, DC, the joint lambda sweep and DL fine-tuning for
/// each seed, then scores all systems on dev (closed) and test (open) in both
/// assignment modes. Checkpoints and logs go under `out_dir` when non-empty.
ExperimentResult run_experiment(const ExperimentConfig& config, const Manifest& manifest,
                                const std::filesystem::path& out_dir = {}, std::ostream* progress = nullptr,
                                int sample_rate = 8000);

/// Table-1-shaped text: one row per system and lambda, SDR/SIR/SAR for
/// optimal/default assignment on closed (dev) and open (test) splits, averaged over seeds.
void write_experiment_table(std::ostream& os, const ExperimentResult& result);
void write_experiment_jsonl(std::ostream& os, const ExperimentResult& result);

}  // namespace sepkit

#endif  // SEPKIT_PIPELINE_HPP
