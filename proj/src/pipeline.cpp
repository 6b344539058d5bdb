#include "sepkit/pipeline.hpp"

#include "sepkit/clustering.hpp"
#include "sepkit/config.hpp"
#include "sepkit/wav.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>

namespace sepkit {

void TrainConfig::validate() const {
  require(lambda >= 0.0 && lambda <= 1.0, ErrorCode::InvalidConfig, "lambda must be in [0, 1]");
  require(alpha >= 0.0, ErrorCode::InvalidConfig, "alpha must be non-negative");
  require(batch_utts >= 1, ErrorCode::InvalidConfig, "batch_utts must be positive");
  require(lr_init > 0.0 && lr_decay > 0.0 && lr_decay <= 1.0, ErrorCode::InvalidConfig,
          "lr_init must be positive and lr_decay in (0, 1]");
  require(min_epochs >= 0 && max_epochs >= 1 && dc_epochs >= 1, ErrorCode::InvalidConfig,
          "epoch counts must be positive");
  require(early_stop_rel >= 0.0, ErrorCode::InvalidConfig, "early_stop_rel must be non-negative");
  model.validate();
}

PreparedUtterance prepare_utterance(const Utterance& utt, const std::string& id, const StftConfig& stft_cfg,
                                    const NormStats& norm, bool truncate_targets) {
  PreparedUtterance out;
  out.id = id;
  const Spectrogram mix = stft(utt.mixture, stft_cfg);
  std::vector<Spectrogram> refs;
  for (const auto& r : utt.references) refs.push_back(stft(r, stft_cfg));
  out.magnitude = mix.magnitude;
  out.input = normalize_magnitude(mix.magnitude, norm);
  if (truncate_targets) {
    for (const auto& m : ipsm(refs, mix, true).masks) out.targets.push_back(mix.magnitude.cwiseProduct(m));
  } else {
    out.targets = psa_targets(refs, mix);
  }
  out.membership = dominant_membership(refs).b;
  return out;
}

NormStats training_norm_stats(const Manifest& manifest, const StftConfig& stft_cfg, int sample_rate, int limit) {
  std::vector<MatrixXd> mags;
  for (const ManifestRecord* rec : manifest.split("train")) {
    if (limit > 0 && static_cast<int>(mags.size()) >= limit) break;
    mags.push_back(stft(load_utterance(*rec, sample_rate).mixture, stft_cfg).magnitude);
  }
  require(!mags.empty(), ErrorCode::ManifestError, "manifest has no train utterances");
  return compute_norm_stats(mags);
}

Dataset prepare_split(const Manifest& manifest, const std::string& split, const StftConfig& stft_cfg,
                      const NormStats& norm, int sample_rate, bool truncate_targets, int limit) {
  Dataset d;
  for (const ManifestRecord* rec : manifest.split(split)) {
    if (limit > 0 && static_cast<int>(d.items.size()) >= limit) break;
    d.items.push_back(
        prepare_utterance(load_utterance(*rec, sample_rate), rec->id, stft_cfg, norm, truncate_targets));
  }
  return d;
}

std::pair<nn::Var<double>, LossReport> utterance_objective(nn::Graph<double>& g, const nn::Model<double>& model,
                                                           const PreparedUtterance& item, const Objective& objective,
                                                           nn::Mode mode, std::mt19937_64& rng) {
  const bool baseline = model.config.kind == nn::ModelKind::baseline;
  require(!(baseline && objective.stage == Stage::dc), ErrorCode::InvalidConfig,
          "baseline model has no embeddings to train with the DC objective");
  const auto out = nn::forward(g, model, item.input, mode, rng);

  std::optional<nn::Var<double>> dc;
  double j_dc = 0.0;
  const double lambda = baseline ? 0.0 : (objective.stage == Stage::dc ? 1.0 : objective.lambda);
  if (!baseline && lambda > 0.0) {
    dc = nn::dc_loss(*out.embeddings, model.config.embed_dim, item.membership, objective.normalize_dc);
    j_dc = dc->value()(0, 0);
  }
  if (objective.stage == Stage::dc) {
    LossReport r;
    r.total = r.j_dc = j_dc;
    r.lambda = 1.0;
    return {*dc, r};
  }

  require(out.masks.has_value(), ErrorCode::UnsupportedStage, "model has no separation net");
  const bool use_dl = objective.stage == Stage::dl;
  PermutationTable table;
  nn::Var<double> sep =
      nn::permutation_objective(*out.masks, item.magnitude, item.targets, objective.alpha, use_dl, &table);
  nn::Var<double> root = sep;
  if (dc) root = nn::scale(*dc, lambda) + nn::scale(sep, 1.0 - lambda);
  return {root, joint_loss(j_dc, table, lambda, objective.alpha, use_dl)};
}

DatasetLoss evaluate_objective(const nn::Model<double>& model, const Dataset& data, const Objective& objective) {
  DatasetLoss acc;
  if (data.items.empty()) return acc;
  std::mt19937_64 rng(0);
  for (const auto& item : data.items) {
    nn::Graph<double> g(false);
    const auto [root, rep] = utterance_objective(g, model, item, objective, nn::Mode::eval, rng);
    acc.total += rep.total;
    acc.j_dc += rep.j_dc;
    acc.phi_star += rep.phi_star;
    acc.dl_term += rep.dl_term;
    acc.separation_gap += rep.table.separation_gap();
  }
  const double n = static_cast<double>(data.items.size());
  acc.total /= n;
  acc.j_dc /= n;
  acc.phi_star /= n;
  acc.dl_term /= n;
  acc.separation_gap /= n;
  return acc;
}

void write_log_entry(std::ostream& os, const TrainLogEntry& e) {
  nlohmann::ordered_json j;
  j["type"] = e.type;
  j["epoch"] = e.epoch;
  j["step"] = e.step;
  j["stage"] = std::string(to_string(e.stage));
  j["total"] = e.total;
  j["j_dc"] = e.j_dc;
  j["phi_star"] = e.phi_star;
  j["dl_term"] = e.dl_term;
  if (e.type == "epoch") j["dev_loss"] = e.dev_loss;
  j["lr"] = e.lr;
  os << j.dump() << '\n';
}

double next_learning_rate(double lr, double previous_dev, double dev, double decay) {
  return dev > previous_dev ? lr * decay : lr;
}

nn::Model<double> init_stage_model(const TrainConfig& config, const std::optional<Checkpoint>& init) {
  const bool baseline = config.model.kind == nn::ModelKind::baseline;
  const std::uint64_t seed = mix_seed(config.seed, 0x1417 + static_cast<int>(config.stage));
  switch (config.stage) {
    case Stage::dc:
      require(!baseline, ErrorCode::InvalidConfig, "stage dc needs an embedding model");
      require(!init.has_value(), ErrorCode::StageOrderViolation, "stage dc starts from scratch");
      return nn::init_model(config.model, false, seed);
    case Stage::joint: {
      if (baseline) {
        require(!init.has_value(), ErrorCode::StageOrderViolation, "baseline joint stage starts from scratch");
        return nn::init_model(config.model, true, seed);
      }
      require(init.has_value() && init->stage == Stage::dc, ErrorCode::StageOrderViolation,
              "stage joint must start from a dc checkpoint");
      nn::Model<double> model = init->model;
      require(model.config.kind == nn::ModelKind::embedding, ErrorCode::StageOrderViolation,
              "dc checkpoint must hold an embedding model");
      // Runtime knobs come from the new config; topology comes from the checkpoint.
      model.config.dropout = config.model.dropout;
      model.config.concat_magnitude = config.model.concat_magnitude;
      model.config.separation_layers = config.model.separation_layers;
      model.separation.reset();
      attach_separation(model, seed);
      return model;
    }
    case Stage::dl: {
      require(init.has_value() && init->stage == Stage::joint, ErrorCode::StageOrderViolation,
              "stage dl must start from a joint checkpoint");
      nn::Model<double> model = init->model;
      model.config.dropout = config.model.dropout;
      return model;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown stage");
}

TrainResult train_stage(const TrainConfig& config, const Manifest& manifest, const std::optional<Checkpoint>& init,
                        std::ostream* log_stream, int sample_rate, const StftConfig& stft_cfg) {
  config.validate();
  keep_large_allocations();
  TrainResult result;
  nn::Model<double> model = init_stage_model(config, init);

  const NormStats norm =
      init ? init->norm : training_norm_stats(manifest, stft_cfg, sample_rate, config.max_train_utts);
  const Dataset train = prepare_split(manifest, "train", stft_cfg, norm, sample_rate, config.truncate_targets,
                                      config.max_train_utts);
  const Dataset dev = prepare_split(manifest, "dev", stft_cfg, norm, sample_rate, config.truncate_targets);
  require(!train.items.empty(), ErrorCode::ManifestError, "no training utterances");
  require(!dev.items.empty(), ErrorCode::ManifestError, "no dev utterances");

  const Objective objective = Objective::for_config(config);
  auto adam = nn::AdamState<double>::init(model.params, config.lr_init);
  double prev_dev = evaluate_objective(model, dev, objective).total;
  result.initial_dev_loss = prev_dev;

  const int max_epochs = config.stage == Stage::dc ? config.dc_epochs : config.max_epochs;
  std::vector<std::size_t> order(train.items.size());
  std::int64_t step = 0;
  // Stage dc keeps its last epoch; later stages return the lowest-dev-loss epoch.
  std::optional<nn::ParameterSet<double>> best_params;
  double best_dev = std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    TrainLogEntry ep{"epoch", epoch, 0, config.stage};
    int batches = 0;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(mix_seed(config.seed, 0x5f00 + epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < order.size(); start += config.batch_utts) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_utts));
      std::vector<MatrixXd> grads = model.params.zeros_like();
      TrainLogEntry entry{"step", epoch, step, config.stage};
      for (std::size_t b = start; b < end; ++b) {
        std::mt19937_64 dropout_rng(mix_seed(mix_seed(config.seed, step), b));
        nn::Graph<double> g;
        auto [root, rep] =
            utterance_objective(g, model, train.items[order[b]], objective, nn::Mode::train, dropout_rng);
        g.backward(root);
        const auto ug = g.parameter_gradients(model.params);
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += ug[p];
        entry.total += rep.total;
        entry.j_dc += rep.j_dc;
        entry.phi_star += rep.phi_star;
        entry.dl_term += rep.dl_term;
      }
      const double n = static_cast<double>(end - start);
      for (auto& gm : grads) gm /= n;
      entry.total /= n;
      entry.j_dc /= n;
      entry.phi_star /= n;
      entry.dl_term /= n;
      entry.lr = adam.lr;
      nn::adam_step(adam, model.params, grads);
      if (log_stream) write_log_entry(*log_stream, entry);
      result.log.push_back(entry);
      ep.total += entry.total;
      ep.j_dc += entry.j_dc;
      ep.phi_star += entry.phi_star;
      ep.dl_term += entry.dl_term;
      ++batches;
      ++step;
    }

    const double dev_loss = evaluate_objective(model, dev, objective).total;
    ep.step = step;
    ep.total /= batches;
    ep.j_dc /= batches;
    ep.phi_star /= batches;
    ep.dl_term /= batches;
    ep.dev_loss = dev_loss;
    ep.lr = adam.lr;
    if (log_stream) write_log_entry(*log_stream, ep);
    result.log.push_back(ep);
    result.epochs = epoch;
    if (config.stage == Stage::dc || dev_loss < best_dev) {
      best_dev = dev_loss;
      result.best_epoch = epoch;
      if (config.stage != Stage::dc) best_params = model.params;
    }

    const double rel = (prev_dev - dev_loss) / std::max(std::abs(prev_dev), 1e-300);
    adam.lr = next_learning_rate(adam.lr, prev_dev, dev_loss, config.lr_decay);
    prev_dev = dev_loss;
    if (config.stage != Stage::dc && epoch >= config.min_epochs && rel < config.early_stop_rel) break;
  }

  if (best_params) model.params = std::move(*best_params);
  result.final_dev_loss = best_dev;

  Checkpoint& ck = result.checkpoint;
  ck.stage = config.stage;
  if (init) {
    ck.lineage = init->lineage;
    ck.lineage.push_back(std::string(to_string(init->stage)));
  }
  ck.model = std::move(model);
  ck.optimizer = std::move(adam);
  ck.norm = norm;
  ck.stft = stft_cfg;
  ck.sample_rate = sample_rate;
  ck.meta_json = to_json_string(config);
  return result;
}

namespace {

Spectrogram mixture_spectrogram(const Checkpoint& ckpt, const AudioBuffer& mixture) {
  require(mixture.sample_rate == ckpt.sample_rate, ErrorCode::WavFormat,
          "mixture sample rate " + std::to_string(mixture.sample_rate) + " differs from model rate " +
              std::to_string(ckpt.sample_rate));
  return stft(mixture, ckpt.stft);
}

}  // namespace

std::vector<AudioBuffer> separate(const Checkpoint& ckpt, const AudioBuffer& mixture) {
  require(ckpt.stage != Stage::dc, ErrorCode::UnsupportedStage,
          "dc checkpoints have no mask head; use the deep clustering baseline");
  require(ckpt.model.separation.has_value(), ErrorCode::UnsupportedStage, "checkpoint has no separation net");
  const Spectrogram mix = mixture_spectrogram(ckpt, mixture);
  const MaskSet masks = nn::forward_masks(ckpt.model, normalize_magnitude(mix.magnitude, ckpt.norm));
  return reconstruct(mix, masks);
}

std::vector<AudioBuffer> separate_dc_baseline(const Checkpoint& ckpt, const AudioBuffer& mixture,
                                              std::uint64_t seed) {
  require(ckpt.stage == Stage::dc, ErrorCode::UnsupportedStage, "deep clustering inference needs a dc checkpoint");
  const Spectrogram mix = mixture_spectrogram(ckpt, mixture);
  const MatrixXd v = nn::forward_embed(ckpt.model, normalize_magnitude(mix.magnitude, ckpt.norm));
  const KMeansResult km = kmeans(v, ckpt.model.config.num_sources, seed);
  return reconstruct(mix, masks_from_assignments(km, mix.frames(), mix.bins()));
}

std::vector<std::filesystem::path> separate_file(const Checkpoint& ckpt, const std::filesystem::path& mixture_wav,
                                                 const std::filesystem::path& out_dir, bool dc_baseline) {
  const AudioBuffer mixture = read_wav(mixture_wav, ckpt.sample_rate);
  const auto estimates = dc_baseline ? separate_dc_baseline(ckpt, mixture) : separate(ckpt, mixture);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> out;
  for (std::size_t s = 0; s < estimates.size(); ++s) {
    out.push_back(out_dir / (mixture_wav.stem().string() + "_s" + std::to_string(s + 1) + ".wav"));
    write_wav(out.back(), estimates[s]);
  }
  return out;
}

Estimator ipsm_oracle_estimator(const StftConfig& stft_cfg) {
  return [stft_cfg](const Utterance& utt) {
    const Spectrogram mix = stft(utt.mixture, stft_cfg);
    std::vector<Spectrogram> refs;
    for (const auto& r : utt.references) refs.push_back(stft(r, stft_cfg));
    return reconstruct(mix, ipsm(refs, mix));
  };
}

Estimator mixture_estimator(int num_sources) {
  return [num_sources](const Utterance& utt) { return std::vector<AudioBuffer>(num_sources, utt.mixture); };
}

Estimator checkpoint_estimator(const Checkpoint& ckpt) {
  if (ckpt.stage == Stage::dc) return dc_kmeans_estimator(ckpt);
  return [&ckpt](const Utterance& utt) { return separate(ckpt, utt.mixture); };
}

Estimator dc_kmeans_estimator(const Checkpoint& ckpt, std::uint64_t seed) {
  return [&ckpt, seed](const Utterance& utt) { return separate_dc_baseline(ckpt, utt.mixture, seed); };
}

const SystemResult* ExperimentSeedResult::find(const std::string& system, double lambda) const {
  for (const auto& s : systems)
    if (s.system == system && (lambda < 0.0 || std::abs(s.lambda - lambda) < 1e-12)) return &s;
  return nullptr;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Manifest& manifest,
                                const std::filesystem::path& out_dir, std::ostream* progress, int sample_rate) {
  require(!config.seeds.empty(), ErrorCode::InvalidConfig, "experiment needs at least one seed");
  keep_large_allocations();
  require(std::any_of(config.lambdas.begin(), config.lambdas.end(),
                      [&](double l) { return std::abs(l - config.dl_lambda) < 1e-12; }),
          ErrorCode::InvalidConfig, "dl_lambda must be one of the swept lambdas");
  const std::vector<std::string> splits = {"dev", "test"};
  const std::vector<AssignMode> modes = {AssignMode::optimal, AssignMode::default_order};
  const StftConfig stft_cfg = {};
  ExperimentResult result;

  for (const std::uint64_t seed : config.seeds) {
    ExperimentSeedResult sr;
    sr.seed = seed;
    const auto seed_dir = out_dir.empty() ? out_dir : out_dir / ("seed_" + std::to_string(seed));
    if (!seed_dir.empty()) std::filesystem::create_directories(seed_dir);

    auto run = [&](TrainConfig tc, const std::optional<Checkpoint>& init, const std::string& name) {
      tc.seed = seed;
      std::ofstream log_file;
      if (!seed_dir.empty()) log_file.open(seed_dir / (name + ".log.jsonl"));
      if (progress) *progress << "[seed " << seed << "] training " << name << std::endl;
      TrainResult r = train_stage(tc, manifest, init, log_file.is_open() ? &log_file : nullptr, sample_rate, stft_cfg);
      if (!seed_dir.empty()) save_checkpoint(seed_dir / (name + ".ckpt"), r.checkpoint);
      if (progress)
        *progress << "[seed " << seed << "] " << name << ": " << r.epochs << " epochs (best " << r.best_epoch
                  << "), dev loss " << r.initial_dev_loss << " -> " << r.final_dev_loss << std::endl;
      return r;
    };
    auto evaluate = [&](const std::string& system, double lambda, const Estimator& est, std::uint64_t hash) {
      SystemResult s{system, lambda, seed, corpus_report(manifest, est, splits, modes, sample_rate), hash};
      if (progress) {
        const auto* oc = s.report.find("test", AssignMode::optimal);
        *progress << "[seed " << seed << "] " << system << (lambda >= 0 ? " lambda=" + std::to_string(lambda) : "")
                  << ": OC optimal SDR " << (oc ? oc->sdr : 0.0) << std::endl;
      }
      sr.systems.push_back(std::move(s));
    };

    // uPIT baseline: same recurrent depth, fed magnitudes.
    TrainConfig base = config.train;
    base.stage = Stage::joint;
    base.model.kind = nn::ModelKind::baseline;
    if (config.joint_max_epochs > 0) base.max_epochs = config.joint_max_epochs;
    const TrainResult baseline = run(base, std::nullopt, "upit_baseline");
    evaluate("uPIT", -1.0, checkpoint_estimator(baseline.checkpoint), checkpoint_hash(baseline.checkpoint));

    TrainConfig dc_cfg = config.train;
    dc_cfg.stage = Stage::dc;
    dc_cfg.model.kind = nn::ModelKind::embedding;
    const TrainResult dc = run(dc_cfg, std::nullopt, "dc");
    sr.dc_initial_dev = dc.initial_dev_loss;
    sr.dc_final_dev = dc.final_dev_loss;
    if (config.include_dc_kmeans)
      evaluate("DC+kmeans", -1.0, dc_kmeans_estimator(dc.checkpoint), checkpoint_hash(dc.checkpoint));

    std::optional<Checkpoint> dl_init;
    for (double lambda : config.lambdas) {
      TrainConfig jc = dc_cfg;
      jc.stage = Stage::joint;
      jc.lambda = lambda;
      if (config.joint_max_epochs > 0) jc.max_epochs = config.joint_max_epochs;
      char name[32];
      std::snprintf(name, sizeof(name), "joint_l%.3g", lambda);
      TrainResult joint = run(jc, dc.checkpoint, name);
      evaluate("uPIT+DEF", lambda, checkpoint_estimator(joint.checkpoint), checkpoint_hash(joint.checkpoint));
      if (std::abs(lambda - config.dl_lambda) < 1e-12) dl_init = std::move(joint.checkpoint);
    }

    TrainConfig dl_cfg = dc_cfg;
    dl_cfg.stage = Stage::dl;
    dl_cfg.lambda = config.dl_lambda;
    if (config.dl_max_epochs > 0) dl_cfg.max_epochs = config.dl_max_epochs;
    if (config.dl_min_epochs >= 0) dl_cfg.min_epochs = config.dl_min_epochs;
    const TrainResult dl = run(dl_cfg, dl_init, "dl");
    evaluate("uPIT+DEF+DL", config.dl_lambda, checkpoint_estimator(dl.checkpoint), checkpoint_hash(dl.checkpoint));

    // Permutation-cost gap on dev before and after DL fine-tuning, both under the DL objective's terms.
    const Dataset dev = prepare_split(manifest, "dev", stft_cfg, dl_init->norm, sample_rate,
                                      config.train.truncate_targets);
    Objective gap_obj{Stage::dl, config.dl_lambda, config.train.alpha, config.train.normalize_dc};
    sr.joint_dev_gap = evaluate_objective(dl_init->model, dev, gap_obj).separation_gap;
    sr.dl_dev_gap = evaluate_objective(dl.checkpoint.model, dev, gap_obj).separation_gap;
    if (progress)
      *progress << "[seed " << seed << "] dev permutation gap joint " << sr.joint_dev_gap << " -> dl "
                << sr.dl_dev_gap << std::endl;
    result.seeds.push_back(std::move(sr));
  }
  return result;
}

namespace {

struct RowKey {
  std::string system;
  double lambda;
  bool operator<(const RowKey& o) const { return std::tie(system, lambda) < std::tie(o.system, o.lambda); }
};

}  // namespace

void write_experiment_table(std::ostream& os, const ExperimentResult& result) {
  // Preserve first-seen row order, average over seeds.
  std::vector<RowKey> order;
  std::map<RowKey, std::vector<const SystemResult*>> rows;
  for (const auto& seed : result.seeds) {
    for (const auto& s : seed.systems) {
      RowKey key{s.system, s.lambda};
      if (!rows.count(key)) order.push_back(key);
      rows[key].push_back(&s);
    }
  }
  os << "# seeds: " << result.seeds.size() << "; CC = dev (closed), OC = test (open)\n";
  os << std::left << std::setw(14) << "method" << std::setw(7) << "lambda";
  for (const char* mode : {"Opt", "Def"})
    for (const char* metric : {"SDR", "SIR", "SAR"})
      for (const char* cond : {"CC", "OC"})
        os << std::right << std::setw(9) << (std::string(mode) + "." + metric + "." + cond);
  os << '\n' << std::fixed << std::setprecision(2);
  for (const auto& key : order) {
    os << std::left << std::setw(14) << key.system << std::setw(7)
       << (key.lambda < 0 ? std::string("-") : [&] {
            char b[16];
            std::snprintf(b, sizeof(b), "%.2f", key.lambda);
            return std::string(b);
          }());
    for (AssignMode mode : {AssignMode::optimal, AssignMode::default_order}) {
      for (int metric = 0; metric < 3; ++metric) {
        for (const char* split : {"dev", "test"}) {
          double acc = 0.0;
          for (const SystemResult* s : rows[key]) {
            const SplitSummary* sum = s->report.find(split, mode);
            acc += metric == 0 ? sum->sdr : metric == 1 ? sum->sir : sum->sar;
          }
          os << std::right << std::setw(9) << acc / static_cast<double>(rows[key].size());
        }
      }
    }
    os << '\n';
  }
  os.unsetf(std::ios::fixed);
}

void write_experiment_jsonl(std::ostream& os, const ExperimentResult& result) {
  for (const auto& seed : result.seeds) {
    for (const auto& s : seed.systems) {
      for (const auto& sum : s.report.summaries) {
        nlohmann::ordered_json j;
        j["seed"] = seed.seed;
        j["system"] = s.system;
        j["lambda"] = s.lambda;
        j["split"] = sum.split;
        j["mode"] = std::string(to_string(sum.mode));
        j["SDR"] = sum.sdr;
        j["SIR"] = sum.sir;
        j["SAR"] = sum.sar;
        j["SDRi"] = sum.sdr_improvement;
        j["n"] = sum.n;
        j["checkpoint_hash"] = hex64(s.checkpoint_hash);
        os << j.dump() << '\n';
      }
    }
    nlohmann::ordered_json g;
    g["seed"] = seed.seed;
    g["joint_dev_gap"] = seed.joint_dev_gap;
    g["dl_dev_gap"] = seed.dl_dev_gap;
    g["dc_initial_dev"] = seed.dc_initial_dev;
    g["dc_final_dev"] = seed.dc_final_dev;
    os << g.dump() << '\n';
  }
}

}  // namespace sepkit
