#include "sepkit/cli.hpp"

#include "sepkit/config.hpp"
#include "sepkit/pipeline.hpp"
#include "sepkit/wav.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace sepkit {
namespace {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "sepkit_out";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "JSON config file (defaults to the desk preset)");
  app->add_option("--set", o.overrides, "override a config field, section.key=value");
  app->add_option("--out", o.out_dir, "output directory")->capture_default_str();
  app->add_option("--seed", o.seed, "seed; wins over SEPKIT_SEED and the config");
  app->add_option("--jobs", o.jobs, "upper bound on worker threads")->check(CLI::PositiveNumber);
  app->add_flag("-v,--verbose", "progress output");
}

std::optional<std::uint64_t> resolve_seed(const CommonOptions& o) {
  if (o.seed) return o.seed;
  if (const char* env = std::getenv("SEPKIT_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      require(used == std::string(env).size(), ErrorCode::InvalidConfig, "");
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, std::string("SEPKIT_SEED is not an unsigned integer: ") + env);
    }
  }
  return std::nullopt;
}

SepkitConfig resolve_config(const CommonOptions& o, const std::string& verb, std::uint64_t& seed_out) {
  SepkitConfig c = o.config_path.empty() ? parse_config("", o.overrides) : load_config(o.config_path, o.overrides);
  const auto seed = resolve_seed(o);
  if (seed) {
    if (verb == "gen-data") {
      c.corpus.master_seed = *seed;
    } else if (verb == "experiment") {
      // Keep the number of seeds, shift their origin.
      for (std::size_t i = 0; i < c.experiment.seeds.size(); ++i) c.experiment.seeds[i] = *seed + i;
    }
    c.train().seed = *seed;
  }
  seed_out = verb == "gen-data" ? c.corpus.master_seed : c.train().seed;
  return c;
}

void write_run_meta(const fs::path& out_dir, const std::string& verb, const SepkitConfig& config,
                    std::uint64_t seed, const std::vector<std::string>& args) {
  fs::create_directories(out_dir);
  const std::string cfg = to_json_string(config);
  nlohmann::ordered_json j;
  j["verb"] = verb;
  j["version"] = kVersion;
  j["seed"] = seed;
  j["config_hash"] = hex64(fnv1a(cfg.data(), cfg.size()));
  j["args"] = args;
  j["config"] = nlohmann::ordered_json::parse(cfg);
  std::ofstream os(out_dir / "run.meta");
  os << j.dump(2) << '\n';
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write run.meta");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + path.string());
  return os;
}

// Averages summary-like JSONL records (any line with an SDR field) per system, lambda, split and mode.
void render_report(std::istream& in, std::ostream& out) {
  struct Acc {
    double sdr = 0, sir = 0, sar = 0, sdri = 0;
    int count = 0;
  };
  using Key = std::tuple<std::string, double, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, Acc> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::ManifestError, "report input line " + std::to_string(lineno) + " is not JSON");
    }
    if (!j.contains("SDR")) continue;
    Key key{j.value("system", std::string("-")), j.value("lambda", -1.0), j.value("split", std::string("?")),
            j.value("mode", std::string("?"))};
    if (!rows.count(key)) order.push_back(key);
    auto& a = rows[key];
    a.sdr += j.value("SDR", 0.0);
    a.sir += j.value("SIR", 0.0);
    a.sar += j.value("SAR", 0.0);
    a.sdri += j.value("SDRi", 0.0);
    a.count += 1;
  }
  require(!rows.empty(), ErrorCode::ManifestError, "report input holds no summary records");
  out << std::left << std::setw(14) << "system" << std::setw(8) << "lambda" << std::setw(7) << "split"
      << std::setw(9) << "mode" << std::right << std::setw(9) << "SDR" << std::setw(9) << "SIR" << std::setw(9)
      << "SAR" << std::setw(9) << "SDRi" << std::setw(6) << "runs" << '\n'
      << std::fixed << std::setprecision(2);
  for (const auto& key : order) {
    const auto& a = rows[key];
    const double n = a.count;
    std::ostringstream lam;
    if (std::get<1>(key) < 0) lam << "-";
    else lam << std::fixed << std::setprecision(2) << std::get<1>(key);
    out << std::left << std::setw(14) << std::get<0>(key) << std::setw(8) << lam.str() << std::setw(7)
        << std::get<2>(key) << std::setw(9) << std::get<3>(key) << std::right << std::setw(9) << a.sdr / n
        << std::setw(9) << a.sir / n << std::setw(9) << a.sar / n << std::setw(9) << a.sdri / n << std::setw(6)
        << a.count << '\n';
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sepkit: monaural speech separation with deep embedding features"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonOptions common;
  std::string stage_name, manifest_path, checkpoint_path, init_path, mode_name = "optimal", oracle, report_input;
  std::vector<std::string> inputs;
  std::vector<std::string> splits = {"dev", "test"};
  bool dc_kmeans = false;

  auto* gen = app.add_subcommand("gen-data", "synthesize a two-talker corpus and its manifest");
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "train one stage");
  add_common(train, common);
  train->add_option("--stage", stage_name, "dc, joint or dl")
      ->required()
      ->check(CLI::IsMember({"dc", "joint", "dl"}));
  train->add_option("--manifest", manifest_path, "corpus manifest")->required()->check(CLI::ExistingFile);
  train->add_option("--init", init_path, "checkpoint of the previous stage")->check(CLI::ExistingFile);

  auto* sep = app.add_subcommand("separate", "separate mixture WAV files");
  add_common(sep, common);
  sep->add_option("--checkpoint", checkpoint_path)->required()->check(CLI::ExistingFile);
  sep->add_option("--input", inputs, "mixture WAV files")->required()->check(CLI::ExistingFile);
  sep->add_flag("--dc-kmeans", dc_kmeans, "cluster embeddings of a dc checkpoint");

  auto* eval = app.add_subcommand("evaluate", "score a checkpoint or an oracle on a manifest");
  add_common(eval, common);
  eval->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  auto* ck_opt = eval->add_option("--checkpoint", checkpoint_path)->check(CLI::ExistingFile);
  eval->add_option("--oracle", oracle, "score an oracle instead of a model")
      ->check(CLI::IsMember({"ipsm", "mixture"}))
      ->excludes(ck_opt);
  eval->add_option("--mode", mode_name, "assignment mode")
      ->check(CLI::IsMember({"optimal", "default", "both"}))
      ->capture_default_str();
  eval->add_option("--split", splits, "splits to score")->capture_default_str();

  auto* exp = app.add_subcommand("experiment", "baseline, dc, lambda sweep and dl for every seed");
  add_common(exp, common);
  exp->add_option("--manifest", manifest_path, "existing corpus; generated under --out when omitted")
      ->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report", "aggregate JSONL results into a table");
  add_common(rep, common);
  rep->add_option("--input", report_input, "experiment.jsonl or report.jsonl")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const fs::path out_dir = common.out_dir;
    CLI::App* sub = app.get_subcommands().front();
    const std::string verb = sub->get_name();
    std::uint64_t seed = 0;
    const SepkitConfig config = resolve_config(common, verb, seed);
    std::ostream* progress = sub->count("--verbose") > 0 ? &err : nullptr;
    Eigen::setNbThreads(common.jobs);
    write_run_meta(out_dir, verb, config, seed, args);

    if (verb == "gen-data") {
      const Manifest m = build_corpus(config.corpus, out_dir);
      out << "wrote " << m.records.size() << " utterances to " << (out_dir / "manifest.jsonl").string() << '\n';
    } else if (verb == "train") {
      TrainConfig tc = config.train();
      tc.stage = stage_from_string(stage_name);
      const Manifest manifest = read_manifest(manifest_path);
      std::optional<Checkpoint> init;
      if (!init_path.empty()) init = load_checkpoint(init_path);
      auto log = open_out(out_dir / "train_log.jsonl");
      const TrainResult r = train_stage(tc, manifest, init, &log, config.sample_rate, config.stft);
      const fs::path ck = out_dir / (stage_name + ".ckpt");
      save_checkpoint(ck, r.checkpoint);
      out << "stage " << stage_name << ": " << r.epochs << " epochs (best " << r.best_epoch << "), dev loss "
          << r.initial_dev_loss << " -> " << r.final_dev_loss << "\ncheckpoint " << ck.string() << " hash "
          << hex64(checkpoint_hash(r.checkpoint)) << '\n';
    } else if (verb == "separate") {
      const Checkpoint ck = load_checkpoint(checkpoint_path);
      for (const auto& in : inputs)
        for (const auto& p : separate_file(ck, in, out_dir, dc_kmeans)) out << p.string() << '\n';
    } else if (verb == "evaluate") {
      const Manifest manifest = read_manifest(manifest_path);
      std::optional<Checkpoint> ck;
      Estimator est;
      std::string system;
      if (!checkpoint_path.empty()) {
        ck = load_checkpoint(checkpoint_path);
        est = checkpoint_estimator(*ck);
        system = std::string(to_string(ck->stage));
      } else if (oracle == "mixture") {
        est = mixture_estimator(config.train().model.num_sources);
        system = "mixture";
      } else if (oracle == "ipsm") {
        est = ipsm_oracle_estimator(config.stft);
        system = "ipsm";
      } else {
        throw Error(ErrorCode::InvalidConfig, "evaluate needs --checkpoint or --oracle");
      }
      std::vector<AssignMode> modes;
      if (mode_name == "both") modes = {AssignMode::optimal, AssignMode::default_order};
      else modes = {assign_mode_from_string(mode_name)};
      const CorpusReport report = corpus_report(manifest, est, splits, modes, config.sample_rate);
      auto txt = open_out(out_dir / "report.txt");
      write_report_table(txt, report, system);
      auto jsonl = open_out(out_dir / "report.jsonl");
      write_report_jsonl(jsonl, report, system);
      write_report_table(out, report, system);
    } else if (verb == "experiment") {
      fs::path mpath = manifest_path;
      if (mpath.empty()) {
        if (progress) *progress << "generating corpus under " << (out_dir / "data").string() << std::endl;
        build_corpus(config.corpus, out_dir / "data");
        mpath = out_dir / "data" / "manifest.jsonl";
      }
      const Manifest manifest = read_manifest(mpath);
      const ExperimentResult r = run_experiment(config.experiment, manifest, out_dir, progress, config.sample_rate);
      auto txt = open_out(out_dir / "experiment.txt");
      write_experiment_table(txt, r);
      auto jsonl = open_out(out_dir / "experiment.jsonl");
      write_experiment_jsonl(jsonl, r);
      write_experiment_table(out, r);
    } else if (verb == "report") {
      std::ifstream in(report_input);
      require(static_cast<bool>(in), ErrorCode::IoError, "cannot read " + report_input);
      std::ostringstream table;
      render_report(in, table);
      auto txt = open_out(out_dir / "report.txt");
      txt << table.str();
      out << table.str();
    }
    return 0;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sepkit
