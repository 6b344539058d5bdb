// Acceptance checks: one PASS/FAIL line per criterion.

#include "sepkit/config.hpp"
#include "sepkit/pipeline.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace sepkit;
using namespace sepkit::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c, d);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Gradient suite

using Builder = std::function<nn::Var<double>(nn::Graph<double>&, const std::vector<nn::Var<double>>&)>;

double max_gradient_error(nn::ParameterSet<double>& ps, const Builder& build) {
  nn::Graph<double> g;
  std::vector<nn::Var<double>> leaves;
  for (int i = 0; i < ps.size(); ++i) leaves.push_back(g.parameter(ps, i));
  g.backward(build(g, leaves));
  const auto analytic = g.parameter_gradients(ps);
  auto value = [&] {
    nn::Graph<double> h(false);
    std::vector<nn::Var<double>> l;
    for (int i = 0; i < ps.size(); ++i) l.push_back(h.parameter(ps, i));
    return build(h, l).value()(0, 0);
  };
  double worst = 0.0;
  for (int i = 0; i < ps.size(); ++i)
    worst = std::max(worst, relative_error(analytic[i], central_difference(ps.values[i], value)));
  return worst;
}

void gradient_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const int instances = 20;
  std::map<std::string, double> worst;
  auto record = [&](const std::string& k, double e) { worst[k] = std::max(worst[k], e); };

  for (int n = 0; n < instances; ++n) {
    const int t = 2 + n % 3, f = 3 + n % 2, d = 2 + n % 3, s = 2 + n % 2;
    const MatrixXd b = random_one_hot(rng, t * f, s);
    const MatrixXd mag = random_matrix(rng, t, f, 0.1, 2.0);
    std::vector<MatrixXd> targets;
    for (int i = 0; i < s; ++i) targets.push_back(random_matrix(rng, t, f, -0.5, 1.5));
    {
      nn::ParameterSet<double> ps;
      ps.add("v", random_matrix(rng, t, f * d));
      record("dc_loss", max_gradient_error(ps, [&](nn::Graph<double>&, const auto& v) {
               return nn::dc_loss(v[0], d, b);
             }));
    }
    {
      nn::ParameterSet<double> ps;
      ps.add("m", random_matrix(rng, t, s * f, 0.0, 1.5));
      record("psa_cost", max_gradient_error(ps, [&](nn::Graph<double>&, const auto& v) {
               return nn::permutation_objective(v[0], mag, targets, 0.1, false);
             }));
    }
    {
      nn::ParameterSet<double> ps;
      ps.add("v", random_matrix(rng, t, f * d));
      ps.add("m", random_matrix(rng, t, s * f, 0.0, 1.5));
      const bool use_dl = n % 2 == 0;
      record("joint_loss", max_gradient_error(ps, [&](nn::Graph<double>&, const auto& v) {
               return nn::scale(nn::dc_loss(v[0], d, b), 0.05) +
                      nn::scale(nn::permutation_objective(v[1], mag, targets, 0.1, use_dl), 0.95);
             }));
    }
    {
      nn::ParameterSet<double> ps;
      ps.add("x", random_matrix(rng, t, 3));
      ps.add("w", random_matrix(rng, 3, 4));
      ps.add("b", random_matrix(rng, 1, 4));
      ps.add("probe", random_matrix(rng, t, 4));
      record("linear", max_gradient_error(ps, [](nn::Graph<double>&, const auto& v) {
               return nn::sum(nn::hadamard(nn::linear(v[0], v[1], v[2]), v[3]));
             }));
      record("tanh", max_gradient_error(ps, [](nn::Graph<double>&, const auto& v) {
               return nn::sum(nn::hadamard(nn::tanh(nn::linear(v[0], v[1], v[2])), v[3]));
             }));
      record("relu", max_gradient_error(ps, [](nn::Graph<double>&, const auto& v) {
               return nn::sum(nn::hadamard(nn::relu(nn::linear(v[0], v[1], v[2])), v[3]));
             }));
      record("dropout-off", max_gradient_error(ps, [&](nn::Graph<double>&, const auto& v) {
               std::mt19937_64 r(0);
               return nn::squared_norm(nn::dropout(nn::linear(v[0], v[1], v[2]), 0.5, false, r));
             }));
    }
    {
      nn::ParameterSet<double> ps;
      const int h = 2;
      ps.add("x", random_matrix(rng, t + 1, 3));
      ps.add("wx", random_matrix(rng, 3, 4 * h));
      ps.add("wh", random_matrix(rng, h, 4 * h));
      ps.add("b", random_matrix(rng, 1, 4 * h));
      ps.add("probe", random_matrix(rng, t + 1, h));
      const bool reverse = n % 2 == 1;
      record("lstm", max_gradient_error(ps, [reverse](nn::Graph<double>&, const auto& v) {
               return nn::sum(nn::hadamard(nn::lstm(v[0], v[1], v[2], v[3], reverse), v[4]));
             }));
    }
    {
      // Full networks: embedding BiLSTM stack, separation BiLSTM, heads, joint objective.
      nn::ModelConfig cfg;
      cfg.kind = n % 4 == 3 ? nn::ModelKind::baseline : nn::ModelKind::embedding;
      cfg.bins = f;
      cfg.hidden = 2;
      cfg.embed_dim = d;
      cfg.num_sources = s;
      cfg.baseline_layers = 2;
      auto model = nn::init_model(cfg, true, 500 + n);
      const MatrixXd in = random_matrix(rng, t, f);
      auto objective = [&](nn::Graph<double>& g) {
        std::mt19937_64 unused(0);
        const auto out = nn::forward(g, model, in, nn::Mode::eval, unused);
        auto sep = nn::permutation_objective(*out.masks, mag, targets, 0.1, true);
        if (!out.embeddings) return sep;
        return nn::scale(nn::dc_loss(*out.embeddings, d, b), 0.05) + nn::scale(sep, 0.95);
      };
      nn::Graph<double> g;
      g.backward(objective(g));
      const auto analytic = g.parameter_gradients(model.params);
      for (int i = 0; i < model.params.size(); ++i) {
        const MatrixXd numeric = central_difference(model.params.values[i], [&] {
          nn::Graph<double> h(false);
          return objective(h).value()(0, 0);
        });
        record("network", relative_error(analytic[i], numeric));
      }
    }
  }
  const double secs = seconds_since(t0);
  double overall = 0.0;
  std::ostringstream detail;
  for (const auto& [k, v] : worst) {
    overall = std::max(overall, v);
    detail << k << "=" << fmt("%.1e", v) << " ";
  }
  detail << fmt("over %g instances each, %.1f s", instances, secs);
  verdict("gradient-suite", overall < 1e-4 && secs < 60.0, detail.str());
}

// ---------------------------------------------------------------------------

void dc_oracle() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    std::uniform_int_distribution<int> tf(2, 64), dd(1, 8), cc(2, 3);
    const int rows = tf(rng);
    const MatrixXd v = random_matrix(rng, rows, dd(rng));
    const MatrixXd b = random_one_hot(rng, rows, cc(rng));
    const double dense = dense_dc_loss(v, b);
    worst = std::max(worst, std::abs(dc_loss(v, b, false) - dense) / dense);
  }
  verdict("dc-loss-oracle", worst <= 1e-9, fmt("max relative difference %.2e over 50 instances", worst));
}

void permutation_oracle() {
  std::mt19937_64 rng(303);
  int matches = 0, invariant = 0;
  for (int n = 0; n < 100; ++n) {
    const int s = 2 + n % 2;
    const MatrixXd pairwise = random_matrix(rng, s, s, 0.0, 1.0);
    const auto table = permutation_table(pairwise);
    const auto brute = brute_force_perm(pairwise);
    matches += table.perms[table.chosen] == brute.perm && table.chosen_cost() == brute.cost;

    std::vector<int> sigma(s);
    std::iota(sigma.begin(), sigma.end(), 0);
    std::shuffle(sigma.begin(), sigma.end(), rng);
    MatrixXd relabeled(s, s);
    for (int i = 0; i < s; ++i) relabeled.row(i) = pairwise.row(sigma[i]);
    const auto t2 = permutation_table(relabeled);
    bool ok = std::abs(t2.chosen_cost() - table.chosen_cost()) <= 1e-14;
    for (int i = 0; i < s; ++i) ok = ok && t2.perms[t2.chosen][i] == table.perms[table.chosen][sigma[i]];
    invariant += ok;
  }
  verdict("permutation-oracle", matches == 100 && invariant == 100,
          fmt("%g/100 match brute force, %g/100 relabeling-invariant", matches, invariant));
}

void degeneracy(const Manifest& manifest) {
  std::mt19937_64 rng(404);
  bool alpha_ok = true, lambda_ok = true;
  double worst_ipsm = 0.0;
  for (int n = 0; n < 50; ++n) {
    const int s = 2 + n % 2;
    const auto table = permutation_table(random_matrix(rng, s, s, 0.0, 3.0));
    alpha_ok = alpha_ok && dl_loss(table, 0.0) == table.chosen_cost();
    alpha_ok = alpha_ok && joint_loss(0.7, table, 0.0, 0.0, true).total == table.chosen_cost();
    const double j_dc = random_matrix(rng, 1, 1, 0.0, 5.0)(0, 0);
    lambda_ok = lambda_ok && joint_loss(j_dc, table, 1.0, 0.1, false).total == j_dc;
    lambda_ok = lambda_ok && joint_loss(j_dc, table, 1.0, 0.1, true).total == j_dc;
  }
  int count = 0;
  for (const auto* rec : manifest.split("test")) {
    if (count++ >= 20) break;
    const auto u = load_utterance(*rec, 8000);
    const auto y = stft(u.mixture);
    std::vector<Spectrogram> src;
    for (const auto& r : u.references) src.push_back(stft(r));
    worst_ipsm = std::max(worst_ipsm, psa_cost(ipsm(src, y), y, src, {0, 1}));
  }
  verdict("degeneracy-identities", alpha_ok && lambda_ok && worst_ipsm < 1e-10,
          std::string("alpha=0 -> phi* ") + (alpha_ok ? "exact" : "MISMATCH") + ", lambda=1 -> J_DC " +
              (lambda_ok ? "exact" : "MISMATCH") + fmt(", max psa_cost(IPSM) %.2e", worst_ipsm));
}

void stft_roundtrip() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  int bins = 0;
  for (int n = 0; n < 20; ++n) {
    std::uniform_int_distribution<int> len(4 * 256, 16000);
    const AudioBuffer a{random_matrix(rng, len(rng), 1), 8000};
    const auto spec = stft(a);
    bins = static_cast<int>(spec.bins());
    const auto y = istft(spec);
    const Eigen::Index lo = 256, hi = a.size() - 256;
    worst = std::max(worst, (a.samples.segment(lo, hi - lo) - y.samples.segment(lo, hi - lo)).norm() /
                                a.samples.segment(lo, hi - lo).norm());
  }
  verdict("stft-roundtrip", worst < 1e-3 && bins == 129,
          fmt("max interior relative error %.2e over 20 signals, %g bins", worst, bins));
}

std::string report_bytes(const CorpusReport& r) {
  std::ostringstream os;
  write_report_jsonl(os, r);
  return os.str();
}

void oracle_separation(const Manifest& manifest, std::string& oracle_jsonl) {
  const auto t0 = Clock::now();
  const auto ipsm_rep = corpus_report(manifest, ipsm_oracle_estimator(), {"test"}, {AssignMode::optimal});
  const auto mix_rep = corpus_report(manifest, mixture_estimator(2), {"test"}, {AssignMode::optimal});
  const double secs = seconds_since(t0);
  oracle_jsonl = report_bytes(ipsm_rep);
  int beats = 0;
  const auto a = ipsm_rep.select("test", AssignMode::optimal);
  const auto b = mix_rep.select("test", AssignMode::optimal);
  for (std::size_t i = 0; i < a.size(); ++i) beats += a[i]->score.mean_sdr() > b[i]->score.mean_sdr();
  const double mean = ipsm_rep.find("test", AssignMode::optimal)->sdr;
  verdict("oracle-separation", mean >= 10.0 && beats == static_cast<int>(a.size()) && secs < 120.0,
          fmt("IPSM mean SDR %.2f dB, beats mixture on %g/%g utterances, %.1f s", mean, beats, a.size(), secs));
}

// ---------------------------------------------------------------------------
// Experiment criteria

double oc_sdr(const ExperimentSeedResult& s, const std::string& system, double lambda) {
  const auto* r = s.find(system, lambda);
  return r ? r->report.find("test", AssignMode::optimal)->sdr : std::nan("");
}

void experiment_criteria(const ExperimentResult& r, double secs) {
  std::vector<double> def, base, delta, dl_delta;
  bool gaps = true;
  std::ostringstream gap_detail;
  for (const auto& s : r.seeds) {
    def.push_back(oc_sdr(s, "uPIT+DEF", 0.05));
    base.push_back(oc_sdr(s, "uPIT", -1.0));
    delta.push_back(def.back() - base.back());
    dl_delta.push_back(oc_sdr(s, "uPIT+DEF+DL", 0.05) - def.back());
    gaps = gaps && s.dl_dev_gap > s.joint_dev_gap;
    gap_detail << fmt(" %.4f->%.4f", s.joint_dev_gap, s.dl_dev_gap);
  }
  const double mean_def = std::accumulate(def.begin(), def.end(), 0.0) / def.size();
  const double mean_base = std::accumulate(base.begin(), base.end(), 0.0) / base.size();
  verdict("experiment-a-def-vs-baseline",
          mean_def >= mean_base - 0.3 && median(delta) > 0.0 && secs < 3600.0,
          fmt("OC optimal SDR uPIT+DEF %.2f vs uPIT %.2f dB, median-seed delta %+.2f dB, %.0f s total", mean_def,
              mean_base, median(delta), secs));

  int utts = 0, ok = 0;
  for (const auto& s : r.seeds)
    for (const auto& sys : s.systems)
      for (const char* split : {"dev", "test"}) {
        const auto opt = sys.report.select(split, AssignMode::optimal);
        const auto def_sel = sys.report.select(split, AssignMode::default_order);
        for (std::size_t i = 0; i < opt.size(); ++i) {
          ++utts;
          ok += opt[i]->score.mean_sdr() >= def_sel[i]->score.mean_sdr();
        }
      }
  verdict("experiment-b-optimal-ge-default", ok == utts,
          fmt("%g/%g scored utterances (all systems, seeds, splits)", ok, utts));

  verdict("experiment-c-dl", median(dl_delta) >= -0.3 && gaps,
          fmt("median-seed SDR change %+.2f dB; dev permutation-cost gap joint->dl:", median(dl_delta)) +
              gap_detail.str());

  std::ostringstream sweep;
  double lo = 1e9, hi = -1e9;
  for (double l : {0.01, 0.05, 0.1}) {
    double m = 0.0;
    for (const auto& s : r.seeds) m += oc_sdr(s, "uPIT+DEF", l);
    m /= r.seeds.size();
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    sweep << fmt(" lambda=%.2f: %.2f dB", l, m);
  }
  verdict("lambda-sweep", hi - lo <= 0.5, fmt("spread %.2f dB;", hi - lo) + sweep.str());
}

std::string experiment_bytes(const ExperimentResult& r) {
  std::ostringstream os;
  write_experiment_jsonl(os, r);
  for (const auto& s : r.seeds)
    for (const auto& sys : s.systems) write_report_jsonl(os, sys.report, sys.system);
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sepkit acceptance checks"};
  std::string work = "acceptance_work";
  std::vector<std::string> only;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--only", only, "run a subset: gradients, oracles, experiment, determinism");
  CLI11_PARSE(app, argc, argv);
  auto enabled = [&](const std::string& k) { return only.empty() || std::count(only.begin(), only.end(), k); };

  const std::filesystem::path dir = work;
  std::filesystem::create_directories(dir);
  const SepkitConfig cfg = default_config("desk");

  if (enabled("gradients")) gradient_suite();
  if (enabled("oracles")) {
    dc_oracle();
    permutation_oracle();
    stft_roundtrip();
  }

  Manifest manifest;
  if (enabled("oracles") || enabled("experiment") || enabled("determinism")) {
    manifest = build_corpus(cfg.corpus, dir / "data");
  }
  std::string oracle_jsonl;
  if (enabled("oracles") || enabled("determinism")) {
    degeneracy(manifest);
    oracle_separation(manifest, oracle_jsonl);
  }

  std::string experiment_jsonl;
  if (enabled("experiment")) {
    const auto t0 = Clock::now();
    const ExperimentResult r = run_experiment(cfg.experiment, manifest, dir / "experiment", &std::cerr);
    const double secs = seconds_since(t0);
    std::ofstream table(dir / "experiment" / "experiment.txt");
    write_experiment_table(table, r);
    write_experiment_table(std::cout, r);
    std::ofstream(dir / "experiment" / "experiment.jsonl") << experiment_bytes(r);
    experiment_criteria(r, secs);
  }

  if (enabled("determinism")) {
    // Regenerate the corpus and repeat the oracle report and a short experiment.
    const auto manifest2 = build_corpus(cfg.corpus, dir / "data_repeat");
    const auto rep = corpus_report(manifest2, ipsm_oracle_estimator(), {"test"}, {AssignMode::optimal});
    const bool oracle_same = fnv1a(oracle_jsonl.data(), oracle_jsonl.size()) ==
                             fnv1a(report_bytes(rep).data(), report_bytes(rep).size());
    ExperimentConfig short_cfg = cfg.experiment;
    short_cfg.seeds = {7};
    short_cfg.train.dc_epochs = 2;
    short_cfg.train.min_epochs = 1;
    short_cfg.train.max_epochs = 2;
    short_cfg.train.max_train_utts = 64;
    const std::string a = experiment_bytes(run_experiment(short_cfg, manifest, {}));
    const std::string b = experiment_bytes(run_experiment(short_cfg, manifest2, {}));
    const auto ha = fnv1a(a.data(), a.size()), hb = fnv1a(b.data(), b.size());
    verdict("determinism", oracle_same && ha == hb,
            std::string("oracle report ") + (oracle_same ? "hash-equal" : "DIFFERS") + ", repeated experiment " +
                hex64(ha) + (ha == hb ? " == " : " != ") + hex64(hb));
  }

  std::cout << (failures ? "acceptance: " + std::to_string(failures) + " failing" : std::string("acceptance: all passed"))
            << std::endl;
  return failures ? 1 : 0;
}
