#include "sepkit/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace sepkit {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Energies below this fraction of the estimate's energy count as exactly zero.
constexpr double kRelativeFloor = 1e-24;

double ratio_db(double num, double den, double scale) {
  const double floor = kRelativeFloor * scale;
  if (num <= floor) return -kInf;
  if (den <= floor) return kInf;
  return 10.0 * std::log10(num / den);
}

double mean_clamped(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += clamp_db(x);
  return s / static_cast<double>(v.size());
}

double json_db(double v) { return clamp_db(v); }

}  // namespace

Decomposition decompose(const AudioBuffer& estimate, const std::vector<AudioBuffer>& references, int target_index) {
  require(!references.empty(), ErrorCode::ShapeMismatch, "no references");
  require(target_index >= 0 && target_index < static_cast<int>(references.size()), ErrorCode::ShapeMismatch,
          "target index out of range");
  const Eigen::Index n = estimate.size();
  MatrixXd refs(n, static_cast<Eigen::Index>(references.size()));
  for (std::size_t j = 0; j < references.size(); ++j) {
    require(references[j].size() == n, ErrorCode::ShapeMismatch, "reference length differs from estimate");
    require(references[j].samples.squaredNorm() > 0.0, ErrorCode::DegenerateReference,
            "reference " + std::to_string(j) + " has zero energy");
    refs.col(static_cast<Eigen::Index>(j)) = references[j].samples;
  }
  const VectorXd& e = estimate.samples;
  const VectorXd& s = refs.col(target_index);

  Decomposition d;
  d.target = (s.dot(e) / s.squaredNorm()) * s;
  const MatrixXd gram = refs.transpose() * refs;
  const VectorXd coeffs = gram.completeOrthogonalDecomposition().solve(refs.transpose() * e);
  const VectorXd all = refs * coeffs;
  d.interference = all - d.target;
  d.artifact = e - all;
  return d;
}

SourceScore source_score(const Decomposition& d) {
  const double energy =
      (d.target + d.interference + d.artifact).squaredNorm() + std::numeric_limits<double>::min();
  const double st = d.target.squaredNorm();
  const double ei = d.interference.squaredNorm();
  const double ea = d.artifact.squaredNorm();
  SourceScore s;
  s.sdr = ratio_db(st, (d.interference + d.artifact).squaredNorm(), energy);
  s.sir = ratio_db(st, ei, energy);
  s.sar = ratio_db((d.target + d.interference).squaredNorm(), ea, energy);
  return s;
}

std::string_view to_string(AssignMode mode) { return mode == AssignMode::optimal ? "optimal" : "default"; }

AssignMode assign_mode_from_string(std::string_view s) {
  if (s == "optimal") return AssignMode::optimal;
  if (s == "default") return AssignMode::default_order;
  throw Error(ErrorCode::InvalidConfig, "unknown assignment mode " + std::string(s));
}

double SeparationScore::mean_sdr() const { return mean_clamped(sdr_db); }
double SeparationScore::mean_sir() const { return mean_clamped(sir_db); }
double SeparationScore::mean_sar() const { return mean_clamped(sar_db); }

SeparationScore PairwiseScores::select(AssignMode mode) const {
  const int s = static_cast<int>(table.size());
  Permutation best(s);
  for (int i = 0; i < s; ++i) best[i] = i;
  if (mode == AssignMode::optimal) {
    double best_mean = -kInf;
    for (const auto& perm : all_permutations(s)) {
      double m = 0.0;
      for (int i = 0; i < s; ++i) m += clamp_db(table[i][perm[i]].sdr);
      if (m > best_mean) {
        best_mean = m;
        best = perm;
      }
    }
  }
  SeparationScore out;
  out.mode = mode;
  out.assignment = best;
  for (int i = 0; i < s; ++i) {
    const auto& sc = table[i][best[i]];
    out.sdr_db.push_back(sc.sdr);
    out.sir_db.push_back(sc.sir);
    out.sar_db.push_back(sc.sar);
  }
  return out;
}

PairwiseScores pairwise_scores(const std::vector<AudioBuffer>& estimates, const std::vector<AudioBuffer>& references) {
  require(estimates.size() == references.size(), ErrorCode::ShapeMismatch, "estimate and reference counts differ");
  PairwiseScores out;
  for (const auto& est : estimates) {
    std::vector<SourceScore> row;
    for (std::size_t j = 0; j < references.size(); ++j) {
      require(est.size() == references[j].size(), ErrorCode::ShapeMismatch, "estimate length differs");
      row.push_back(source_score(decompose(est, references, static_cast<int>(j))));
    }
    out.table.push_back(std::move(row));
  }
  return out;
}

SeparationScore score(const std::vector<AudioBuffer>& estimates, const std::vector<AudioBuffer>& references,
                      AssignMode mode) {
  return pairwise_scores(estimates, references).select(mode);
}

double UtteranceScore::mean_sdr_improvement() const {
  double s = 0.0;
  for (std::size_t i = 0; i < score.sdr_db.size(); ++i)
    s += clamp_db(score.sdr_db[i]) - clamp_db(mixture_sdr_db.at(score.assignment[i]));
  return score.sdr_db.empty() ? 0.0 : s / static_cast<double>(score.sdr_db.size());
}

const SplitSummary* CorpusReport::find(const std::string& split, AssignMode mode) const {
  for (const auto& s : summaries)
    if (s.split == split && s.mode == mode) return &s;
  return nullptr;
}

std::vector<const UtteranceScore*> CorpusReport::select(const std::string& split, AssignMode mode) const {
  std::vector<const UtteranceScore*> out;
  for (const auto& u : utterances)
    if (u.split == split && u.mode == mode) out.push_back(&u);
  return out;
}

CorpusReport corpus_report(const Manifest& manifest, const Estimator& estimator,
                           const std::vector<std::string>& splits, const std::vector<AssignMode>& modes,
                           int sample_rate) {
  keep_large_allocations();
  CorpusReport report;
  for (const auto& split : splits) {
    std::vector<SplitSummary> sums;
    for (auto mode : modes) sums.push_back(SplitSummary{split, mode});
    for (const ManifestRecord* rec : manifest.split(split)) {
      const Utterance utt = load_utterance(*rec, sample_rate);
      const auto estimates = estimator(utt);
      const auto pairs = pairwise_scores(estimates, utt.references);
      std::vector<double> mixture_sdr;
      for (std::size_t j = 0; j < utt.references.size(); ++j)
        mixture_sdr.push_back(source_score(decompose(utt.mixture, utt.references, static_cast<int>(j))).sdr);
      for (std::size_t m = 0; m < modes.size(); ++m) {
        UtteranceScore u{rec->id, split, modes[m], pairs.select(modes[m]), mixture_sdr};
        auto& agg = sums[m];
        agg.sdr += u.score.mean_sdr();
        agg.sir += u.score.mean_sir();
        agg.sar += u.score.mean_sar();
        agg.sdr_improvement += u.mean_sdr_improvement();
        agg.n += 1;
        for (double v : u.score.sdr_db) agg.neg_inf_sdr += v == -kInf ? 1 : 0;
        report.utterances.push_back(std::move(u));
      }
    }
    for (auto& s : sums) {
      if (s.n > 0) {
        s.sdr /= s.n;
        s.sir /= s.n;
        s.sar /= s.n;
        s.sdr_improvement /= s.n;
      }
      report.summaries.push_back(s);
    }
  }
  return report;
}

void write_report_table(std::ostream& os, const CorpusReport& report, const std::string& title) {
  if (!title.empty()) os << "# " << title << '\n';
  os << std::left << std::setw(8) << "split" << std::setw(10) << "mode" << std::right << std::setw(9) << "SDR"
     << std::setw(9) << "SIR" << std::setw(9) << "SAR" << std::setw(9) << "SDRi" << std::setw(6) << "n" << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& s : report.summaries) {
    os << std::left << std::setw(8) << s.split << std::setw(10) << to_string(s.mode) << std::right << std::setw(9)
       << s.sdr << std::setw(9) << s.sir << std::setw(9) << s.sar << std::setw(9) << s.sdr_improvement
       << std::setw(6) << s.n << '\n';
  }
  os.unsetf(std::ios::fixed);
}

void write_report_jsonl(std::ostream& os, const CorpusReport& report, const std::string& system) {
  for (const auto& u : report.utterances) {
    nlohmann::ordered_json j;
    if (!system.empty()) j["system"] = system;
    j["type"] = "utterance";
    j["id"] = u.id;
    j["split"] = u.split;
    j["mode"] = std::string(to_string(u.mode));
    auto arr = [](const std::vector<double>& v) {
      auto a = nlohmann::json::array();
      for (double x : v) a.push_back(json_db(x));
      return a;
    };
    j["sdr"] = arr(u.score.sdr_db);
    j["sir"] = arr(u.score.sir_db);
    j["sar"] = arr(u.score.sar_db);
    j["mixture_sdr"] = arr(u.mixture_sdr_db);
    j["assignment"] = u.score.assignment;
    os << j.dump() << '\n';
  }
  for (const auto& s : report.summaries) {
    nlohmann::ordered_json j;
    if (!system.empty()) j["system"] = system;
    j["type"] = "summary";
    j["split"] = s.split;
    j["mode"] = std::string(to_string(s.mode));
    j["SDR"] = s.sdr;
    j["SIR"] = s.sir;
    j["SAR"] = s.sar;
    j["SDRi"] = s.sdr_improvement;
    j["n"] = s.n;
    j["neg_inf_sdr"] = s.neg_inf_sdr;
    os << j.dump() << '\n';
  }
}

}  // namespace sepkit
