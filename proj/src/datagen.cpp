#include "sepkit/datagen.hpp"

#include "sepkit/wav.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

namespace sepkit {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Formant {
  double center;
  double bandwidth;
  double gain;
};

std::vector<Formant> formants_for(std::uint64_t formant_seed) {
  std::mt19937_64 rng(formant_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {
      {300.0 + 600.0 * u(rng), 80.0 + 80.0 * u(rng), 1.0},
      {900.0 + 1500.0 * u(rng), 100.0 + 100.0 * u(rng), 0.4 + 0.5 * u(rng)},
      {2300.0 + 1200.0 * u(rng), 150.0 + 150.0 * u(rng), 0.2 + 0.3 * u(rng)},
  };
}

double spectral_envelope(const std::vector<Formant>& formants, double freq) {
  double a = 0.02;
  for (const auto& fm : formants) {
    const double x = (freq - fm.center) / fm.bandwidth;
    a += fm.gain / (1.0 + x * x);
  }
  return a;
}

std::string split_prefix(const std::string& split) {
  return split.substr(0, std::min<std::size_t>(split.size(), 2));
}

int split_code(const std::string& split) {
  if (split == "train") return 0;
  if (split == "dev") return 1;
  if (split == "test") return 2;
  throw Error(ErrorCode::InvalidConfig, "unknown split " + split);
}

}  // namespace

void SpeakerProfile::validate() const {
  require(f0_min > 60.0 && f0_max < 400.0 && f0_min < f0_max, ErrorCode::InvalidConfig,
          "speaker " + id + " f0 range must lie inside (60, 400) Hz");
  require(modulation_rate > 0.0, ErrorCode::InvalidConfig, "modulation rate must be positive");
}

SpeakerProfile make_speaker_profile(const std::string& id, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpeakerProfile p;
  p.id = id;
  // Low and high voices, roughly like male and female talkers.
  const bool high = u(rng) < 0.5;
  const double center = high ? 170.0 + 90.0 * u(rng) : 90.0 + 60.0 * u(rng);
  const double half_width = center * (0.12 + 0.1 * u(rng));
  p.f0_min = std::max(65.0, center - half_width);
  p.f0_max = std::min(395.0, center + half_width);
  p.formant_seed = mix_seed(seed, 0xf0);
  p.modulation_rate = 3.0 + 3.0 * u(rng);
  return p;
}

double power(const AudioBuffer& audio) { return audio.samples.squaredNorm() / static_cast<double>(audio.size()); }

AudioBuffer synth_source(const SpeakerProfile& profile, double duration_s, std::uint64_t seed, int sample_rate) {
  profile.validate();
  require(duration_s >= 0.5, ErrorCode::InvalidConfig, "duration must be at least 0.5 s");
  const auto n = static_cast<Eigen::Index>(std::lround(duration_s * sample_rate));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto formants = formants_for(profile.formant_seed);

  // Piecewise F0 targets per "syllable", glided with a one-pole smoother.
  const double log_lo = std::log(profile.f0_min);
  const double log_hi = std::log(profile.f0_max);
  VectorXd f0(n);
  double target = std::exp(log_lo + (log_hi - log_lo) * u(rng));
  double current = target;
  Eigen::Index next_change = 0;
  const double glide = 1.0 - std::exp(-1.0 / (0.03 * sample_rate));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == next_change) {
      target = std::exp(log_lo + (log_hi - log_lo) * u(rng));
      next_change += static_cast<Eigen::Index>((0.12 + 0.25 * u(rng)) * sample_rate);
    }
    current += glide * (target - current);
    f0[i] = std::clamp(current, profile.f0_min, profile.f0_max);
  }

  // Syllabic modulation plus one or two pauses with raised-cosine edges.
  VectorXd env(n);
  const double mod_phase = kTwoPi * u(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    env[i] = 0.35 + 0.65 * 0.5 * (1.0 - std::cos(kTwoPi * profile.modulation_rate * t + mod_phase));
  }
  const int pauses = 1 + static_cast<int>(u(rng) * 2.0);
  const auto ramp = static_cast<Eigen::Index>(0.01 * sample_rate);
  for (int k = 0; k < pauses; ++k) {
    const auto len = static_cast<Eigen::Index>((0.04 + 0.08 * u(rng)) * sample_rate);
    const auto start = static_cast<Eigen::Index>(u(rng) * static_cast<double>(std::max<Eigen::Index>(1, n - len)));
    for (Eigen::Index i = std::max<Eigen::Index>(0, start - ramp); i < std::min(n, start + len + ramp); ++i) {
      double g = 0.0;
      if (i < start) g = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(i - start + ramp) / ramp));
      else if (i >= start + len) g = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i - start - len) / ramp));
      env[i] *= g;
    }
  }

  const double nyquist = 0.5 * sample_rate;
  const int max_harmonics = static_cast<int>(0.95 * nyquist / profile.f0_min);
  std::vector<double> offsets(max_harmonics);
  for (auto& o : offsets) o = kTwoPi * u(rng);

  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples = VectorXd::Zero(n);
  double phase = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    phase += kTwoPi * f0[i] / sample_rate;
    if (phase > kTwoPi) phase -= kTwoPi;
    double s = 0.0;
    for (int h = 1; h <= max_harmonics; ++h) {
      const double freq = h * f0[i];
      if (freq >= 0.95 * nyquist) break;
      s += spectral_envelope(formants, freq) * std::sin(h * phase + offsets[h - 1]) / std::sqrt(double(h));
    }
    out.samples[i] = env[i] * s;
  }
  const double rms = std::sqrt(power(out));
  require(rms > 0.0, ErrorCode::DegenerateSource, "synthesized source is silent");
  out.samples /= rms;
  return out;
}

Utterance mix(const AudioBuffer& a, const AudioBuffer& b, double snr_db) {
  a.validate();
  b.validate();
  require(a.size() == b.size(), ErrorCode::ShapeMismatch, "sources must have equal length");
  require(a.sample_rate == b.sample_rate, ErrorCode::ShapeMismatch, "sources must share a sample rate");
  const double pa = power(a);
  const double pb = power(b);
  require(pa > 0.0 && pb > 0.0, ErrorCode::DegenerateSource, "cannot mix a silent source");
  const double gain = std::sqrt(pa / (pb * std::pow(10.0, snr_db / 10.0)));

  Utterance utt;
  AudioBuffer scaled{b.samples * gain, b.sample_rate};
  utt.mixture = AudioBuffer{a.samples + scaled.samples, a.sample_rate};
  utt.references = {a, std::move(scaled)};
  utt.spec.snr_db = snr_db;
  utt.spec.duration_s = static_cast<double>(a.size()) / a.sample_rate;
  return utt;
}

void CorpusConfig::validate() const {
  require(sample_rate > 0, ErrorCode::InvalidConfig, "sample_rate must be positive");
  require(duration_s >= 0.5, ErrorCode::InvalidConfig, "duration_s must be at least 0.5");
  require(num_train >= 0 && num_dev >= 0 && num_test >= 0, ErrorCode::InvalidConfig, "negative utterance count");
  require(train_speakers >= 2 && test_speakers >= 2, ErrorCode::InvalidConfig,
          "each speaker pool needs at least two speakers");
  require(snr_min_db <= snr_max_db, ErrorCode::InvalidConfig, "snr interval is empty");
  require(peak_level > 0.0 && peak_level < 1.0, ErrorCode::InvalidConfig, "peak_level must be in (0, 1)");
}

std::vector<const ManifestRecord*> Manifest::split(const std::string& name) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == name) out.push_back(&r);
  return out;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::IoError, "cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& r : manifest.records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["split"] = r.split;
    j["mixture_path"] = std::filesystem::relative(r.mixture_path, base).generic_string();
    auto refs = nlohmann::json::array();
    for (const auto& p : r.ref_paths) refs.push_back(std::filesystem::relative(p, base).generic_string());
    j["ref_paths"] = refs;
    j["snr_db"] = r.snr_db;
    j["speaker_ids"] = r.speaker_ids;
    os << j.dump() << '\n';
  }
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::ManifestError, "cannot read manifest " + path.string());
  const auto base = path.parent_path();
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestRecord r;
      r.id = j.at("id").get<std::string>();
      r.split = j.at("split").get<std::string>();
      r.mixture_path = base / j.at("mixture_path").get<std::string>();
      for (const auto& p : j.at("ref_paths")) r.ref_paths.push_back(base / p.get<std::string>());
      r.snr_db = j.at("snr_db").get<double>();
      r.speaker_ids = j.at("speaker_ids").get<std::vector<std::string>>();
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ManifestError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return m;
}

Utterance load_utterance(const ManifestRecord& record, int expected_rate) {
  const auto load = [&](const std::filesystem::path& p) {
    require(std::filesystem::exists(p), ErrorCode::ManifestError, "missing file " + p.string());
    return read_wav(p, expected_rate);
  };
  Utterance utt;
  utt.mixture = load(record.mixture_path);
  for (const auto& p : record.ref_paths) {
    utt.references.push_back(load(p));
    require(utt.references.back().size() == utt.mixture.size(), ErrorCode::ManifestError,
            "reference length differs from mixture in " + record.id);
  }
  utt.spec.snr_db = record.snr_db;
  return utt;
}

SpeakerPools make_speaker_pools(const CorpusConfig& config) {
  SpeakerPools pools;
  char name[32];
  for (int i = 0; i < config.train_speakers; ++i) {
    std::snprintf(name, sizeof(name), "tr%03d", i);
    pools.train.push_back(make_speaker_profile(name, mix_seed(config.master_seed, 1000 + i)));
  }
  for (int i = 0; i < config.test_speakers; ++i) {
    std::snprintf(name, sizeof(name), "te%03d", i);
    pools.test.push_back(make_speaker_profile(name, mix_seed(config.master_seed, 100000 + i)));
  }
  check_disjoint(pools);
  return pools;
}

void check_disjoint(const SpeakerPools& pools) {
  std::set<std::string> ids;
  std::set<std::uint64_t> seeds;
  for (const auto& p : pools.train) {
    require(ids.insert(p.id).second, ErrorCode::SplitViolation, "duplicate speaker id " + p.id);
    require(seeds.insert(p.formant_seed).second, ErrorCode::SplitViolation, "duplicate speaker seed for " + p.id);
  }
  for (const auto& p : pools.test) {
    require(ids.insert(p.id).second, ErrorCode::SplitViolation, "speaker " + p.id + " appears in both pools");
    require(seeds.insert(p.formant_seed).second, ErrorCode::SplitViolation, "duplicate speaker seed for " + p.id);
  }
}

Utterance generate_utterance(const CorpusConfig& config, const SpeakerPools& pools, const std::string& split,
                             int index) {
  const auto& pool = split == "test" ? pools.test : pools.train;
  const std::uint64_t seed = mix_seed(mix_seed(config.master_seed, 7 + split_code(split)), index);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const std::size_t ia = pick(rng);
  std::size_t ib = pick(rng);
  while (ib == ia) ib = pick(rng);
  std::uniform_real_distribution<double> snr_dist(config.snr_min_db, config.snr_max_db);
  const double snr = snr_dist(rng);

  const auto a = synth_source(pool[ia], config.duration_s, mix_seed(seed, 1), config.sample_rate);
  const auto b = synth_source(pool[ib], config.duration_s, mix_seed(seed, 2), config.sample_rate);
  Utterance utt = mix(a, b, snr);
  utt.spec.source_a = pool[ia];
  utt.spec.source_b = pool[ib];
  utt.spec.seed = seed;
  return utt;
}

Manifest build_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const auto pools = make_speaker_pools(config);
  Manifest manifest;
  const std::pair<std::string, int> splits[] = {
      {"train", config.num_train}, {"dev", config.num_dev}, {"test", config.num_test}};
  for (const auto& [split, count] : splits) {
    const auto dir = out_dir / "wav" / split;
    std::filesystem::create_directories(dir);
    for (int i = 0; i < count; ++i) {
      Utterance utt = generate_utterance(config, pools, split, i);
      // Common gain, then quantize references and rebuild the mixture from the
      // quantized references so the sum identity also holds for the files.
      const double gain = config.peak_level / utt.mixture.samples.cwiseAbs().maxCoeff();
      VectorXd mixture = VectorXd::Zero(utt.mixture.size());
      for (auto& ref : utt.references) {
        ref.samples = quantize_pcm16(ref.samples * gain);
        mixture += ref.samples;
      }
      utt.mixture.samples = mixture;

      char id[64];
      std::snprintf(id, sizeof(id), "%s%05d", split_prefix(split).c_str(), i);
      ManifestRecord rec;
      rec.id = id;
      rec.split = split;
      rec.mixture_path = dir / (rec.id + "_mix.wav");
      write_wav(rec.mixture_path, utt.mixture);
      for (int s = 0; s < utt.num_sources(); ++s) {
        rec.ref_paths.push_back(dir / (rec.id + "_s" + std::to_string(s + 1) + ".wav"));
        write_wav(rec.ref_paths.back(), utt.references[s]);
      }
      rec.snr_db = utt.spec.snr_db;
      rec.speaker_ids = {utt.spec.source_a.id, utt.spec.source_b.id};
      manifest.records.push_back(std::move(rec));
    }
  }
  std::filesystem::create_directories(out_dir);
  write_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

}  // namespace sepkit
