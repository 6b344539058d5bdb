#include "sepkit/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace sepkit {
namespace {

using nlohmann::ordered_json;

ordered_json to_json(const SepkitConfig& c) {
  const auto& t = c.train();
  const auto& m = t.model;
  const auto& e = c.experiment;
  ordered_json j;
  j["preset"] = c.preset;
  j["sample_rate"] = c.sample_rate;
  j["stft"] = {{"window_len_ms", c.stft.window_len_ms}, {"hop_ms", c.stft.hop_ms}, {"fft_size", c.stft.fft_size}};
  j["corpus"] = {{"master_seed", c.corpus.master_seed},       {"duration_s", c.corpus.duration_s},
                 {"num_train", c.corpus.num_train},           {"num_dev", c.corpus.num_dev},
                 {"num_test", c.corpus.num_test},             {"train_speakers", c.corpus.train_speakers},
                 {"test_speakers", c.corpus.test_speakers},   {"snr_min_db", c.corpus.snr_min_db},
                 {"snr_max_db", c.corpus.snr_max_db},         {"peak_level", c.corpus.peak_level}};
  j["train"] = {{"stage", std::string(to_string(t.stage))},
                {"lambda", t.lambda},
                {"alpha", t.alpha},
                {"batch_utts", t.batch_utts},
                {"lr_init", t.lr_init},
                {"lr_decay", t.lr_decay},
                {"min_epochs", t.min_epochs},
                {"max_epochs", t.max_epochs},
                {"dc_epochs", t.dc_epochs},
                {"early_stop_rel", t.early_stop_rel},
                {"seed", t.seed},
                {"normalize_dc", t.normalize_dc},
                {"truncate_targets", t.truncate_targets},
                {"max_train_utts", t.max_train_utts}};
  j["model"] = {{"kind", std::string(nn::to_string(m.kind))},
                {"bins", m.bins},
                {"hidden", m.hidden},
                {"embed_layers", m.embed_layers},
                {"embed_dim", m.embed_dim},
                {"separation_layers", m.separation_layers},
                {"baseline_layers", m.baseline_layers},
                {"num_sources", m.num_sources},
                {"dropout", m.dropout},
                {"concat_magnitude", m.concat_magnitude}};
  j["experiment"] = {{"seeds", e.seeds},
                     {"lambdas", e.lambdas},
                     {"dl_lambda", e.dl_lambda},
                     {"joint_max_epochs", e.joint_max_epochs},
                     {"dl_max_epochs", e.dl_max_epochs},
                     {"dl_min_epochs", e.dl_min_epochs},
                     {"include_dc_kmeans", e.include_dc_kmeans}};
  return j;
}

SepkitConfig from_json(const ordered_json& j) {
  SepkitConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.sample_rate = j.at("sample_rate");
  const auto& s = j.at("stft");
  c.stft.window_len_ms = s.at("window_len_ms");
  c.stft.hop_ms = s.at("hop_ms");
  c.stft.fft_size = s.at("fft_size");
  const auto& k = j.at("corpus");
  c.corpus.master_seed = k.at("master_seed");
  c.corpus.sample_rate = c.sample_rate;
  c.corpus.duration_s = k.at("duration_s");
  c.corpus.num_train = k.at("num_train");
  c.corpus.num_dev = k.at("num_dev");
  c.corpus.num_test = k.at("num_test");
  c.corpus.train_speakers = k.at("train_speakers");
  c.corpus.test_speakers = k.at("test_speakers");
  c.corpus.snr_min_db = k.at("snr_min_db");
  c.corpus.snr_max_db = k.at("snr_max_db");
  c.corpus.peak_level = k.at("peak_level");
  auto& t = c.train();
  const auto& tj = j.at("train");
  t.stage = stage_from_string(tj.at("stage").get<std::string>());
  t.lambda = tj.at("lambda");
  t.alpha = tj.at("alpha");
  t.batch_utts = tj.at("batch_utts");
  t.lr_init = tj.at("lr_init");
  t.lr_decay = tj.at("lr_decay");
  t.min_epochs = tj.at("min_epochs");
  t.max_epochs = tj.at("max_epochs");
  t.dc_epochs = tj.at("dc_epochs");
  t.early_stop_rel = tj.at("early_stop_rel");
  t.seed = tj.at("seed");
  t.normalize_dc = tj.at("normalize_dc");
  t.truncate_targets = tj.at("truncate_targets");
  t.max_train_utts = tj.at("max_train_utts");
  auto& m = t.model;
  const auto& mj = j.at("model");
  m.kind = nn::model_kind_from_string(mj.at("kind").get<std::string>());
  m.bins = mj.at("bins");
  m.hidden = mj.at("hidden");
  m.embed_layers = mj.at("embed_layers");
  m.embed_dim = mj.at("embed_dim");
  m.separation_layers = mj.at("separation_layers");
  m.baseline_layers = mj.at("baseline_layers");
  m.num_sources = mj.at("num_sources");
  m.dropout = mj.at("dropout");
  m.concat_magnitude = mj.at("concat_magnitude");
  auto& e = c.experiment;
  const auto& ej = j.at("experiment");
  e.seeds = ej.at("seeds").get<std::vector<std::uint64_t>>();
  e.lambdas = ej.at("lambdas").get<std::vector<double>>();
  e.dl_lambda = ej.at("dl_lambda");
  e.joint_max_epochs = ej.at("joint_max_epochs");
  e.dl_max_epochs = ej.at("dl_max_epochs");
  e.dl_min_epochs = ej.at("dl_min_epochs");
  e.include_dc_kmeans = ej.at("include_dc_kmeans");
  return c;
}

bool same_kind(const ordered_json& def, const ordered_json& val) {
  if (def.is_boolean()) return val.is_boolean();
  if (def.is_number_integer() || def.is_number_unsigned())
    return val.is_number_integer() || val.is_number_unsigned();
  if (def.is_number()) return val.is_number();
  if (def.is_string()) return val.is_string();
  if (def.is_array()) return val.is_array();
  if (def.is_object()) return val.is_object();
  return false;
}

// Merges `patch` into `base`; every key must already exist with a compatible type.
void merge(ordered_json& base, const ordered_json& patch, const std::string& where) {
  require(patch.is_object(), ErrorCode::InvalidConfig, where + " must be an object");
  for (const auto& [key, val] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    require(base.contains(key), ErrorCode::InvalidConfig, "unknown config key " + path);
    auto& slot = base[key];
    require(same_kind(slot, val), ErrorCode::InvalidConfig, "wrong type for config key " + path);
    if (slot.is_object()) merge(slot, val, path);
    else slot = val;
  }
}

void apply_override(ordered_json& j, const std::string& text) {
  const auto eq = text.find('=');
  require(eq != std::string::npos && eq > 0, ErrorCode::InvalidConfig, "override must be key=value: " + text);
  const std::string key = text.substr(0, eq);
  const std::string raw = text.substr(eq + 1);
  ordered_json* slot = &j;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    require(slot->is_object() && slot->contains(part), ErrorCode::InvalidConfig, "unknown config key " + key);
    slot = &(*slot)[part];
  }
  ordered_json val;
  if (slot->is_string()) {
    val = raw;
  } else {
    try {
      val = ordered_json::parse(raw);
    } catch (const ordered_json::exception&) {
      throw Error(ErrorCode::InvalidConfig, "cannot parse value for " + key + ": " + raw);
    }
  }
  require(same_kind(*slot, val), ErrorCode::InvalidConfig, "wrong type for config key " + key);
  *slot = val;
}

}  // namespace

TrainConfig paper_preset() { return TrainConfig{}; }

TrainConfig desk_preset() {
  TrainConfig t;
  t.model.hidden = 64;
  t.model.embed_dim = 8;
  t.min_epochs = 15;
  t.max_epochs = 25;
  t.dc_epochs = 20;
  return t;
}

SepkitConfig default_config(const std::string& preset) {
  SepkitConfig c;
  c.preset = preset;
  if (preset == "desk") {
    c.experiment.train = desk_preset();
  } else if (preset == "paper") {
    c.experiment.train = paper_preset();
    c.experiment.train.model.hidden = 896;
    c.experiment.train.model.embed_dim = 40;
    c.corpus.num_train = 20000;
    c.corpus.num_dev = 5000;
    c.corpus.num_test = 3000;
    c.corpus.duration_s = 6.0;
    c.corpus.train_speakers = 101;
    c.corpus.test_speakers = 18;
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown preset " + preset);
  }
  return c;
}

SepkitConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  ordered_json user;
  try {
    user = text.empty() ? ordered_json::object() : ordered_json::parse(text);
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  require(user.is_object(), ErrorCode::InvalidConfig, "config must be a JSON object");
  std::string preset = "desk";
  if (user.contains("preset")) {
    require(user["preset"].is_string(), ErrorCode::InvalidConfig, "preset must be a string");
    preset = user["preset"].get<std::string>();
  }
  for (const auto& o : overrides)
    if (o.rfind("preset=", 0) == 0) preset = o.substr(7);
  ordered_json j = to_json(default_config(preset));
  merge(j, user, "");
  for (const auto& o : overrides) apply_override(j, o);
  try {
    SepkitConfig c = from_json(j);
    c.corpus.validate();
    c.train().validate();
    c.stft.validate(c.sample_rate);
    return c;
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

SepkitConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::InvalidConfig, "cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string to_json_string(const SepkitConfig& config) { return to_json(config).dump(2); }

std::string to_json_string(const TrainConfig& config) {
  SepkitConfig c;
  c.experiment.train = config;
  const auto j = to_json(c);
  ordered_json out;
  out["train"] = j["train"];
  out["model"] = j["model"];
  return out.dump();
}

}  // namespace sepkit
