#include "sepkit/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace sepkit {
namespace {

constexpr char kMagic[8] = {'S', 'E', 'P', 'K', 'I', 'T', 'C', 'K'};

using nlohmann::json;

json config_to_json(const nn::ModelConfig& c) {
  return json{{"kind", std::string(nn::to_string(c.kind))},
              {"bins", c.bins},
              {"hidden", c.hidden},
              {"embed_layers", c.embed_layers},
              {"embed_dim", c.embed_dim},
              {"separation_layers", c.separation_layers},
              {"baseline_layers", c.baseline_layers},
              {"num_sources", c.num_sources},
              {"dropout", c.dropout},
              {"concat_magnitude", c.concat_magnitude}};
}

nn::ModelConfig config_from_json(const json& j) {
  nn::ModelConfig c;
  c.kind = nn::model_kind_from_string(j.at("kind").get<std::string>());
  c.bins = j.at("bins");
  c.hidden = j.at("hidden");
  c.embed_layers = j.at("embed_layers");
  c.embed_dim = j.at("embed_dim");
  c.separation_layers = j.at("separation_layers");
  c.baseline_layers = j.at("baseline_layers");
  c.num_sources = j.at("num_sources");
  c.dropout = j.at("dropout");
  c.concat_magnitude = j.at("concat_magnitude");
  return c;
}

void append(std::string& out, const double* data, std::size_t n) {
  out.append(reinterpret_cast<const char*>(data), n * sizeof(double));
}

class Reader {
 public:
  Reader(const std::string& buf, std::size_t pos) : buf_(buf), pos_(pos) {}
  void read(double* dst, std::size_t n) {
    const std::size_t bytes = n * sizeof(double);
    if (pos_ + bytes > buf_.size()) throw Error(ErrorCode::IncompatibleCheckpoint, "payload truncated");
    std::memcpy(dst, buf_.data() + pos_, bytes);
    pos_ += bytes;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_;
};

}  // namespace

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::dc: return "dc";
    case Stage::joint: return "joint";
    case Stage::dl: return "dl";
  }
  return "?";
}

Stage stage_from_string(std::string_view s) {
  if (s == "dc") return Stage::dc;
  if (s == "joint") return Stage::joint;
  if (s == "dl") return Stage::dl;
  throw Error(ErrorCode::InvalidConfig, "unknown stage " + std::string(s));
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header;
  header["stage"] = std::string(to_string(ckpt.stage));
  header["lineage"] = ckpt.lineage;
  header["model"] = config_to_json(ckpt.model.config);
  header["has_separation"] = ckpt.model.separation.has_value();
  json blocks = json::array();
  for (int i = 0; i < ckpt.model.params.size(); ++i)
    blocks.push_back({{"name", ckpt.model.params.names[i]},
                      {"rows", ckpt.model.params.values[i].rows()},
                      {"cols", ckpt.model.params.values[i].cols()}});
  header["blocks"] = blocks;
  header["has_optimizer"] = ckpt.optimizer.has_value();
  if (ckpt.optimizer)
    header["optimizer"] = {{"lr", ckpt.optimizer->lr},
                           {"beta1", ckpt.optimizer->beta1},
                           {"beta2", ckpt.optimizer->beta2},
                           {"eps", ckpt.optimizer->eps},
                           {"step", ckpt.optimizer->step}};
  header["norm_bins"] = ckpt.norm.bins();
  header["norm_flagged"] = ckpt.norm.flagged_bins;
  header["stft"] = {{"window_len_ms", ckpt.stft.window_len_ms},
                    {"hop_ms", ckpt.stft.hop_ms},
                    {"fft_size", ckpt.stft.fft_size}};
  header["sample_rate"] = ckpt.sample_rate;
  header["meta"] = json::parse(ckpt.meta_json);
  const std::string header_text = header.dump();

  std::string body;
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_len = header_text.size();
  body.append(kMagic, sizeof(kMagic));
  body.append(reinterpret_cast<const char*>(&version), sizeof(version));
  body.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  body += header_text;
  for (const auto& v : ckpt.model.params.values) append(body, v.data(), v.size());
  if (ckpt.optimizer) {
    for (const auto& m : ckpt.optimizer->m) append(body, m.data(), m.size());
    for (const auto& m : ckpt.optimizer->v) append(body, m.data(), m.size());
  }
  append(body, ckpt.norm.mean.data(), ckpt.norm.mean.size());
  append(body, ckpt.norm.variance.data(), ckpt.norm.variance.size());
  const std::uint64_t checksum = fnv1a(body.data(), body.size());
  body.append(reinterpret_cast<const char*>(&checksum), sizeof(checksum));

  // Write to a sibling temp file, then rename into place.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::IoError, "cannot write " + tmp.string());
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    require(static_cast<bool>(os), ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorCode::IncompatibleCheckpoint, "cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::size_t fixed = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  require(buf.size() >= fixed + sizeof(std::uint64_t) && std::memcmp(buf.data(), kMagic, sizeof(kMagic)) == 0,
          ErrorCode::IncompatibleCheckpoint, path.string() + " is not a checkpoint");
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - sizeof(stored), sizeof(stored));
  require(fnv1a(buf.data(), buf.size() - sizeof(stored)) == stored, ErrorCode::IncompatibleCheckpoint,
          "checksum mismatch in " + path.string());
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  std::memcpy(&version, buf.data() + sizeof(kMagic), sizeof(version));
  std::memcpy(&header_len, buf.data() + sizeof(kMagic) + sizeof(version), sizeof(header_len));
  require(version == kCheckpointVersion, ErrorCode::IncompatibleCheckpoint,
          "unsupported checkpoint version " + std::to_string(version));
  require(fixed + header_len <= buf.size(), ErrorCode::IncompatibleCheckpoint, "header truncated");

  try {
    const json header = json::parse(buf.substr(fixed, header_len));
    Checkpoint ck;
    ck.stage = stage_from_string(header.at("stage").get<std::string>());
    ck.lineage = header.at("lineage").get<std::vector<std::string>>();
    const auto config = config_from_json(header.at("model"));
    // Rebuild the topology, then overwrite the freshly initialized values.
    ck.model = nn::init_model(config, header.at("has_separation").get<bool>(), 0);
    const auto& blocks = header.at("blocks");
    require(blocks.size() == static_cast<std::size_t>(ck.model.params.size()), ErrorCode::IncompatibleCheckpoint,
            "parameter block count differs from model topology");
    Reader reader(buf, fixed + header_len);
    for (int i = 0; i < ck.model.params.size(); ++i) {
      auto& v = ck.model.params.values[i];
      require(blocks[i].at("name").get<std::string>() == ck.model.params.names[i] &&
                  blocks[i].at("rows").get<Eigen::Index>() == v.rows() &&
                  blocks[i].at("cols").get<Eigen::Index>() == v.cols(),
              ErrorCode::IncompatibleCheckpoint, "block " + ck.model.params.names[i] + " does not match topology");
      reader.read(v.data(), v.size());
    }
    if (header.at("has_optimizer").get<bool>()) {
      const auto& o = header.at("optimizer");
      nn::AdamState<double> adam = nn::AdamState<double>::init(ck.model.params, o.at("lr").get<double>());
      adam.beta1 = o.at("beta1");
      adam.beta2 = o.at("beta2");
      adam.eps = o.at("eps");
      adam.step = o.at("step");
      for (auto& m : adam.m) reader.read(m.data(), m.size());
      for (auto& m : adam.v) reader.read(m.data(), m.size());
      ck.optimizer = std::move(adam);
    }
    const auto bins = header.at("norm_bins").get<Eigen::Index>();
    ck.norm.mean.resize(bins);
    ck.norm.variance.resize(bins);
    reader.read(ck.norm.mean.data(), bins);
    reader.read(ck.norm.variance.data(), bins);
    ck.norm.flagged_bins = header.at("norm_flagged").get<std::vector<int>>();
    require(reader.pos() + sizeof(stored) == buf.size(), ErrorCode::IncompatibleCheckpoint,
            "trailing bytes in checkpoint");
    const auto& st = header.at("stft");
    ck.stft.window_len_ms = st.at("window_len_ms");
    ck.stft.hop_ms = st.at("hop_ms");
    ck.stft.fft_size = st.at("fft_size");
    ck.sample_rate = header.at("sample_rate");
    ck.meta_json = header.at("meta").dump();
    return ck;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IncompatibleCheckpoint, std::string("malformed header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IncompatibleCheckpoint) throw;
    throw Error(ErrorCode::IncompatibleCheckpoint, e.what());
  }
}

std::uint64_t checkpoint_hash(const Checkpoint& ckpt) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& v : ckpt.model.params.values) h = fnv1a(v.data(), v.size() * sizeof(double), h);
  if (ckpt.optimizer) {
    for (const auto& m : ckpt.optimizer->m) h = fnv1a(m.data(), m.size() * sizeof(double), h);
    for (const auto& m : ckpt.optimizer->v) h = fnv1a(m.data(), m.size() * sizeof(double), h);
  }
  h = fnv1a(ckpt.norm.mean.data(), ckpt.norm.mean.size() * sizeof(double), h);
  h = fnv1a(ckpt.norm.variance.data(), ckpt.norm.variance.size() * sizeof(double), h);
  return h;
}

}  // namespace sepkit
