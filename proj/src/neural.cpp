#include "sepkit/neural.hpp"

#include <cmath>

namespace sepkit::nn {
namespace {

MatrixXd uniform(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

LstmWeights add_lstm(ParameterSet<double>& params, const std::string& prefix, int input_dim, int hidden,
                     std::mt19937_64& rng) {
  LstmWeights w;
  w.input_weights = params.add(prefix + ".wx", uniform(input_dim, 4 * hidden, 1.0 / std::sqrt(input_dim), rng));
  w.recurrent_weights = params.add(prefix + ".wh", uniform(hidden, 4 * hidden, 1.0 / std::sqrt(hidden), rng));
  MatrixXd bias = uniform(1, 4 * hidden, 1.0 / std::sqrt(hidden), rng);
  bias.middleCols(hidden, hidden).setOnes();
  w.bias = params.add(prefix + ".b", std::move(bias));
  return w;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::embedding ? "embedding" : "baseline";
}

ModelKind model_kind_from_string(std::string_view s) {
  if (s == "embedding") return ModelKind::embedding;
  if (s == "baseline") return ModelKind::baseline;
  throw Error(ErrorCode::InvalidConfig, "unknown model kind " + std::string(s));
}

void ModelConfig::validate() const {
  require(bins > 0 && hidden > 0 && embed_dim > 0 && num_sources >= 2, ErrorCode::InvalidConfig,
          "model dimensions must be positive and num_sources >= 2");
  require(embed_layers >= 1 && separation_layers >= 1 && baseline_layers >= 1, ErrorCode::InvalidConfig,
          "each stack needs at least one recurrent layer");
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::InvalidConfig, "dropout must be in [0, 1)");
}

template <typename Scalar>
int Model<Scalar>::separation_input_dim() const {
  if (config.kind == ModelKind::baseline) return config.bins;
  return config.bins * config.embed_dim + (config.concat_magnitude ? config.bins : 0);
}

BiLstmLayer add_bilstm(ParameterSet<double>& params, const std::string& prefix, int input_dim, int hidden,
                       std::mt19937_64& rng) {
  BiLstmLayer layer;
  layer.forward = add_lstm(params, prefix + ".fw", input_dim, hidden, rng);
  layer.backward = add_lstm(params, prefix + ".bw", input_dim, hidden, rng);
  return layer;
}

EmbeddingNet add_embedding_net(ParameterSet<double>& params, const ModelConfig& config, std::mt19937_64& rng) {
  EmbeddingNet net;
  net.bins = config.bins;
  net.embed_dim = config.embed_dim;
  int in = config.bins;
  for (int i = 0; i < config.embed_layers; ++i) {
    net.layers.push_back(add_bilstm(params, "embed.l" + std::to_string(i), in, config.hidden, rng));
    in = 2 * config.hidden;
  }
  const double bound = 1.0 / std::sqrt(in);
  net.projection_weights = params.add("embed.proj.w", uniform(in, config.bins * config.embed_dim, bound, rng));
  net.projection_bias = params.add("embed.proj.b", uniform(1, config.bins * config.embed_dim, bound, rng));
  return net;
}

SeparationNet add_separation_net(ParameterSet<double>& params, const ModelConfig& config, std::mt19937_64& rng) {
  SeparationNet net;
  net.bins = config.bins;
  net.num_sources = config.num_sources;
  net.input_dim = config.kind == ModelKind::baseline
                      ? config.bins
                      : config.bins * config.embed_dim + (config.concat_magnitude ? config.bins : 0);
  const int layers = config.kind == ModelKind::baseline ? config.baseline_layers : config.separation_layers;
  int in = net.input_dim;
  for (int i = 0; i < layers; ++i) {
    net.layers.push_back(add_bilstm(params, "sep.l" + std::to_string(i), in, config.hidden, rng));
    in = 2 * config.hidden;
  }
  const double bound = 1.0 / std::sqrt(in);
  net.head_weights = params.add("sep.head.w", uniform(in, config.num_sources * config.bins, bound, rng));
  net.head_bias = params.add("sep.head.b", uniform(1, config.num_sources * config.bins, bound, rng));
  return net;
}

Model<double> init_model(const ModelConfig& config, bool with_separation, std::uint64_t seed) {
  config.validate();
  Model<double> model;
  model.config = config;
  std::mt19937_64 rng(mix_seed(seed, 0xe3b));
  if (config.kind == ModelKind::embedding) model.embedding = add_embedding_net(model.params, config, rng);
  if (with_separation || config.kind == ModelKind::baseline) attach_separation(model, seed);
  return model;
}

void attach_separation(Model<double>& model, std::uint64_t seed) {
  require(!model.separation.has_value(), ErrorCode::InvalidConfig, "model already has a separation net");
  std::mt19937_64 rng(mix_seed(seed, 0x5e9));
  model.separation = add_separation_net(model.params, model.config, rng);
}

template <typename Scalar>
Model<Scalar> cast_model(const Model<double>& model) {
  Model<Scalar> out;
  out.config = model.config;
  out.embedding = model.embedding;
  out.separation = model.separation;
  out.params.names = model.params.names;
  for (const auto& v : model.params.values) out.params.values.push_back(v.cast<Scalar>());
  return out;
}

MatrixXd forward_embed(const Model<double>& model, const MatrixXd& normalized_magnitude) {
  Graph<double> g;
  std::mt19937_64 rng(0);
  Var<double> v = embed(g, model, g.constant(normalized_magnitude), Mode::eval, rng);
  return embeddings_to_rows(v.value(), model.config.embed_dim);
}

MaskSet forward_separate(const Model<double>& model, const MatrixXd& features) {
  Graph<double> g;
  std::mt19937_64 rng(0);
  Var<double> m = separate_masks(g, model, g.constant(features), Mode::eval, rng);
  return split_masks(m.value(), model.config.num_sources);
}

MaskSet forward_masks(const Model<double>& model, const MatrixXd& normalized_magnitude) {
  Graph<double> g;
  std::mt19937_64 rng(0);
  auto out = forward(g, model, normalized_magnitude, Mode::eval, rng);
  require(out.masks.has_value(), ErrorCode::UnsupportedStage, "model has no separation net");
  return split_masks(out.masks->value(), model.config.num_sources);
}

template struct Model<double>;
template struct Model<float>;
template Model<double> cast_model<double>(const Model<double>&);
template Model<float> cast_model<float>(const Model<double>&);

}  // namespace sepkit::nn
