#ifndef SEPKIT_NEURAL_HPP
#define SEPKIT_NEURAL_HPP

#include "sepkit/autodiff.hpp"
#include "sepkit/masking.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sepkit::nn {

enum class Mode { train, eval };

/// Which input the separation stack sees.
enum class ModelKind {
  embedding,  ///< embedding net -> separation net (deep embedding features)
  baseline,   ///< separation stack fed normalized magnitudes directly
};

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view s);

struct ModelConfig {
  ModelKind kind = ModelKind::embedding;
  int bins = 129;
  int hidden = 64;          ///< units per direction
  int embed_layers = 2;
  int embed_dim = 8;
  int separation_layers = 1;
  int baseline_layers = 3;  ///< recurrent layers of the magnitude-input baseline
  int num_sources = 2;
  double dropout = 0.5;
  bool concat_magnitude = false;

  void validate() const;
};

struct BiLstmLayer {
  LstmWeights forward;
  LstmWeights backward;
};

struct EmbeddingNet {
  std::vector<BiLstmLayer> layers;
  int projection_weights = -1;  ///< 2H x (F * D)
  int projection_bias = -1;
  int bins = 0;
  int embed_dim = 0;
};

struct SeparationNet {
  std::vector<BiLstmLayer> layers;
  int head_weights = -1;  ///< 2H x (S * F)
  int head_bias = -1;
  int bins = 0;
  int num_sources = 0;
  int input_dim = 0;
};

/// Network topology plus parameters. The embedding net is absent for the baseline.
template <typename Scalar>
struct Model {
  ModelConfig config;
  ParameterSet<Scalar> params;
  std::optional<EmbeddingNet> embedding;
  std::optional<SeparationNet> separation;

  int separation_input_dim() const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget-gate bias 1.
BiLstmLayer add_bilstm(ParameterSet<double>& params, const std::string& prefix, int input_dim, int hidden,
                       std::mt19937_64& rng);
EmbeddingNet add_embedding_net(ParameterSet<double>& params, const ModelConfig& config, std::mt19937_64& rng);
SeparationNet add_separation_net(ParameterSet<double>& params, const ModelConfig& config, std::mt19937_64& rng);

/// Builds a model with the embedding net only (stage dc) or with both nets.
Model<double> init_model(const ModelConfig& config, bool with_separation, std::uint64_t seed);
/// Adds a freshly initialized separation net to a model that lacks one.
void attach_separation(Model<double>& model, std::uint64_t seed);

template <typename Scalar>
Model<Scalar> cast_model(const Model<double>& model);

/// Bidirectional layer: [forward | backward] hidden states, T x 2H.
template <typename Scalar>
Var<Scalar> bilstm(Graph<Scalar>& g, const ParameterSet<Scalar>& params, const BiLstmLayer& layer, Var<Scalar> x) {
  auto dir = [&](const LstmWeights& w, bool reverse) {
    return lstm(x, g.parameter(params, w.input_weights), g.parameter(params, w.recurrent_weights),
                g.parameter(params, w.bias), reverse);
  };
  return concat_cols(dir(layer.forward, false), dir(layer.backward, true));
}

/// Stack of BiLSTM layers with dropout between consecutive layers.
template <typename Scalar>
Var<Scalar> recurrent_stack(Graph<Scalar>& g, const ParameterSet<Scalar>& params,
                            const std::vector<BiLstmLayer>& layers, Var<Scalar> x, double dropout_rate, Mode mode,
                            std::mt19937_64& rng) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i > 0) x = dropout(x, dropout_rate, mode == Mode::train, rng);
    x = bilstm(g, params, layers[i], x);
  }
  return x;
}

/// T x F normalized magnitudes -> T x (F * D) tanh embeddings. Row t holds the
/// D-dimensional vectors of bins 0..F-1 back to back, so a row-major reshape to
/// (T * F) x D gives V with row index t * F + f.
template <typename Scalar>
Var<Scalar> embed(Graph<Scalar>& g, const Model<Scalar>& model, Var<Scalar> input, Mode mode,
                  std::mt19937_64& rng) {
  require(model.embedding.has_value(), ErrorCode::InvalidConfig, "model has no embedding net");
  const auto& net = *model.embedding;
  require(input.cols() == net.bins, ErrorCode::ShapeMismatch, "input bin count differs from embedding net");
  Var<Scalar> h = recurrent_stack(g, model.params, net.layers, input, model.config.dropout, mode, rng);
  return tanh(linear(h, g.parameter(model.params, net.projection_weights),
                     g.parameter(model.params, net.projection_bias)));
}

/// T x input_dim features -> T x (S * F) non-negative masks; mask s occupies
/// columns [s * F, (s + 1) * F).
template <typename Scalar>
Var<Scalar> separate_masks(Graph<Scalar>& g, const Model<Scalar>& model, Var<Scalar> features, Mode mode,
                           std::mt19937_64& rng) {
  require(model.separation.has_value(), ErrorCode::InvalidConfig, "model has no separation net");
  const auto& net = *model.separation;
  require(features.cols() == net.input_dim, ErrorCode::ShapeMismatch, "separation input width mismatch");
  Var<Scalar> h = recurrent_stack(g, model.params, net.layers, features, model.config.dropout, mode, rng);
  return relu(linear(h, g.parameter(model.params, net.head_weights), g.parameter(model.params, net.head_bias)));
}

/// Output of a full forward pass on one utterance.
template <typename Scalar>
struct ForwardResult {
  std::optional<Var<Scalar>> embeddings;  ///< T x (F * D)
  std::optional<Var<Scalar>> masks;       ///< T x (S * F)
};

/// Runs whatever nets the model has on normalized magnitudes (T x F).
template <typename Scalar>
ForwardResult<Scalar> forward(Graph<Scalar>& g, const Model<Scalar>& model, const Matrix<Scalar>& input, Mode mode,
                              std::mt19937_64& rng) {
  ForwardResult<Scalar> out;
  Var<Scalar> x = g.constant(input);
  if (model.config.kind == ModelKind::baseline) {
    out.masks = separate_masks(g, model, x, mode, rng);
    return out;
  }
  out.embeddings = embed(g, model, x, mode, rng);
  if (model.separation) {
    Var<Scalar> features = *out.embeddings;
    if (model.config.concat_magnitude) features = concat_cols(features, x);
    out.masks = separate_masks(g, model, features, mode, rng);
  }
  return out;
}

/// Reshape T x (F * D) embeddings to (T * F) x D.
template <typename Derived>
MatrixXd embeddings_to_rows(const Eigen::MatrixBase<Derived>& frames, int embed_dim) {
  using RowMat = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMat rm = frames;
  const Eigen::Index rows = rm.size() / embed_dim;
  return Eigen::Map<const RowMat>(rm.data(), rows, embed_dim).template cast<double>();
}

/// Splits T x (S * F) mask output into a MaskSet.
template <typename Derived>
MaskSet split_masks(const Eigen::MatrixBase<Derived>& masks, int num_sources, MaskKind kind = MaskKind::estimated) {
  const Eigen::Index bins = masks.cols() / num_sources;
  MaskSet out;
  out.kind = kind;
  for (int s = 0; s < num_sources; ++s) out.masks.push_back(masks.middleCols(s * bins, bins).template cast<double>());
  return out;
}

/// Eval-mode embeddings V as (T * F) x D.
MatrixXd forward_embed(const Model<double>& model, const MatrixXd& normalized_magnitude);
/// Eval-mode masks from T x (F * D) embeddings (or T x F magnitudes for the baseline).
MaskSet forward_separate(const Model<double>& model, const MatrixXd& features);
/// Eval-mode masks for a normalized-magnitude input.
MaskSet forward_masks(const Model<double>& model, const MatrixXd& normalized_magnitude);

// ---------------------------------------------------------------------------
// Adam

template <typename Scalar>
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;

  static AdamState init(const ParameterSet<Scalar>& params, double lr) {
    AdamState s;
    s.lr = lr;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

/// One bias-corrected Adam update. Throws NumericGuardTripped on non-finite gradients.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, ParameterSet<Scalar>& params, const std::vector<Matrix<Scalar>>& grads) {
  require(state.lr > 0.0, ErrorCode::InvalidConfig, "learning rate must be positive");
  require(grads.size() == params.values.size() && state.m.size() == params.values.size(), ErrorCode::ShapeMismatch,
          "gradient/moment count differs from parameters");
  for (const auto& g : grads) require(g.allFinite(), ErrorCode::NumericGuardTripped, "non-finite gradient");
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const auto b1 = Scalar(state.beta1), b2 = Scalar(state.beta2);
  const auto step_size = Scalar(state.lr / bc1);
  const auto eps = Scalar(state.eps);
  const auto inv_bc2 = Scalar(1.0 / bc2);
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    require(grads[i].rows() == params.values[i].rows() && grads[i].cols() == params.values[i].cols(),
            ErrorCode::ShapeMismatch, "gradient shape differs for " + params.names[i]);
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * grads[i].cwiseAbs2();
    params.values[i].array() -= step_size * state.m[i].array() / ((state.v[i].array() * inv_bc2).sqrt() + eps);
  }
}

}  // namespace sepkit::nn

#endif  // SEPKIT_NEURAL_HPP
