#ifndef SEPKIT_LOSSES_HPP
#define SEPKIT_LOSSES_HPP

#include "sepkit/autodiff.hpp"
#include "sepkit/masking.hpp"

#include <vector>

namespace sepkit {

/// A bijection on {0..S-1}: output i is assigned to source perm[i].
using Permutation = std::vector<int>;

/// All S! permutations in lexicographic order. Throws UnsupportedSourceCount for S > 6.
std::vector<Permutation> all_permutations(int num_sources);

struct PermutationTable {
  std::vector<Permutation> perms;
  std::vector<double> costs;
  int chosen = 0;

  double chosen_cost() const { return costs.at(chosen); }
  /// Mean cost of the non-chosen permutations minus the chosen cost.
  double separation_gap() const;
};

struct LossReport {
  double total = 0.0;
  double j_dc = 0.0;
  double phi_star = 0.0;
  double dl_term = 0.0;  ///< alpha * sum of non-chosen costs (subtracted when use_dl)
  PermutationTable table;
  double lambda = 0.0;
  double alpha = 0.0;
  bool use_dl = false;

  double j_dl() const { return phi_star - dl_term; }
};

/// ||V V^T - B B^T||_F^2 through ||V^T V||^2 - 2 ||V^T B||^2 + ||B^T B||^2.
/// With `normalize` the result is divided by (TF)^2.
template <typename DerivedV, typename DerivedB>
double dc_loss(const Eigen::MatrixBase<DerivedV>& v, const Eigen::MatrixBase<DerivedB>& b, bool normalize = true) {
  require(v.rows() == b.rows(), ErrorCode::ShapeMismatch, "V and B row counts differ");
  const MatrixXd vd = v.template cast<double>();
  const MatrixXd bd = b.template cast<double>();
  const double value = (vd.transpose() * vd).squaredNorm() - 2.0 * (vd.transpose() * bd).squaredNorm() +
                       (bd.transpose() * bd).squaredNorm();
  if (!normalize) return value;
  const double n = static_cast<double>(v.rows());
  return value / (n * n);
}

/// Pairwise costs C(i, j) = (1/TF) || |Y| * M_i - target_j ||_F^2.
MatrixXd pairwise_psa_costs(const std::vector<MatrixXd>& masks, const MatrixXd& mixture_magnitude,
                            const std::vector<MatrixXd>& targets);

/// Phase-sensitive targets |X_s| cos(theta_y - theta_s) for every source.
std::vector<MatrixXd> psa_targets(const std::vector<Spectrogram>& sources, const Spectrogram& mixture);

/// (1/TF) sum_s || |Y| * M_s - |X_perm(s)| cos(theta_y - theta_perm(s)) ||_F^2
double psa_cost(const MaskSet& masks, const Spectrogram& mixture, const std::vector<Spectrogram>& sources,
                const Permutation& perm);

/// Cost of each permutation is the sum of its pairwise entries, which equals
/// psa_cost. Ties resolve to the lexicographically smallest permutation.
PermutationTable permutation_table(const MatrixXd& pairwise);
PermutationTable find_best_perm(const MaskSet& masks, const Spectrogram& mixture,
                                const std::vector<Spectrogram>& sources);

/// phi* - alpha * sum of non-chosen permutation costs.
double dl_loss(const PermutationTable& table, double alpha);

/// use_dl: lambda J_DC + (1 - lambda) J_DL; otherwise lambda J_DC + (1 - lambda) phi*.
LossReport joint_loss(double j_dc, const PermutationTable& table, double lambda, double alpha, bool use_dl);

namespace nn {

/// Differentiable DC loss on T x (F * D) embeddings against a (T * F) x C membership.
template <typename Scalar>
Var<Scalar> dc_loss(Var<Scalar> frames, int embed_dim, const MatrixXd& membership, bool normalize = true) {
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Index rows = frames.value().size() / embed_dim;
  require(rows == membership.rows(), ErrorCode::ShapeMismatch, "embedding rows differ from membership rows");
  const RowMat frames_rm = frames.value();
  const Matrix<Scalar> v = Eigen::Map<const RowMat>(frames_rm.data(), rows, embed_dim);
  const Matrix<Scalar> b = membership.cast<Scalar>();
  const Matrix<Scalar> vtv = v.transpose() * v;
  const Matrix<Scalar> vtb = v.transpose() * b;
  const Scalar factor = normalize ? Scalar(1.0 / (double(rows) * double(rows))) : Scalar(1);
  Matrix<Scalar> out(1, 1);
  out(0, 0) = factor * (vtv.squaredNorm() - Scalar(2) * vtb.squaredNorm() + (b.transpose() * b).squaredNorm());
  const Eigen::Index t = frames.rows(), c = frames.cols();
  return frames.graph->make_node(
      std::move(out), {frames}, [=](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
        // d/dV = 4 (V V^T V - B B^T V)
        const RowMat gv = (Scalar(4) * factor * d(0, 0)) * (v * vtv - b * vtb.transpose());
        gr.accumulate(frames, Eigen::Map<const RowMat>(gv.data(), t, c));
      });
}

/// Permutation-invariant phase-sensitive objective on T x (S * F) masks.
///
/// Value is phi* when use_dl is false, and phi* - alpha * sum_{phi != phi*} phi
/// otherwise. The argmin is a fixed selection for differentiation. The table
/// (if given) receives every permutation cost and the chosen index.
template <typename Scalar>
Var<Scalar> permutation_objective(Var<Scalar> masks, const Matrix<Scalar>& mixture_magnitude,
                                  const std::vector<Matrix<Scalar>>& targets, double alpha, bool use_dl,
                                  PermutationTable* table_out = nullptr) {
  const int sources = static_cast<int>(targets.size());
  const Eigen::Index frames = mixture_magnitude.rows();
  const Eigen::Index bins = mixture_magnitude.cols();
  require(masks.rows() == frames && masks.cols() == sources * bins, ErrorCode::ShapeMismatch,
          "mask output shape differs from (T, S * F)");
  const double inv_tf = 1.0 / static_cast<double>(frames * bins);

  std::vector<Matrix<Scalar>> estimates;
  for (int i = 0; i < sources; ++i)
    estimates.push_back(mixture_magnitude.cwiseProduct(masks.value().middleCols(i * bins, bins)));
  MatrixXd pairwise(sources, sources);
  for (int i = 0; i < sources; ++i)
    for (int j = 0; j < sources; ++j)
      pairwise(i, j) = static_cast<double>((estimates[i] - targets[j]).squaredNorm()) * inv_tf;
  PermutationTable table = permutation_table(pairwise);

  // Weight of each pairwise term in the objective.
  MatrixXd weight = MatrixXd::Zero(sources, sources);
  double value = 0.0;
  for (std::size_t p = 0; p < table.perms.size(); ++p) {
    const bool chosen = static_cast<int>(p) == table.chosen;
    if (!chosen && !use_dl) continue;
    const double w = chosen ? 1.0 : -alpha;
    value += w * table.costs[p];
    for (int i = 0; i < sources; ++i) weight(i, table.perms[p][i]) += w;
  }
  if (table_out) *table_out = table;

  Matrix<Scalar> out(1, 1);
  out(0, 0) = Scalar(value);
  return masks.graph->make_node(
      std::move(out), {masks},
      [=, estimates = std::move(estimates)](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
        Matrix<Scalar> grad(frames, sources * bins);
        const Scalar scale = Scalar(2.0 * inv_tf) * d(0, 0);
        for (int i = 0; i < sources; ++i) {
          Matrix<Scalar> residual = Matrix<Scalar>::Zero(frames, bins);
          for (int j = 0; j < sources; ++j)
            if (weight(i, j) != 0.0) residual += Scalar(weight(i, j)) * (estimates[i] - targets[j]);
          grad.middleCols(i * bins, bins) = scale * mixture_magnitude.cwiseProduct(residual);
        }
        gr.accumulate(masks, grad);
      });
}

}  // namespace nn
}  // namespace sepkit

#endif  // SEPKIT_LOSSES_HPP
