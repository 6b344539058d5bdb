#include "sepkit/losses.hpp"

#include <algorithm>
#include <numeric>

namespace sepkit {

std::vector<Permutation> all_permutations(int num_sources) {
  require(num_sources >= 1, ErrorCode::UnsupportedSourceCount, "need at least one source");
  require(num_sources <= 6, ErrorCode::UnsupportedSourceCount, "exhaustive permutation search supports S <= 6");
  Permutation p(num_sources);
  std::iota(p.begin(), p.end(), 0);
  std::vector<Permutation> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

double PermutationTable::separation_gap() const {
  if (costs.size() < 2) return 0.0;
  double others = 0.0;
  for (std::size_t p = 0; p < costs.size(); ++p)
    if (static_cast<int>(p) != chosen) others += costs[p];
  return others / static_cast<double>(costs.size() - 1) - chosen_cost();
}

std::vector<MatrixXd> psa_targets(const std::vector<Spectrogram>& sources, const Spectrogram& mixture) {
  std::vector<MatrixXd> out;
  for (const auto& s : sources) out.push_back(psa_target(s, mixture));
  return out;
}

MatrixXd pairwise_psa_costs(const std::vector<MatrixXd>& masks, const MatrixXd& mixture_magnitude,
                            const std::vector<MatrixXd>& targets) {
  require(masks.size() == targets.size() && !masks.empty(), ErrorCode::ShapeMismatch,
          "mask and source counts differ");
  const auto n = static_cast<Eigen::Index>(masks.size());
  const double inv_tf = 1.0 / static_cast<double>(mixture_magnitude.size());
  MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require(masks[i].rows() == mixture_magnitude.rows() && masks[i].cols() == mixture_magnitude.cols(),
            ErrorCode::ShapeMismatch, "mask shape differs from mixture");
    const MatrixXd est = mixture_magnitude.cwiseProduct(masks[i]);
    for (Eigen::Index j = 0; j < n; ++j) {
      require(targets[j].rows() == est.rows() && targets[j].cols() == est.cols(), ErrorCode::ShapeMismatch,
              "target shape differs from mixture");
      c(i, j) = (est - targets[j]).squaredNorm() * inv_tf;
    }
  }
  return c;
}

double psa_cost(const MaskSet& masks, const Spectrogram& mixture, const std::vector<Spectrogram>& sources,
                const Permutation& perm) {
  require(masks.masks.size() == sources.size() && perm.size() == sources.size(), ErrorCode::ShapeMismatch,
          "masks, sources and permutation must have S entries");
  const double inv_tf = 1.0 / static_cast<double>(mixture.magnitude.size());
  double cost = 0.0;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    require(masks.masks[s].rows() == mixture.frames() && masks.masks[s].cols() == mixture.bins(),
            ErrorCode::ShapeMismatch, "mask shape differs from mixture");
    const MatrixXd target = psa_target(sources.at(perm[s]), mixture);
    cost += (mixture.magnitude.cwiseProduct(masks.masks[s]) - target).squaredNorm();
  }
  return cost * inv_tf;
}

PermutationTable permutation_table(const MatrixXd& pairwise) {
  require(pairwise.rows() == pairwise.cols(), ErrorCode::ShapeMismatch, "pairwise cost matrix must be square");
  PermutationTable table;
  table.perms = all_permutations(static_cast<int>(pairwise.rows()));
  for (std::size_t p = 0; p < table.perms.size(); ++p) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < pairwise.rows(); ++i) c += pairwise(i, table.perms[p][i]);
    table.costs.push_back(c);
    if (c < table.costs[table.chosen]) table.chosen = static_cast<int>(p);
  }
  return table;
}

PermutationTable find_best_perm(const MaskSet& masks, const Spectrogram& mixture,
                                const std::vector<Spectrogram>& sources) {
  require(masks.masks.size() == sources.size(), ErrorCode::ShapeMismatch, "mask and source counts differ");
  all_permutations(static_cast<int>(sources.size()));  // validates S
  return permutation_table(pairwise_psa_costs(masks.masks, mixture.magnitude, psa_targets(sources, mixture)));
}

namespace {

double non_chosen_sum(const PermutationTable& table) {
  double others = 0.0;
  for (std::size_t p = 0; p < table.costs.size(); ++p)
    if (static_cast<int>(p) != table.chosen) others += table.costs[p];
  return others;
}

}  // namespace

double dl_loss(const PermutationTable& table, double alpha) {
  require(alpha >= 0.0, ErrorCode::InvalidConfig, "alpha must be non-negative");
  return table.chosen_cost() - alpha * non_chosen_sum(table);
}

LossReport joint_loss(double j_dc, const PermutationTable& table, double lambda, double alpha, bool use_dl) {
  require(lambda >= 0.0 && lambda <= 1.0, ErrorCode::InvalidConfig, "lambda must be in [0, 1]");
  require(alpha >= 0.0, ErrorCode::InvalidConfig, "alpha must be non-negative");
  LossReport r;
  r.j_dc = j_dc;
  r.table = table;
  r.lambda = lambda;
  r.alpha = alpha;
  r.use_dl = use_dl;
  r.phi_star = table.chosen_cost();
  r.dl_term = alpha * non_chosen_sum(table);
  r.total = lambda * j_dc + (1.0 - lambda) * (use_dl ? r.j_dl() : r.phi_star);
  return r;
}

}  // namespace sepkit
