#include "sepkit/clustering.hpp"

#include <limits>
#include <random>

namespace sepkit {
namespace {

// Assigns every row to its nearest centroid; returns the inertia.
double assign(const MatrixXd& points, const MatrixXd& centroids, std::vector<int>& labels, VectorXd& dist) {
  const VectorXd centroid_norms = centroids.rowwise().squaredNorm();
  const MatrixXd cross = points * centroids.transpose();
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double pn = points.row(i).squaredNorm();
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = std::max(0.0, pn - 2.0 * cross(i, c) + centroid_norms[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    labels[i] = best;
    dist[i] = best_d;
    inertia += best_d;
  }
  return inertia;
}

}  // namespace

KMeansResult kmeans(const MatrixXd& points, int k, std::uint64_t seed, int max_iter, double tol) {
  require(k >= 1, ErrorCode::InvalidConfig, "k must be positive");
  require(points.rows() >= k, ErrorCode::InvalidConfig, "k exceeds the number of points");
  require(max_iter >= 1, ErrorCode::InvalidConfig, "max_iter must be positive");
  const Eigen::Index n = points.rows();

  // Seeding: random first centroid, then repeatedly the farthest point.
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(pick(rng));
  VectorXd nearest = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    Eigen::Index far = 0;
    nearest.maxCoeff(&far);
    centroids.row(c) = points.row(far);
    nearest = nearest.cwiseMin((points.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  KMeansResult result;
  result.assignments.assign(n, 0);
  VectorXd dist(n);
  for (int iter = 0; iter < max_iter; ++iter) {
    result.inertia = assign(points, centroids, result.assignments, dist);
    result.inertia_history.push_back(result.inertia);
    result.iterations = iter + 1;

    MatrixXd sums = MatrixXd::Zero(k, points.cols());
    std::vector<Eigen::Index> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(result.assignments[i]) += points.row(i);
      ++counts[result.assignments[i]];
    }
    MatrixXd updated = centroids;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        updated.row(c) = sums.row(c) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centroid.
      Eigen::Index far = 0;
      dist.maxCoeff(&far);
      updated.row(c) = points.row(far);
      dist[far] = 0.0;
    }
    const double shift = (updated - centroids).rowwise().norm().maxCoeff();
    centroids = std::move(updated);
    if (shift <= tol) break;
  }
  // Final labels consistent with the returned centroids.
  result.inertia = assign(points, centroids, result.assignments, dist);
  result.inertia_history.push_back(result.inertia);
  result.centroids = std::move(centroids);
  return result;
}

MaskSet masks_from_assignments(const KMeansResult& result, Eigen::Index frames, Eigen::Index bins) {
  require(static_cast<Eigen::Index>(result.assignments.size()) == frames * bins, ErrorCode::ShapeMismatch,
          "label count differs from T * F");
  const auto k = result.centroids.rows();
  MaskSet out;
  out.kind = MaskKind::binary;
  out.masks.assign(k, MatrixXd::Zero(frames, bins));
  for (Eigen::Index t = 0; t < frames; ++t)
    for (Eigen::Index f = 0; f < bins; ++f) out.masks[result.assignments[t * bins + f]](t, f) = 1.0;
  return out;
}

}  // namespace sepkit
