#ifndef SEPKIT_CLUSTERING_HPP
#define SEPKIT_CLUSTERING_HPP

#include "sepkit/masking.hpp"

#include <vector>

namespace sepkit {

struct KMeansResult {
  MatrixXd centroids;                  ///< k x D
  std::vector<int> assignments;        ///< one label per row of the input
  double inertia = 0.0;                ///< sum of squared distances to assigned centroids
  int iterations = 0;
  std::vector<double> inertia_history; ///< inertia after each assignment step
};

/// Lloyd iterations from farthest-point seeding (first centroid drawn with `seed`).
/// Stops when no centroid moves more than `tol` or after `max_iter` iterations.
KMeansResult kmeans(const MatrixXd& points, int k, std::uint64_t seed, int max_iter = 100, double tol = 1e-6);

/// Binary masks with mask_s(t, f) = 1 iff label(t * F + f) == s.
MaskSet masks_from_assignments(const KMeansResult& result, Eigen::Index frames, Eigen::Index bins);

}  // namespace sepkit

#endif  // SEPKIT_CLUSTERING_HPP
