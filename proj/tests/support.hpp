#ifndef SEPKIT_TESTS_SUPPORT_HPP
#define SEPKIT_TESTS_SUPPORT_HPP

// Independent reference implementations used as oracles by the tests.

#include "sepkit/common.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace sepkit::testing {

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                              double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

inline MatrixXd random_one_hot(std::mt19937_64& rng, Eigen::Index rows, int classes) {
  std::uniform_int_distribution<int> pick(0, classes - 1);
  MatrixXd b = MatrixXd::Zero(rows, classes);
  for (Eigen::Index i = 0; i < rows; ++i) b(i, pick(rng)) = 1.0;
  return b;
}

// ||V V^T - B B^T||_F^2 by forming both affinity matrices.
inline double dense_dc_loss(const MatrixXd& v, const MatrixXd& b) {
  const MatrixXd diff = v * v.transpose() - b * b.transpose();
  double s = 0.0;
  for (Eigen::Index i = 0; i < diff.rows(); ++i)
    for (Eigen::Index j = 0; j < diff.cols(); ++j) s += diff(i, j) * diff(i, j);
  return s;
}

struct BruteForce {
  std::vector<int> perm;
  double cost = 0.0;
  std::vector<double> all_costs;
};

// Enumerates with std::next_permutation; cost of a permutation is the sum of
// pairwise[i][perm[i]]. Keeps the first minimum.
inline BruteForce brute_force_perm(const MatrixXd& pairwise) {
  const int s = static_cast<int>(pairwise.rows());
  std::vector<int> p(s);
  std::iota(p.begin(), p.end(), 0);
  BruteForce best;
  best.cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < s; ++i) c += pairwise(i, p[i]);
    best.all_costs.push_back(c);
    if (c < best.cost) {
      best.cost = c;
      best.perm = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  return best;
}

// One-sided DFT of a single frame, O(N^2).
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& frame, int bins) {
  const int n = static_cast<int>(frame.size());
  std::vector<std::complex<double>> out(bins);
  for (int k = 0; k < bins; ++k) {
    std::complex<double> acc = 0.0;
    for (int t = 0; t < n; ++t) acc += frame[t] * std::polar(1.0, -2.0 * M_PI * k * t / n);
    out[k] = acc;
  }
  return out;
}

// Block-wise relative error ||a - n|| / max(||a||, ||n||, floor).
inline double relative_error(const MatrixXd& analytic, const MatrixXd& numeric, double floor = 1e-8) {
  const double den = std::max({analytic.norm(), numeric.norm(), floor});
  return (analytic - numeric).norm() / den;
}

// Central differences of f with respect to every entry of x (x is restored).
/// Fourth-order central difference: truncation O(h^4), so a larger step keeps
/// roundoff small even where the gradient itself is tiny.
inline MatrixXd central_difference(MatrixXd& x, const std::function<double()>& f, double h = 1e-4) {
  MatrixXd g(x.rows(), x.cols());
  auto at = [&](Eigen::Index i, Eigen::Index j, double v) {
    x(i, j) = v;
    return f();
  };
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double keep = x(i, j);
      const double d = 8.0 * (at(i, j, keep + h) - at(i, j, keep - h)) - (at(i, j, keep + 2 * h) - at(i, j, keep - 2 * h));
      x(i, j) = keep;
      g(i, j) = d / (12.0 * h);
    }
  }
  return g;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sepkit_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace sepkit::testing

#endif  // SEPKIT_TESTS_SUPPORT_HPP
