#include "sepkit/datagen.hpp"
#include "sepkit/losses.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace sepkit;
using namespace sepkit::testing;

namespace {

struct PsaInstance {
  MatrixXd magnitude;
  std::vector<MatrixXd> targets;
  MatrixXd masks;  // T x (S F)
};

PsaInstance random_psa(std::mt19937_64& rng, int t, int f, int s) {
  PsaInstance p;
  p.magnitude = random_matrix(rng, t, f, 0.1, 2.0);
  for (int i = 0; i < s; ++i) p.targets.push_back(random_matrix(rng, t, f, -1.0, 2.0));
  p.masks = random_matrix(rng, t, s * f, 0.0, 1.5);
  return p;
}

double objective_value(const PsaInstance& p, const MatrixXd& masks, double alpha, bool use_dl) {
  nn::Graph<double> g(false);
  return nn::permutation_objective(g.constant(masks), p.magnitude, p.targets, alpha, use_dl).value()(0, 0);
}

// Permutation costs straight from the definition, for an explicit mask split.
double direct_cost(const PsaInstance& p, const MatrixXd& masks, const std::vector<int>& perm) {
  const Eigen::Index f = p.magnitude.cols();
  double c = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (Eigen::Index r = 0; r < p.magnitude.rows(); ++r)
      for (Eigen::Index k = 0; k < f; ++k) {
        const double e = p.magnitude(r, k) * masks(r, i * f + k) - p.targets[perm[i]](r, k);
        c += e * e;
      }
  return c / static_cast<double>(p.magnitude.size());
}

}  // namespace

TEST_SUITE("losses") {
TEST_CASE("dc_loss examples") {
  MatrixXd b = MatrixXd::Identity(2, 2);
  MatrixXd v(2, 1);
  v << 1, 1;
  CHECK(dc_loss(v, b, false) == doctest::Approx(2.0));
  CHECK(dc_loss(v, b, true) == doctest::Approx(0.5));
  std::mt19937_64 rng(1);
  const MatrixXd one_hot = random_one_hot(rng, 30, 3);
  CHECK(dc_loss(one_hot, one_hot, false) == 0.0);
}

TEST_CASE("dc_loss low-rank form matches the dense affinity form") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> tf(2, 64), d(1, 6), c(2, 3);
    const int n = tf(rng);
    const MatrixXd v = random_matrix(rng, n, d(rng));
    const MatrixXd b = random_one_hot(rng, n, c(rng));
    const double dense = dense_dc_loss(v, b);
    CHECK(std::abs(dc_loss(v, b, false) - dense) <= 1e-9 * std::max(dense, 1e-300));
    CHECK(dc_loss(v, b, false) >= 0.0);
  }
}

TEST_CASE("dc_loss ignores the column order of B") {
  std::mt19937_64 rng(3);
  const MatrixXd v = random_matrix(rng, 40, 4);
  const MatrixXd b = random_one_hot(rng, 40, 3);
  MatrixXd swapped = b;
  swapped.col(0) = b.col(2);
  swapped.col(2) = b.col(0);
  CHECK(dc_loss(v, b) == doctest::Approx(dc_loss(v, swapped)).epsilon(1e-12));
}

TEST_CASE("differentiable dc_loss agrees with the value form") {
  std::mt19937_64 rng(4);
  const int t = 3, f = 5, d = 2;
  const MatrixXd frames = random_matrix(rng, t, f * d);
  const MatrixXd b = random_one_hot(rng, t * f, 2);
  nn::Graph<double> g;
  const auto loss = nn::dc_loss(g.constant(frames), d, b);
  MatrixXd v(t * f, d);
  for (int r = 0; r < t; ++r)
    for (int k = 0; k < f; ++k)
      for (int e = 0; e < d; ++e) v(r * f + k, e) = frames(r, k * d + e);
  CHECK(loss.value()(0, 0) == doctest::Approx(dense_dc_loss(v, b) / double(t * f * t * f)).epsilon(1e-12));
}

TEST_CASE("permutation enumeration") {
  CHECK(all_permutations(1).size() == 1);
  CHECK(all_permutations(3).size() == 6);
  CHECK(all_permutations(3)[1] == Permutation{0, 2, 1});
  CHECK(all_permutations(6).size() == 720);
  try {
    all_permutations(7);
    FAIL("expected UnsupportedSourceCount");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedSourceCount);
  }
}

TEST_CASE("find_best_perm agrees with brute force and relabels consistently") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int s = 2 + trial % 2;
    const MatrixXd pairwise = random_matrix(rng, s, s, 0.0, 1.0);
    const auto table = permutation_table(pairwise);
    const auto brute = brute_force_perm(pairwise);
    CHECK(table.perms[table.chosen] == brute.perm);
    CHECK(table.chosen_cost() == doctest::Approx(brute.cost).epsilon(1e-14));

    // Reordering the outputs by sigma reorders the chosen assignment the same way.
    std::vector<int> sigma(s);
    std::iota(sigma.begin(), sigma.end(), 0);
    std::shuffle(sigma.begin(), sigma.end(), rng);
    MatrixXd relabeled(s, s);
    for (int i = 0; i < s; ++i) relabeled.row(i) = pairwise.row(sigma[i]);
    const auto t2 = permutation_table(relabeled);
    CHECK(t2.chosen_cost() == doctest::Approx(table.chosen_cost()).epsilon(1e-14));
    for (int i = 0; i < s; ++i) CHECK(t2.perms[t2.chosen][i] == table.perms[table.chosen][sigma[i]]);
  }
}

TEST_CASE("ties resolve to the first permutation") {
  const auto table = permutation_table(MatrixXd::Ones(3, 3));
  CHECK(table.chosen == 0);
}

TEST_CASE("psa_cost on spectrograms") {
  const auto a = synth_source(make_speaker_profile("a", 1), 0.5, 1);
  const auto b = synth_source(make_speaker_profile("b", 2), 0.5, 2);
  const auto u = mix(a, b, 1.0);
  const auto y = stft(u.mixture);
  const std::vector<Spectrogram> src = {stft(u.references[0]), stft(u.references[1])};
  const auto m = ipsm(src, y);

  CHECK(psa_cost(m, y, src, {0, 1}) < 1e-10);
  CHECK(psa_cost(m, y, src, {1, 0}) > 1e-3);

  const MaskSet zero{{MatrixXd::Zero(y.frames(), y.bins()), MatrixXd::Zero(y.frames(), y.bins())}, MaskKind::estimated};
  double expected = 0.0;
  for (const auto& s : src) expected += psa_target(s, y).squaredNorm();
  expected /= static_cast<double>(y.magnitude.size());
  CHECK(psa_cost(zero, y, src, {0, 1}) == doctest::Approx(expected).epsilon(1e-12));

  MaskSet swapped{{m.masks[1], m.masks[0]}, MaskKind::ipsm};
  CHECK(psa_cost(swapped, y, src, {1, 0}) == doctest::Approx(psa_cost(m, y, src, {0, 1})).epsilon(1e-12));

  CHECK(find_best_perm(m, y, src).chosen == 0);
  CHECK(find_best_perm(swapped, y, src).perms[find_best_perm(swapped, y, src).chosen] == Permutation{1, 0});
  const auto table = find_best_perm(m, y, src);
  CHECK(table.costs[1] == doctest::Approx(psa_cost(m, y, src, {1, 0})).epsilon(1e-12));
}

TEST_CASE("dl_loss arithmetic") {
  MatrixXd pairwise(2, 2);
  pairwise << 0.5, 2.0, 2.0, 0.5;
  const auto table = permutation_table(pairwise);
  CHECK(table.chosen_cost() == 1.0);
  CHECK(dl_loss(table, 0.1) == doctest::Approx(0.6));
  CHECK(dl_loss(table, 0.0) == table.chosen_cost());
  CHECK(table.separation_gap() == doctest::Approx(3.0));

  std::mt19937_64 rng(6);
  const MatrixXd p3 = random_matrix(rng, 3, 3, 0.0, 1.0);
  const auto t3 = permutation_table(p3);
  const auto brute = brute_force_perm(p3);
  double others = -brute.cost;
  for (double c : brute.all_costs) others += c;
  CHECK(dl_loss(t3, 0.1) == doctest::Approx(brute.cost - 0.1 * others).epsilon(1e-12));
  double prev = dl_loss(t3, 0.0);
  for (double alpha : {0.05, 0.1, 0.5, 1.0}) {
    CHECK(dl_loss(t3, alpha) <= prev);
    prev = dl_loss(t3, alpha);
  }
}

TEST_CASE("joint_loss arithmetic and degenerate weights") {
  MatrixXd pairwise(2, 2);
  pairwise << 1.0, 3.0, 2.0, 1.0;
  const auto table = permutation_table(pairwise);
  CHECK(table.chosen_cost() == 2.0);
  CHECK(joint_loss(10.0, table, 0.05, 0.1, false).total == doctest::Approx(2.4));
  CHECK(joint_loss(10.0, table, 1.0, 0.1, false).total == 10.0);
  CHECK(joint_loss(10.0, table, 1.0, 0.1, true).total == 10.0);
  const auto r = joint_loss(10.0, table, 0.0, 0.1, true);
  CHECK(r.total == r.j_dl());
  CHECK(r.j_dl() == doctest::Approx(2.0 - 0.1 * 5.0));
  CHECK_THROWS_AS(joint_loss(1.0, table, 1.5, 0.1, false), Error);
}

TEST_CASE("permutation_objective value matches the definition") {
  std::mt19937_64 rng(7);
  for (int s : {2, 3}) {
    const auto p = random_psa(rng, 4, 5, s);
    PermutationTable table;
    nn::Graph<double> g(false);
    const double v =
        nn::permutation_objective(g.constant(p.masks), p.magnitude, p.targets, 0.1, true, &table).value()(0, 0);
    double chosen = std::numeric_limits<double>::infinity(), total = 0.0;
    for (const auto& perm : all_permutations(s)) {
      const double c = direct_cost(p, p.masks, perm);
      chosen = std::min(chosen, c);
      total += c;
    }
    CHECK(v == doctest::Approx(chosen - 0.1 * (total - chosen)).epsilon(1e-12));
    CHECK(objective_value(p, p.masks, 0.0, true) == objective_value(p, p.masks, 0.0, false));
  }
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int s = 2 + trial % 2;
    auto p = random_psa(rng, 3, 4, s);
    const bool use_dl = trial % 4 >= 2;
    nn::Graph<double> g;
    auto m = g.constant(p.masks);
    // Promote to a gradient-tracking leaf via a parameter set.
    nn::ParameterSet<double> ps;
    ps.add("masks", p.masks);
    m = g.parameter(ps, 0);
    g.backward(nn::permutation_objective(m, p.magnitude, p.targets, 0.1, use_dl));
    const MatrixXd analytic = g.grad(m);
    MatrixXd x = p.masks;
    const MatrixXd numeric = central_difference(x, [&] { return objective_value(p, x, 0.1, use_dl); });
    CHECK(relative_error(analytic, numeric) < 1e-4);
  }
  for (int trial = 0; trial < 20; ++trial) {
    const int t = 2 + trial % 3, f = 3, d = 2 + trial % 3;
    nn::ParameterSet<double> ps;
    ps.add("frames", random_matrix(rng, t, f * d));
    const MatrixXd b = random_one_hot(rng, t * f, 2);
    nn::Graph<double> g;
    auto v = g.parameter(ps, 0);
    g.backward(nn::dc_loss(v, d, b));
    MatrixXd x = ps.values[0];
    const MatrixXd numeric = central_difference(x, [&] {
      nn::Graph<double> h(false);
      return nn::dc_loss(h.constant(x), d, b).value()(0, 0);
    });
    CHECK(relative_error(g.grad(v), numeric) < 1e-4);
  }
}
}
