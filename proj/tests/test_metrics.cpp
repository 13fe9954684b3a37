#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "coaltree/coalescent.hpp"
#include "coaltree/errors.hpp"
#include "coaltree/metrics.hpp"
#include "coaltree/rng.hpp"
#include "oracle_quadrature.hpp"

using namespace coaltree;

namespace {

Dendrogram caterpillar(int n, const std::vector<double>& times) {
  Dendrogram tree;
  tree.n_leaves = n;
  int carry = 0;
  for (int k = 0; k < n - 1; ++k) {
    tree.merges.push_back({carry, k + 1, times[static_cast<std::size_t>(k)]});
    carry = n + k;
  }
  tree.validate();
  return tree;
}

// Single-linkage agglomeration on a precomputed dissimilarity matrix; merge
// heights of an ultrametric input reproduce the generating tree's times.
std::vector<double> single_linkage_heights(Eigen::MatrixXd d) {
  const int n = static_cast<int>(d.rows());
  std::vector<int> active(n);
  for (int i = 0; i < n; ++i) active[i] = i;
  std::vector<double> heights;
  while (active.size() > 1) {
    int bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active.size(); ++a)
      for (std::size_t b = a + 1; b < active.size(); ++b)
        if (d(active[a], active[b]) < best) {
          best = d(active[a], active[b]);
          bi = static_cast<int>(a);
          bj = static_cast<int>(b);
        }
    const int keep = active[bi], gone = active[bj];
    heights.push_back(best);
    for (int other : active)
      if (other != keep && other != gone) {
        const double m = std::min(d(keep, other), d(gone, other));
        d(keep, other) = d(other, keep) = m;
      }
    active.erase(active.begin() + bj);
  }
  std::sort(heights.begin(), heights.end());
  return heights;
}

}  // namespace

TEST_CASE("distance matrix: two leaves and hand caterpillar") {
  Dendrogram two;
  two.n_leaves = 2;
  two.merges.push_back({0, 1, 0.7});
  const Eigen::MatrixXd d2 = tree_distance_matrix(two);
  CHECK(d2(0, 0) == 0.0);
  CHECK(d2(1, 1) == 0.0);
  CHECK(d2(0, 1) == 0.7);
  CHECK(d2(1, 0) == 0.7);

  const Dendrogram cat = caterpillar(3, {0.2, 0.9});
  const Eigen::MatrixXd d3 = tree_distance_matrix(cat);
  CHECK(d3(0, 1) == 0.2);
  CHECK(d3(0, 2) == 0.9);
  CHECK(d3(1, 2) == 0.9);
  CHECK(d3.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK((d3 - d3.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("distance matrix is ultrametric on random prior trees") {
  for (int rep = 0; rep < 100; ++rep) {
    auto rng = make_rng(4200 + rep, stream::prior, 0);
    const int n = 3 + static_cast<int>(uniform_index(rng, 8));
    const Dendrogram tree = sample_prior(n, rng);
    const Eigen::MatrixXd d = tree_distance_matrix(tree);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          // Max over the three sides must be attained at least twice.
          const double a = d(i, j), b = d(i, k), c = d(j, k);
          const double mx = std::max({a, b, c});
          int hits = 0;
          for (double side : {a, b, c})
            if (std::fabs(side - mx) <= 1e-12 * std::max(1.0, mx)) ++hits;
          CHECK(hits >= 2);
        }
  }
}

TEST_CASE("single linkage on the cophenetic matrix recovers merge times") {
  for (int rep = 0; rep < 20; ++rep) {
    auto rng = make_rng(9900 + rep, stream::prior, 0);
    const int n = 3 + static_cast<int>(uniform_index(rng, 14));
    const Dendrogram tree = sample_prior(n, rng);
    std::vector<double> truth;
    for (const Merge& m : tree.merges) truth.push_back(m.time);
    std::sort(truth.begin(), truth.end());
    const std::vector<double> rebuilt = single_linkage_heights(tree_distance_matrix(tree));
    REQUIRE(rebuilt.size() == truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i)
      CHECK(rebuilt[i] == doctest::Approx(truth[i]).epsilon(1e-12));
  }
}

TEST_CASE("error triple: exact zero, unit log ratio, mab >= mae") {
  const std::vector<double> truth{0.4, 1.7, 3.2};
  const ErrorTriple same = error_triple(truth, truth);
  CHECK(same.mse == 0.0);
  CHECK(same.mae == 0.0);
  CHECK(same.mab == 0.0);

  const double e = std::exp(1.0);
  std::vector<double> scaled = truth;
  for (double& v : scaled) v *= e;
  const ErrorTriple unit = error_triple(scaled, truth);
  CHECK(unit.mse == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(unit.mae == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(unit.mab == doctest::Approx(1.0).epsilon(1e-12));

  auto rng = make_rng(31, stream::hyper, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> est(6), tru(6);
    for (int i = 0; i < 6; ++i) {
      est[static_cast<std::size_t>(i)] = std::exp(2.0 * uniform01(rng) - 1.0);
      tru[static_cast<std::size_t>(i)] = std::exp(2.0 * uniform01(rng) - 1.0);
    }
    const ErrorTriple t = error_triple(est, tru);
    CHECK(t.mab >= t.mae);
    CHECK(t.mse >= 0.0);
  }
}

TEST_CASE("error triple on matrices uses off-diagonal entries only") {
  // Diagonals are zero (log undefined); matrix overload must not touch them.
  const Dendrogram cat = caterpillar(3, {0.2, 0.9});
  const Eigen::MatrixXd truth = tree_distance_matrix(cat);
  Eigen::MatrixXd est = truth;
  est(0, 1) = est(1, 0) = truth(0, 1) * std::exp(0.5);
  const ErrorTriple t = error_triple(est, truth);
  CHECK(t.mab == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.mae == doctest::Approx(0.5 / 3.0).epsilon(1e-12));
  CHECK(t.mse == doctest::Approx(0.25 / 3.0).epsilon(1e-12));
}

TEST_CASE("error triple rejects bad input") {
  const std::vector<double> truth{1.0, 2.0};
  CHECK_THROWS_AS(error_triple(std::vector<double>{1.0, 0.0}, truth), DataError);
  CHECK_THROWS_AS(error_triple(std::vector<double>{1.0, -2.0}, truth), DataError);
  CHECK_THROWS_AS(error_triple(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 0.0}),
                  DataError);
  CHECK_THROWS_AS(error_triple(std::vector<double>{1.0}, truth), DataError);
  CHECK_THROWS_AS(error_triple(Eigen::MatrixXd::Ones(2, 2), Eigen::MatrixXd::Ones(3, 3)),
                  DataError);
  CHECK_THROWS_AS(error_triple(Eigen::MatrixXd::Ones(2, 3), Eigen::MatrixXd::Ones(2, 3)),
                  DataError);
}

TEST_CASE("error triple from log matches plain version on exponentiated input") {
  auto rng = make_rng(77, stream::hyper, 3);
  std::vector<double> log_est(5), truth(5);
  for (int i = 0; i < 5; ++i) {
    log_est[static_cast<std::size_t>(i)] = 3.0 * uniform01(rng) - 1.5;
    truth[static_cast<std::size_t>(i)] = std::exp(3.0 * uniform01(rng) - 1.5);
  }
  std::vector<double> est(5);
  for (int i = 0; i < 5; ++i)
    est[static_cast<std::size_t>(i)] = std::exp(log_est[static_cast<std::size_t>(i)]);
  const ErrorTriple a = error_triple_from_log(log_est, truth);
  const ErrorTriple b = error_triple(est, truth);
  CHECK(a.mse == doctest::Approx(b.mse).epsilon(1e-12));
  CHECK(a.mae == doctest::Approx(b.mae).epsilon(1e-12));
  CHECK(a.mab == doctest::Approx(b.mab).epsilon(1e-12));

  // Log estimates may be negative but must be finite; truth still positive.
  CHECK_THROWS_AS(
      error_triple_from_log(std::vector<double>{-std::numeric_limits<double>::infinity(), 0.0},
                            std::vector<double>{1.0, 1.0}),
      DataError);
  CHECK_THROWS_AS(
      error_triple_from_log(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 0.0}),
      DataError);
}

TEST_CASE("subtree score: sorted caterpillar, fully mixed tree, degenerate labels") {
  // Two classes of two, classes merged internally before the root.
  Dendrogram sorted;
  sorted.n_leaves = 4;
  sorted.merges.push_back({0, 1, 0.1});
  sorted.merges.push_back({2, 3, 0.2});
  sorted.merges.push_back({4, 5, 0.3});
  CHECK(subtree_score(sorted, {0, 0, 1, 1}) == doctest::Approx(1.0));

  // Every internal node mixes the two classes.
  CHECK(subtree_score(sorted, {0, 1, 0, 1}) == doctest::Approx(0.0));

  // One of the two internal cherries is pure; C stays 2 so n - C = 2.
  CHECK(subtree_score(sorted, {0, 0, 0, 1}) == doctest::Approx(0.5));

  CHECK_THROWS_AS(subtree_score(sorted, {0, 1, 2, 3}), DataError);
  CHECK_THROWS_AS(subtree_score(sorted, {0, 0, 1}), DataError);
}

TEST_CASE("adjusted Rand index: fixed points and relabeling") {
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
  CHECK(adjusted_rand_index({0, 0, 1, 1}, {7, 7, -3, -3}) == 1.0);

  // Closed-form pair counting for (0,0,1,1) vs (0,1,0,1): every pair lands in
  // a different cell, so agreement is at chance level.
  const double v = adjusted_rand_index({0, 0, 1, 1}, {0, 1, 0, 1});
  CHECK(v == doctest::Approx(oracle::ari_pairs({0, 0, 1, 1}, {0, 1, 0, 1})).epsilon(1e-12));
  CHECK(v == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("adjusted Rand index agrees with exhaustive pair counting") {
  auto rng = make_rng(555, stream::hyper, 9);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 2 + static_cast<int>(uniform_index(rng, 12));
    const int ka = 1 + static_cast<int>(uniform_index(rng, 4));
    const int kb = 1 + static_cast<int>(uniform_index(rng, 4));
    std::vector<int> a(static_cast<std::size_t>(n)), b(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(ka)));
      b[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(kb)));
    }
    const double mine = adjusted_rand_index(a, b);
    const double ref = oracle::ari_pairs(a, b);
    CHECK_MESSAGE(mine == doctest::Approx(ref).epsilon(1e-10),
                  "rep=" << rep << " n=" << n << " mine=" << mine << " ref=" << ref);
    CHECK(adjusted_rand_index(b, a) == doctest::Approx(mine).epsilon(1e-12));
  }
}

TEST_CASE("adjusted Rand index degenerate partitions") {
  // Both sides trivial: identical structure, index 1 by convention.
  CHECK(adjusted_rand_index({3, 3, 3}, {5, 5, 5}) == 1.0);
  CHECK(adjusted_rand_index({0, 1, 2}, {5, 9, 4}) == 1.0);
  // Constant vs non-constant: chance-level agreement.
  CHECK(adjusted_rand_index({0, 0, 0, 0}, {0, 0, 1, 1}) == 0.0);
  CHECK_THROWS_AS(adjusted_rand_index({0, 1}, {0, 1, 2}), DataError);
  CHECK_THROWS_AS(adjusted_rand_index({}, {}), DataError);
}

TEST_CASE("ARI curve: anchors, majority ties, and hand AUC") {
  // Labels (0,0,1) on a caterpillar ((0,1),2): the two-cluster cut already
  // reproduces the truth, so the curve is 0, 1, 1 over N_c = 1, 2, 3.
  const Dendrogram cat = caterpillar(3, {0.2, 0.9});
  const AriCurve curve = ari_curve_auc(cat, {0, 0, 1});
  REQUIRE(curve.points.size() == 3);
  CHECK(curve.points[0].first == 1);
  CHECK(curve.points[0].second == 0.0);
  CHECK(curve.points[1].first == 2);
  CHECK(curve.points[1].second == 1.0);
  CHECK(curve.points[2].first == 3);
  CHECK(curve.points[2].second == 1.0);
  CHECK(curve.auc == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("ARI curve anchors hold on random labeled prior trees") {
  auto rng = make_rng(8181, stream::prior, 1);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 4 + static_cast<int>(uniform_index(rng, 10));
    const Dendrogram tree = sample_prior(n, rng);
    std::vector<int> labels(static_cast<std::size_t>(n));
    bool constant = true;
    for (int i = 0; i < n; ++i) {
      labels[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, 3));
      if (labels[static_cast<std::size_t>(i)] != labels[0]) constant = false;
    }
    if (constant) labels[0] ^= 1;
    const AriCurve curve = ari_curve_auc(tree, labels);
    REQUIRE(static_cast<int>(curve.points.size()) == n);
    for (int j = 0; j < n; ++j) CHECK(curve.points[static_cast<std::size_t>(j)].first == j + 1);
    CHECK(curve.points.front().second == 0.0);   // one cluster: constant labeling
    CHECK(curve.points.back().second == 1.0);    // n clusters: exact relabeling
    CHECK(curve.auc >= 0.0);
    CHECK(curve.auc <= 1.0);
  }
}

TEST_CASE("ARI curve majority vote breaks ties toward the smallest label") {
  // Cherry {0,1} holds one leaf of each class; the tie must resolve to label
  // 0, so the two-cluster cut predicts (0,0,1) against truth (1,0,1).
  const Dendrogram cat = caterpillar(3, {0.2, 0.9});
  const AriCurve curve = ari_curve_auc(cat, {1, 0, 1});
  const double expected = adjusted_rand_index({0, 0, 1}, {1, 0, 1});
  CHECK(curve.points[1].second == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ARI AUC separates class-sorted trees from scrambled ones") {
  // Same labels, same merge times: a tree that groups classes first scores a
  // strictly higher AUC than one that interleaves them.
  Dendrogram sorted;
  sorted.n_leaves = 6;
  sorted.merges.push_back({0, 1, 0.1});
  sorted.merges.push_back({2, 3, 0.2});
  sorted.merges.push_back({4, 5, 0.3});
  sorted.merges.push_back({6, 7, 0.4});
  sorted.merges.push_back({8, 9, 0.5});

  Dendrogram scrambled;
  scrambled.n_leaves = 6;
  scrambled.merges.push_back({0, 3, 0.1});
  scrambled.merges.push_back({1, 4, 0.2});
  scrambled.merges.push_back({2, 5, 0.3});
  scrambled.merges.push_back({6, 7, 0.4});
  scrambled.merges.push_back({8, 9, 0.5});

  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const AriCurve good = ari_curve_auc(sorted, labels);
  const AriCurve bad = ari_curve_auc(scrambled, labels);
  CHECK(good.auc > bad.auc);
  CHECK(good.auc > 0.75);
}
