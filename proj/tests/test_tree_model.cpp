#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "coaltree/coalescent.hpp"
#include "coaltree/errors.hpp"
#include "coaltree/kernels.hpp"
#include "coaltree/rng.hpp"
#include "coaltree/tree_model.hpp"
#include "oracle_quadrature.hpp"

using namespace coaltree;

namespace {

Dataset random_dataset(int n, int d, std::uint64_t seed, double scale = 1.0) {
  Rng rng = make_rng(seed, stream::diffusion, n, d);
  Dataset data;
  data.x.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) data.x(i, j) = scale * normal01(rng);
  return data;
}

CovarianceModel unit_phi(int d) { return {CovarianceKind::diagonal, Theta{}, {}, d}; }

CovarianceModel se_phi(int d, double ell, double sigma2) {
  Theta theta;
  theta.ell = ell;
  theta.sigma2 = sigma2;
  return {CovarianceKind::squared_exponential, theta, {}, d};
}

Dendrogram three_leaf_tree(int first_a, int first_b, double t1, double t2) {
  Dendrogram tree;
  tree.n_leaves = 3;
  const int third = 3 - first_a - first_b;
  tree.merges = {{std::min(first_a, first_b), std::max(first_a, first_b), t1},
                 {std::min(third, 3), std::max(third, 3), t2}};
  return tree;
}

NodeMessage message_at(Eigen::VectorXd mean, double variance, double created_at) {
  NodeMessage m;
  m.mean = std::move(mean);
  m.variance = variance;
  m.created_at = created_at;
  m.members = {0};
  return m;
}

}  // namespace

TEST_CASE("leaf messages") {
  const Dataset data = random_dataset(4, 3, 1);
  const NodeMessage m = leaf_message(data, 2);
  CHECK(m.mean == data.x.row(2).transpose());
  CHECK(m.variance == 0.0);
  CHECK(m.created_at == 0.0);
  CHECK(m.members == std::vector<int>{2});
  CHECK_THROWS_AS(leaf_message(data, 4), std::invalid_argument);
  CHECK_THROWS_AS(leaf_message(data, -1), std::invalid_argument);
}

TEST_CASE("compute_r") {
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  const NodeMessage c1 = message_at(zero, 0.05, 0.1);
  const NodeMessage c2 = message_at(zero, 0.02, 0.3);
  CHECK(compute_r(c1, c2, 0.3) == doctest::Approx(0.27).epsilon(1e-14));

  // two fresh leaves at the first stage: r = 0
  const NodeMessage l1 = message_at(zero, 0.0, 0.0);
  const NodeMessage l2 = message_at(zero, 0.0, 0.0);
  CHECK(compute_r(l1, l2, 0.0) == 0.0);

  // strictly increasing in t_prev with slope 2
  const double r1 = compute_r(c1, c2, 0.4);
  const double r2 = compute_r(c1, c2, 0.9);
  CHECK(r2 - r1 == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(compute_r(c1, c2, 0.05), NumericalError);
}

TEST_CASE("merge of two unit-separated leaves") {
  Dataset data;
  data.x.resize(2, 1);
  data.x << 0.0, 2.0;
  const CovarianceModel phi = unit_phi(1);
  const NodeMessage a = leaf_message(data, 0);
  const NodeMessage b = leaf_message(data, 1);
  const MergeResult res = merge_message(a, b, 1.0, 0.0, phi);

  CHECK(res.v == doctest::Approx(2.0));
  CHECK(res.r == 0.0);
  CHECK(res.eps == doctest::Approx(4.0));
  // -0.5 log(4 pi) - 1
  CHECK(res.log_z == doctest::Approx(-0.5 * std::log(4.0 * M_PI) - 1.0).epsilon(1e-14));
  CHECK(res.message.mean(0) == doctest::Approx(1.0));
  CHECK(res.message.variance == doctest::Approx(0.5));
  CHECK(res.message.created_at == 1.0);
  CHECK(res.message.members == std::vector<int>{0, 1});
}

TEST_CASE("merged mean interpolates with inverse-variance weights") {
  Eigen::VectorXd m1(2), m2(2);
  m1 << 1.0, -1.0;
  m2 << 3.0, 5.0;
  const NodeMessage c1 = message_at(m1, 0.0, 0.0);
  const NodeMessage c2 = message_at(m2, 0.25, 0.5);
  const CovarianceModel phi = unit_phi(2);
  const MergeResult res = merge_message(c1, c2, 1.0, 0.5, phi);
  const double s1 = 1.0, s2 = 0.75;  // (t - created) + variance
  const double w1 = s2 / (s1 + s2);
  CHECK(res.message.mean(0) == doctest::Approx(w1 * 1.0 + (1 - w1) * 3.0).epsilon(1e-14));
  CHECK(res.message.mean(1) == doctest::Approx(w1 * -1.0 + (1 - w1) * 5.0).epsilon(1e-14));
  CHECK(res.message.variance == doctest::Approx(s1 * s2 / (s1 + s2)).epsilon(1e-14));
  CHECK(res.v == doctest::Approx(s1 + s2).epsilon(1e-14));
}

TEST_CASE("v equals 2 delta + r along a replayed tree") {
  const Dataset data = random_dataset(6, 2, 3);
  const CovarianceModel phi = se_phi(2, 1.5, 0.01);
  Rng rng = make_rng(17, stream::prior);
  const Dendrogram tree = sample_prior(6, rng);
  std::vector<NodeMessage> messages(tree.n_nodes());
  for (int i = 0; i < 6; ++i) messages[i] = leaf_message(data, i);
  double t_prev = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Merge& m = tree.merges[k];
    const MergeResult res =
        merge_message(messages[m.left], messages[m.right], m.time, t_prev, phi);
    const double delta = m.time - t_prev;
    CHECK(res.v == doctest::Approx(2.0 * delta + res.r).epsilon(1e-12));
    messages[6 + k] = res.message;
    t_prev = m.time;
  }
}

TEST_CASE("zero-time merge survives through the variance floor") {
  Dataset data;
  data.x.resize(2, 1);
  data.x << 0.5, 0.5;
  const CovarianceModel phi = unit_phi(1);
  const MergeResult res =
      merge_message(leaf_message(data, 0), leaf_message(data, 1), 0.0, 0.0, phi);
  CHECK(std::isfinite(res.log_z));
  CHECK(res.v > 0.0);
  CHECK(res.message.variance > 0.0);
}

TEST_CASE("cached quadratic form reproduces the fresh computation bitwise") {
  const Dataset data = random_dataset(2, 4, 9);
  const CovarianceModel phi = se_phi(4, 2.0, 0.1);
  const NodeMessage a = leaf_message(data, 0);
  const NodeMessage b = leaf_message(data, 1);
  const double eps = phi.quad_form(a.mean - b.mean);
  const MergeResult fresh = merge_message(a, b, 0.7, 0.0, phi);
  const MergeResult cached = merge_message(a, b, 0.7, 0.0, phi, eps);
  CHECK(fresh.log_z == cached.log_z);
  CHECK(fresh.eps == cached.eps);
}

TEST_CASE("merge rejects times before a child's creation") {
  const Dataset data = random_dataset(2, 1, 11);
  const CovarianceModel phi = unit_phi(1);
  const NodeMessage a = message_at(data.x.row(0).transpose(), 0.1, 0.6);
  const NodeMessage b = leaf_message(data, 1);
  CHECK_THROWS_AS(merge_message(a, b, 0.5, 0.5, phi), NumericalError);
}

TEST_CASE("likelihood matches the numeric latent-node marginalization") {
  // the closed-form oracle is itself validated here, then carries the load
  // for larger n and d
  const Dataset data = random_dataset(3, 1, 23);
  const CovarianceModel phi = unit_phi(1);
  for (auto [a, b] : {std::pair{0, 1}, {0, 2}, {1, 2}}) {
    const Dendrogram tree = three_leaf_tree(a, b, 0.4, 1.1);
    const double numeric = oracle::marginal_log_likelihood_numeric(data, tree, 1.0, 160);
    const double closed = oracle::tree_log_likelihood_oracle(data, tree, phi);
    const double impl = tree_log_likelihood(data, tree, phi);
    CHECK(closed == doctest::Approx(numeric).epsilon(1e-9));
    CHECK(impl == doctest::Approx(numeric).epsilon(1e-6));
  }
  Rng rng = make_rng(29, stream::prior);
  for (int rep = 0; rep < 3; ++rep) {
    // short edges turn transition factors into near-deltas the fixed grid
    // cannot resolve, so condition the prior draw on resolvable geometry
    Dendrogram tree;
    for (;;) {
      tree = sample_prior(4, rng);
      double shortest = tree.merges.front().time;
      for (const Merge& m : tree.merges)
        for (int child : {m.left, m.right})
          shortest = std::min(shortest, m.time - tree.node_time(child));
      if (shortest > 0.12 && tree.merges.back().time < 4.0) break;
    }
    const Dataset d4 = random_dataset(4, 1, 31 + rep);
    const double numeric = oracle::marginal_log_likelihood_numeric(d4, tree, 1.0, 256);
    CHECK(oracle::tree_log_likelihood_oracle(d4, tree, phi) ==
          doctest::Approx(numeric).epsilon(1e-9));
    CHECK(tree_log_likelihood(d4, tree, phi) == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("likelihood matches the closed-form oracle across sizes and kernels") {
  Rng rng = make_rng(37, stream::prior);
  for (int rep = 0; rep < 8; ++rep) {
    const int n = 3 + rep % 5;
    const int d = 1 + rep % 3;
    const Dendrogram tree = sample_prior(n, rng);
    const Dataset data = random_dataset(n, d, 100 + rep);
    const CovarianceModel phi = se_phi(d, 0.5 + 0.4 * rep, 0.01 * rep);
    CHECK(tree_log_likelihood(data, tree, phi) ==
          doctest::Approx(oracle::tree_log_likelihood_oracle(data, tree, phi))
              .epsilon(1e-9));
  }
  // grid kernel
  Theta mt;
  mt.ell_x = 1.3;
  mt.ell_y = 2.1;
  mt.sigma2 = 1e-6;
  Coords grid;
  grid.kind = Coords::Kind::grid;
  grid.grid_h = 2;
  grid.grid_w = 2;
  const CovarianceModel matern(CovarianceKind::matern32_grid, mt, grid, 4);
  const Dendrogram tree = sample_prior(5, rng);
  const Dataset data = random_dataset(5, 4, 55);
  CHECK(tree_log_likelihood(data, tree, matern) ==
        doctest::Approx(oracle::tree_log_likelihood_oracle(data, tree, matern))
            .epsilon(1e-9));
}

TEST_CASE("diagonal covariance separates into per-column likelihoods") {
  Rng rng = make_rng(41, stream::prior);
  const Dendrogram tree = sample_prior(4, rng);
  const Dataset data = random_dataset(4, 2, 77);
  Theta theta;
  theta.diag = {0.7, 2.5};
  const CovarianceModel both(CovarianceKind::diagonal, theta, {}, 2);
  double per_column = 0.0;
  for (int j = 0; j < 2; ++j) {
    Dataset col;
    col.x = data.x.col(j);
    Theta tj;
    tj.diag = {theta.diag[j]};
    per_column += tree_log_likelihood(col, tree, {CovarianceKind::diagonal, tj, {}, 1});
  }
  CHECK(tree_log_likelihood(data, tree, both) ==
        doctest::Approx(per_column).epsilon(1e-12));
}

TEST_CASE("likelihood is invariant to leaf relabeling") {
  const int n = 5;
  const Dataset data = random_dataset(n, 2, 91);
  const CovarianceModel phi = se_phi(2, 1.0, 0.0);
  Rng rng = make_rng(43, stream::prior);
  const Dendrogram tree = sample_prior(n, rng);
  const double base = tree_log_likelihood(data, tree, phi);

  const std::vector<int> perm = {3, 0, 4, 1, 2};  // new id of old leaf i
  Dataset permuted;
  permuted.x.resize(n, 2);
  for (int i = 0; i < n; ++i) permuted.x.row(perm[i]) = data.x.row(i);
  Dendrogram relabeled = tree;
  for (Merge& m : relabeled.merges) {
    const int l = m.left < n ? perm[m.left] : m.left;
    const int r = m.right < n ? perm[m.right] : m.right;
    m.left = std::min(l, r);
    m.right = std::max(l, r);
  }
  CHECK(tree_log_likelihood(permuted, relabeled, phi) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("covariance scale and time scale trade off exactly") {
  const int n = 5, d = 3;
  const Dataset data = random_dataset(n, d, 113);
  Rng rng = make_rng(47, stream::prior);
  const Dendrogram tree = sample_prior(n, rng);
  const CovarianceModel phi = unit_phi(d);
  const double base = tree_log_likelihood(data, tree, phi);
  for (double c : {0.25, 4.0}) {
    Theta scaled;
    scaled.diag = std::vector<double>(d, c);
    const CovarianceModel cphi(CovarianceKind::diagonal, scaled, {}, d);
    Dendrogram squeezed = tree;
    for (Merge& m : squeezed.merges) m.time /= c;
    CHECK(tree_log_likelihood(data, squeezed, cphi) ==
          doctest::Approx(base).epsilon(1e-11));
  }
}

TEST_CASE("two-leaf joint density closed form") {
  Dataset data;
  data.x.resize(2, 2);
  data.x << 0.3, -1.0, 1.7, 0.5;
  Theta theta;
  theta.ell = 2.0;
  theta.sigma2 = 0.05;
  const CovarianceModel phi = se_phi(2, theta.ell, theta.sigma2);
  const double delta = 0.8;
  Dendrogram tree;
  tree.n_leaves = 2;
  tree.merges = {{0, 1, delta}};

  const Eigen::VectorXd diff = (data.x.row(0) - data.x.row(1)).transpose();
  const double log_normal = -std::log(2.0 * M_PI) -
                            0.5 * (2.0 * std::log(2.0 * delta) + phi.log_det()) -
                            phi.quad_form(diff) / (2.0 * 2.0 * delta);
  CHECK(tree_log_likelihood(data, tree, phi) == doctest::Approx(log_normal).epsilon(1e-13));
  CHECK(joint_log_density(data, tree, phi) ==
        doctest::Approx(-delta + log_normal).epsilon(1e-13));
}

TEST_CASE("joint density is prior plus likelihood") {
  Rng rng = make_rng(53, stream::prior);
  const Dendrogram tree = sample_prior(6, rng);
  const Dataset data = random_dataset(6, 2, 131);
  const CovarianceModel phi = se_phi(2, 1.0, 1e-9);
  CHECK(joint_log_density(data, tree, phi) ==
        doctest::Approx(log_prior(tree) + tree_log_likelihood(data, tree, phi))
            .epsilon(1e-14));
}

TEST_CASE("likelihood rejects mismatched shapes") {
  Rng rng = make_rng(59, stream::prior);
  const Dendrogram tree = sample_prior(4, rng);
  const Dataset wrong_rows = random_dataset(5, 2, 7);
  const Dataset data = random_dataset(4, 2, 7);
  const CovarianceModel phi2 = unit_phi(2);
  const CovarianceModel phi3 = unit_phi(3);
  CHECK_THROWS_AS(tree_log_likelihood(wrong_rows, tree, phi2), DataError);
  CHECK_THROWS_AS(tree_log_likelihood(data, tree, phi3), DataError);
}
