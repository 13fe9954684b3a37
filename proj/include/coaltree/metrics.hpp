#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "coaltree/coalescent.hpp"

namespace coaltree {

struct ErrorTriple {
  double mse = 0.0;
  double mae = 0.0;
  double mab = 0.0;
};

// Cophenetic matrix: entry (i, j) is the merge time of the lowest common
// ancestor of leaves i and j.  Always ultrametric.
Eigen::MatrixXd tree_distance_matrix(const Dendrogram& tree);

// Log-domain errors e = log(estimate) - log(truth), reduced to
// (mean e^2, mean |e|, max |e|).  Matrix overload uses off-diagonal entries.
ErrorTriple error_triple(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);
ErrorTriple error_triple(const std::vector<double>& estimate, const std::vector<double>& truth);

// Same reductions when the estimate is already a (weight-averaged) logarithm.
ErrorTriple error_triple_from_log(const Eigen::MatrixXd& log_estimate,
                                  const Eigen::MatrixXd& truth);
ErrorTriple error_triple_from_log(const std::vector<double>& log_estimate,
                                  const std::vector<double>& truth);

// Fraction of internal nodes whose descendant leaves share one class, over
// n - C (the count in a perfectly sorted binary tree).
double subtree_score(const Dendrogram& tree, const std::vector<int>& labels);

// Hubert-Arabie adjusted Rand index.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// ARI between truth and the majority-vote labeling induced by cutting the tree
// into N_c clusters, for N_c = 1..n; AUC by trapezoid over (N_c-1)/(n-1).
struct AriCurve {
  std::vector<std::pair<int, double>> points;  // (N_c, ARI), N_c ascending
  double auc = 0.0;
};

AriCurve ari_curve_auc(const Dendrogram& tree, const std::vector<int>& labels);

}  // namespace coaltree
