#pragma once

#include <Eigen/Dense>
#include <vector>

#include "coaltree/coalescent.hpp"
#include "coaltree/dataset.hpp"
#include "coaltree/kernels.hpp"

namespace coaltree {

// Gaussian summary of the subtree below a node: the belief-propagation message
// q(z | .) has mean `mean` and covariance `variance * Phi`.
struct NodeMessage {
  Eigen::VectorXd mean;
  double variance = 0.0;
  double created_at = 0.0;
  std::vector<int> members;  // sorted leaf ids
};

struct MergeResult {
  NodeMessage message;
  double log_z = 0.0;
  double v = 0.0;    // total variance of the mean difference: s1~ + s2~ = 2*delta + r
  double r = 0.0;    // 2*t_prev - t_c1 - t_c2 + s_c1 + s_c2
  double eps = 0.0;  // (m1 - m2)' Phi^{-1} (m1 - m2)
};

NodeMessage leaf_message(const Dataset& data, int leaf);

double compute_r(const NodeMessage& child1, const NodeMessage& child2, double t_prev);

// Merges two messages at absolute time t_k (with t_prev the previous merge
// time, needed for r).  When eps has already been computed for this pair, pass
// it through cached_eps to skip the quadratic form.
MergeResult merge_message(const NodeMessage& child1, const NodeMessage& child2, double t_k,
                          double t_prev, const CovarianceModel& cov,
                          double cached_eps = -1.0);

// Sum of log Z_k over the tree's merges, replayed in order.
double tree_log_likelihood(const Dataset& data, const Dendrogram& tree,
                           const CovarianceModel& cov);

double joint_log_density(const Dataset& data, const Dendrogram& tree,
                         const CovarianceModel& cov);

}  // namespace coaltree
