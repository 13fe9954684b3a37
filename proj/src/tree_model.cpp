#include "coaltree/tree_model.hpp"

#include <algorithm>
#include <cmath>

#include "coaltree/errors.hpp"

namespace coaltree {

namespace {
constexpr double kVarianceFloor = 1e-12;  // guards the t_k = 0 double-leaf merge
constexpr double kTimeSlack = 1e-12;
constexpr double kLog2Pi = 1.8378770664093453;
}  // namespace

NodeMessage leaf_message(const Dataset& data, int leaf) {
  if (leaf < 0 || leaf >= data.n()) throw std::invalid_argument("leaf_message: bad index");
  NodeMessage m;
  m.mean = data.x.row(leaf).transpose();
  m.variance = 0.0;
  m.created_at = 0.0;
  m.members = {leaf};
  return m;
}

double compute_r(const NodeMessage& child1, const NodeMessage& child2, double t_prev) {
  if (t_prev < child1.created_at - kTimeSlack || t_prev < child2.created_at - kTimeSlack)
    throw NumericalError("compute_r: t_prev precedes a child's creation time");
  const double r = 2.0 * t_prev - child1.created_at - child2.created_at + child1.variance +
                   child2.variance;
  return std::max(0.0, r);
}

MergeResult merge_message(const NodeMessage& child1, const NodeMessage& child2, double t_k,
                          double t_prev, const CovarianceModel& cov, double cached_eps) {
  if (t_k < child1.created_at - kTimeSlack || t_k < child2.created_at - kTimeSlack)
    throw NumericalError("merge_message: t_k precedes a child's creation time");
  const int d = cov.dim();
  const double s1 = std::max(kVarianceFloor,
                             (t_k - child1.created_at) + child1.variance);
  const double s2 = std::max(kVarianceFloor,
                             (t_k - child2.created_at) + child2.variance);
  MergeResult out;
  out.v = s1 + s2;
  out.r = compute_r(child1, child2, t_prev);
  out.eps = cached_eps >= 0.0 ? cached_eps : cov.quad_form(child1.mean - child2.mean);

  const double w1 = s2 / (s1 + s2);  // = s_k / s1~
  NodeMessage& msg = out.message;
  msg.variance = s1 * s2 / (s1 + s2);
  msg.mean = w1 * child1.mean + (1.0 - w1) * child2.mean;
  msg.created_at = t_k;
  msg.members.resize(child1.members.size() + child2.members.size());
  std::merge(child1.members.begin(), child1.members.end(), child2.members.begin(),
             child2.members.end(), msg.members.begin());

  out.log_z = -0.5 * d * kLog2Pi - 0.5 * (d * std::log(out.v) + cov.log_det()) -
              out.eps / (2.0 * out.v);
  return out;
}

double tree_log_likelihood(const Dataset& data, const Dendrogram& tree,
                           const CovarianceModel& cov) {
  tree.validate();
  if (tree.n_leaves != data.n())
    throw DataError("tree_log_likelihood: tree size != data rows");
  if (cov.dim() != data.d())
    throw DataError("tree_log_likelihood: covariance dimension != data columns");
  std::vector<NodeMessage> messages(tree.n_nodes());
  for (int i = 0; i < data.n(); ++i) messages[i] = leaf_message(data, i);
  double total = 0.0;
  double t_prev = 0.0;
  for (int k = 0; k < static_cast<int>(tree.merges.size()); ++k) {
    const Merge& m = tree.merges[k];
    MergeResult res = merge_message(messages[m.left], messages[m.right], m.time, t_prev, cov);
    total += res.log_z;
    messages[tree.n_leaves + k] = std::move(res.message);
    t_prev = m.time;
  }
  return total;
}

double joint_log_density(const Dataset& data, const Dendrogram& tree,
                         const CovarianceModel& cov) {
  return log_prior(tree) + tree_log_likelihood(data, tree, cov);
}

}  // namespace coaltree
