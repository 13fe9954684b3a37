#include "coaltree/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "coaltree/errors.hpp"

namespace coaltree {

namespace {

void accumulate(double log_est, double log_truth, double& sq, double& ab, double& mx,
                int& count) {
  const double e = log_est - log_truth;
  sq += e * e;
  ab += std::fabs(e);
  mx = std::max(mx, std::fabs(e));
  ++count;
}

ErrorTriple finish(double sq, double ab, double mx, int count) {
  if (count == 0) throw DataError("error_triple: no entries to compare");
  ErrorTriple out;
  out.mse = sq / count;
  out.mae = ab / count;
  out.mab = mx;
  return out;
}

double checked_log(double value, const char* what) {
  if (!(value > 0.0)) throw DataError(std::string("error_triple: nonpositive ") + what);
  return std::log(value);
}

double checked_log_estimate(double log_value) {
  if (!std::isfinite(log_value)) throw DataError("error_triple: log estimate entry not finite");
  return log_value;
}

void check_shapes(Eigen::Index er, Eigen::Index ec, Eigen::Index tr, Eigen::Index tc) {
  if (er != tr || ec != tc) throw DataError("error_triple: shape mismatch");
  if (er != ec) throw DataError("error_triple: matrix must be square");
  if (er < 2) throw DataError("error_triple: need at least two leaves");
}

std::vector<int> dense_labels(const std::vector<int>& v) {
  std::unordered_map<int, int> ids;
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto [it, fresh] = ids.try_emplace(v[i], static_cast<int>(ids.size()));
    (void)fresh;
    out[i] = it->second;
  }
  return out;
}

double comb2(double x) { return 0.5 * x * (x - 1.0); }

}  // namespace

Eigen::MatrixXd tree_distance_matrix(const Dendrogram& tree) {
  tree.validate();
  const int n = tree.n_leaves;
  const std::vector<std::vector<int>> sets = leaf_sets(tree);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
  for (const Merge& m : tree.merges)
    for (int a : sets[m.left])
      for (int b : sets[m.right]) {
        dist(a, b) = m.time;
        dist(b, a) = m.time;
      }
  return dist;
}

ErrorTriple error_triple(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  check_shapes(estimate.rows(), estimate.cols(), truth.rows(), truth.cols());
  double sq = 0.0, ab = 0.0, mx = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < estimate.rows(); ++i)
    for (Eigen::Index j = i + 1; j < estimate.cols(); ++j)
      accumulate(checked_log(estimate(i, j), "estimate entry"),
                 checked_log(truth(i, j), "truth entry"), sq, ab, mx, count);
  return finish(sq, ab, mx, count);
}

ErrorTriple error_triple(const std::vector<double>& estimate, const std::vector<double>& truth) {
  if (estimate.size() != truth.size()) throw DataError("error_triple: length mismatch");
  double sq = 0.0, ab = 0.0, mx = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i)
    accumulate(checked_log(estimate[i], "estimate entry"), checked_log(truth[i], "truth entry"),
               sq, ab, mx, count);
  return finish(sq, ab, mx, count);
}

ErrorTriple error_triple_from_log(const Eigen::MatrixXd& log_estimate,
                                  const Eigen::MatrixXd& truth) {
  check_shapes(log_estimate.rows(), log_estimate.cols(), truth.rows(), truth.cols());
  double sq = 0.0, ab = 0.0, mx = 0.0;
  int count = 0;
  for (Eigen::Index i = 0; i < log_estimate.rows(); ++i)
    for (Eigen::Index j = i + 1; j < log_estimate.cols(); ++j)
      accumulate(checked_log_estimate(log_estimate(i, j)),
                 checked_log(truth(i, j), "truth entry"), sq, ab, mx, count);
  return finish(sq, ab, mx, count);
}

ErrorTriple error_triple_from_log(const std::vector<double>& log_estimate,
                                  const std::vector<double>& truth) {
  if (log_estimate.size() != truth.size()) throw DataError("error_triple: length mismatch");
  double sq = 0.0, ab = 0.0, mx = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < log_estimate.size(); ++i)
    accumulate(checked_log_estimate(log_estimate[i]), checked_log(truth[i], "truth entry"), sq,
               ab, mx, count);
  return finish(sq, ab, mx, count);
}

double subtree_score(const Dendrogram& tree, const std::vector<int>& labels) {
  tree.validate();
  const int n = tree.n_leaves;
  if (static_cast<int>(labels.size()) != n)
    throw DataError("subtree_score: labels size must equal leaf count");
  std::map<int, int> distinct;
  for (int l : labels) ++distinct[l];
  const int classes = static_cast<int>(distinct.size());
  if (classes >= n)
    throw DataError("subtree_score: undefined when every leaf has its own class");
  // pure[id]: the single class below id, or -1 when mixed.
  std::vector<int> pure(tree.n_nodes(), -1);
  for (int i = 0; i < n; ++i) pure[i] = labels[i];
  int pure_internal = 0;
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    const Merge& m = tree.merges[k];
    const int pl = pure[m.left];
    const int pr = pure[m.right];
    if (pl != -1 && pl == pr) {
      pure[n + static_cast<int>(k)] = pl;
      ++pure_internal;
    }
  }
  return static_cast<double>(pure_internal) / static_cast<double>(n - classes);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DataError("adjusted_rand_index: length mismatch");
  if (a.empty()) throw DataError("adjusted_rand_index: empty labelings");
  const std::vector<int> da = dense_labels(a);
  const std::vector<int> db = dense_labels(b);
  const int ka = *std::max_element(da.begin(), da.end()) + 1;
  const int kb = *std::max_element(db.begin(), db.end()) + 1;
  std::vector<double> table(static_cast<std::size_t>(ka) * kb, 0.0);
  std::vector<double> row(ka, 0.0), col(kb, 0.0);
  for (std::size_t i = 0; i < da.size(); ++i) {
    table[static_cast<std::size_t>(da[i]) * kb + db[i]] += 1.0;
    row[da[i]] += 1.0;
    col[db[i]] += 1.0;
  }
  double sum_cells = 0.0;
  for (double c : table) sum_cells += comb2(c);
  double sum_rows = 0.0;
  for (double c : row) sum_rows += comb2(c);
  double sum_cols = 0.0;
  for (double c : col) sum_cols += comb2(c);
  const double total = comb2(static_cast<double>(a.size()));
  const double expected = sum_rows * sum_cols / total;
  const double denom = 0.5 * (sum_rows + sum_cols) - expected;
  if (std::fabs(denom) < 1e-12)
    return (sum_rows == sum_cols && sum_cells == sum_rows) ? 1.0 : 0.0;
  return (sum_cells - expected) / denom;
}

AriCurve ari_curve_auc(const Dendrogram& tree, const std::vector<int>& labels) {
  tree.validate();
  const int n = tree.n_leaves;
  if (static_cast<int>(labels.size()) != n)
    throw DataError("ari_curve_auc: labels size must equal leaf count");
  const std::vector<std::vector<int>> sets = leaf_sets(tree);
  std::vector<int> active(n);
  for (int i = 0; i < n; ++i) active[i] = i;

  AriCurve out;
  std::vector<int> est(n);
  auto record = [&](int n_clusters) {
    for (int id : active) {
      std::map<int, int> counts;
      for (int leaf : sets[id]) ++counts[labels[leaf]];
      int best_label = counts.begin()->first;
      int best_count = counts.begin()->second;
      for (const auto& [label, count] : counts)
        if (count > best_count) {
          best_label = label;
          best_count = count;
        }
      for (int leaf : sets[id]) est[leaf] = best_label;
    }
    out.points.emplace_back(n_clusters, adjusted_rand_index(est, labels));
  };

  record(n);
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    const Merge& m = tree.merges[k];
    active.erase(std::remove_if(active.begin(), active.end(),
                                [&](int id) { return id == m.left || id == m.right; }),
                 active.end());
    active.push_back(n + static_cast<int>(k));
    record(n - 1 - static_cast<int>(k));
  }
  std::reverse(out.points.begin(), out.points.end());

  double auc = 0.0;
  for (std::size_t j = 0; j + 1 < out.points.size(); ++j) {
    const double x0 = static_cast<double>(out.points[j].first - 1) / (n - 1);
    const double x1 = static_cast<double>(out.points[j + 1].first - 1) / (n - 1);
    auc += 0.5 * (out.points[j].second + out.points[j + 1].second) * (x1 - x0);
  }
  out.auc = auc;
  return out;
}

}  // namespace coaltree
