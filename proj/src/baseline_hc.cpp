#include "coaltree/baseline_hc.hpp"

#include <limits>
#include <vector>

#include "coaltree/errors.hpp"

namespace coaltree {

// Average-linkage agglomeration via Lance-Williams updates over euclidean
// distances; merge heights are the linkage distances.
Dendrogram average_link(const Dataset& data) {
  const int n = data.n();
  if (n < 2) throw DataError("average_link: need at least two rows");
  const int total = 2 * n - 1;
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(total, total);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = (data.x.row(i) - data.x.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }

  std::vector<int> active(n);
  for (int i = 0; i < n; ++i) active[i] = i;
  std::vector<double> size(total, 1.0);

  Dendrogram tree;
  tree.n_leaves = n;
  for (int k = 1; k <= n - 1; ++k) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j)
        if (dist(active[i], active[j]) < best) {
          best = dist(active[i], active[j]);
          bi = i;
          bj = j;
        }
    const int a = active[bi];
    const int b = active[bj];
    const int node = n + k - 1;
    for (int c : active) {
      if (c == a || c == b) continue;
      const double d =
          (size[a] * dist(a, c) + size[b] * dist(b, c)) / (size[a] + size[b]);
      dist(node, c) = d;
      dist(c, node) = d;
    }
    size[node] = size[a] + size[b];
    tree.merges.push_back({a, b, best});
    active.erase(active.begin() + bj);
    active.erase(active.begin() + bi);
    active.push_back(node);
  }
  return tree;
}

}  // namespace coaltree
