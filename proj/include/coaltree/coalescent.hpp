#pragma once

#include <string>
#include <vector>

#include "coaltree/rng.hpp"

namespace coaltree {

// One coalescence event: children are node ids, time is absolute (>= 0).
struct Merge {
  int left = -1;
  int right = -1;
  double time = 0.0;
};

// Rooted binary dendrogram over n leaves.  Leaves carry ids 0..n-1 at time 0;
// the k-th merge (0-based) creates internal node n+k.  Merge times are
// nondecreasing, so the last merge is the root.
struct Dendrogram {
  int n_leaves = 0;
  std::vector<Merge> merges;

  int n_nodes() const { return 2 * n_leaves - 1; }
  int root() const { return n_nodes() - 1; }
  bool is_leaf(int id) const { return id < n_leaves; }
  double node_time(int id) const { return is_leaf(id) ? 0.0 : merges[id - n_leaves].time; }

  // Throws DataError when the topology or time ordering is inconsistent.
  void validate() const;
};

// Exchangeable coalescent prior: stage k merges a uniformly random active pair
// after an Exponential holding time with rate (n-k+1)(n-k)/2.
double coalescent_rate(int n, int k);
Dendrogram sample_prior(int n, Rng& rng);

// Log density of the merge-time sequence (topology factor is constant across
// trees of the same size and is omitted, matching the joint-density usage).
double log_prior(const Dendrogram& tree);

// Newick with branch lengths (parent time minus child time) and zero-based
// numeric leaf names.
std::string to_newick(const Dendrogram& tree);

std::string dendrogram_to_json(const Dendrogram& tree);
Dendrogram dendrogram_from_json(const std::string& text);
Dendrogram load_dendrogram(const std::string& path);
void save_dendrogram(const std::string& path, const Dendrogram& tree);

// Leaf sets per node id, each sorted ascending.
std::vector<std::vector<int>> leaf_sets(const Dendrogram& tree);

}  // namespace coaltree
