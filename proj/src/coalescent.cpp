#include "coaltree/coalescent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "coaltree/dataset.hpp"
#include "coaltree/errors.hpp"

namespace coaltree {

namespace {
using ordered_json = nlohmann::ordered_json;
constexpr double kTimeSlack = 1e-12;
}  // namespace

void Dendrogram::validate() const {
  if (n_leaves < 2) throw DataError("dendrogram: need at least 2 leaves");
  if (static_cast<int>(merges.size()) != n_leaves - 1)
    throw DataError("dendrogram: expected " + std::to_string(n_leaves - 1) + " merges");
  std::vector<int> child_count(n_nodes(), 0);
  double t_prev = 0.0;
  for (int k = 0; k < static_cast<int>(merges.size()); ++k) {
    const Merge& m = merges[k];
    const int created = n_leaves + k;
    if (m.left < 0 || m.right < 0 || m.left >= created || m.right >= created ||
        m.left == m.right)
      throw DataError("dendrogram: merge " + std::to_string(k) + " has invalid children");
    ++child_count[m.left];
    ++child_count[m.right];
    if (m.time < t_prev - kTimeSlack)
      throw DataError("dendrogram: merge times decrease at merge " + std::to_string(k));
    t_prev = std::max(t_prev, m.time);
  }
  for (int id = 0; id < n_nodes() - 1; ++id)
    if (child_count[id] != 1)
      throw DataError("dendrogram: node " + std::to_string(id) + " is child of " +
                      std::to_string(child_count[id]) + " merges");
  if (child_count[n_nodes() - 1] != 0) throw DataError("dendrogram: root has a parent");
}

double coalescent_rate(int n, int k) {
  return 0.5 * static_cast<double>(n - k + 1) * static_cast<double>(n - k);
}

Dendrogram sample_prior(int n, Rng& rng) {
  if (n < 2) throw DataError("sample_prior: need n >= 2");
  Dendrogram tree;
  tree.n_leaves = n;
  tree.merges.reserve(n - 1);
  std::vector<int> active(n);
  for (int i = 0; i < n; ++i) active[i] = i;
  double t = 0.0;
  for (int k = 1; k <= n - 1; ++k) {
    t += exponential(rng, coalescent_rate(n, k));
    const int m = static_cast<int>(active.size());
    // unrank a uniform unordered pair (a, b), a < b
    std::uint64_t idx = uniform_index(rng, static_cast<std::uint64_t>(m) * (m - 1) / 2);
    int a = 0;
    while (idx >= static_cast<std::uint64_t>(m - 1 - a)) {
      idx -= m - 1 - a;
      ++a;
    }
    const int b = a + 1 + static_cast<int>(idx);
    Merge merge;
    merge.left = std::min(active[a], active[b]);
    merge.right = std::max(active[a], active[b]);
    merge.time = t;
    // replace the smaller slot with the new node, drop the larger slot
    active[a] = n + k - 1;
    active.erase(active.begin() + b);
    tree.merges.push_back(merge);
  }
  return tree;
}

double log_prior(const Dendrogram& tree) {
  tree.validate();
  const int n = tree.n_leaves;
  double t_prev = 0.0;
  double total = 0.0;
  for (int k = 1; k <= n - 1; ++k) {
    const double delta = tree.merges[k - 1].time - t_prev;
    if (delta < -kTimeSlack) throw DataError("log_prior: merge times not increasing");
    total -= coalescent_rate(n, k) * std::max(0.0, delta);
    t_prev = tree.merges[k - 1].time;
  }
  return total;
}

std::string to_newick(const Dendrogram& tree) {
  tree.validate();
  const int n = tree.n_leaves;
  std::vector<std::string> rendered(tree.n_nodes());
  for (int i = 0; i < n; ++i) rendered[i] = std::to_string(i);
  for (int k = 0; k < n - 1; ++k) {
    const Merge& m = tree.merges[k];
    const double t = m.time;
    rendered[n + k] = "(" + rendered[m.left] + ":" +
                      format_double(t - tree.node_time(m.left)) + "," + rendered[m.right] +
                      ":" + format_double(t - tree.node_time(m.right)) + ")";
  }
  return rendered[tree.root()] + ";";
}

std::string dendrogram_to_json(const Dendrogram& tree) {
  ordered_json j;
  j["n_leaves"] = tree.n_leaves;
  ordered_json merges = ordered_json::array();
  for (const Merge& m : tree.merges) {
    ordered_json e;
    e["left"] = m.left;
    e["right"] = m.right;
    e["time"] = m.time;
    merges.push_back(e);
  }
  j["merges"] = merges;
  return j.dump(2) + "\n";
}

Dendrogram dendrogram_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad dendrogram json: ") + e.what());
  }
  Dendrogram tree;
  try {
    tree.n_leaves = j.at("n_leaves").get<int>();
    for (const auto& e : j.at("merges")) {
      Merge m;
      m.left = e.at("left").get<int>();
      m.right = e.at("right").get<int>();
      m.time = e.at("time").get<double>();
      tree.merges.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad dendrogram json: ") + e.what());
  }
  tree.validate();
  return tree;
}

Dendrogram load_dendrogram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return dendrogram_from_json(ss.str());
}

void save_dendrogram(const std::string& path, const Dendrogram& tree) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << dendrogram_to_json(tree);
}

std::vector<std::vector<int>> leaf_sets(const Dendrogram& tree) {
  std::vector<std::vector<int>> sets(tree.n_nodes());
  for (int i = 0; i < tree.n_leaves; ++i) sets[i] = {i};
  for (int k = 0; k < static_cast<int>(tree.merges.size()); ++k) {
    const Merge& m = tree.merges[k];
    const std::vector<int>& a = sets[m.left];
    const std::vector<int>& b = sets[m.right];
    std::vector<int>& out = sets[tree.n_leaves + k];
    out.resize(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  }
  return sets;
}

}  // namespace coaltree
