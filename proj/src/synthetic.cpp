#include "coaltree/synthetic.hpp"

#include <cmath>

#include "coaltree/errors.hpp"

namespace coaltree {

void SyntheticSpec::validate() const {
  if (n < 2) throw ConfigError("synthetic: n must be >= 2");
  if (d < 1) throw ConfigError("synthetic: d must be >= 1");
  if (replicates < 1) throw ConfigError("synthetic: replicates must be >= 1");
}

SyntheticSpec preset_spec(const std::string& name) {
  SyntheticSpec spec;
  if (name == "d1") {
    spec.n = 32;
    spec.d = 32;
  } else if (name == "d2") {
    spec.n = 64;
    spec.d = 64;
  } else if (name == "d3") {
    spec.n = 128;
    spec.d = 128;
  } else {
    throw ConfigError("unknown preset: " + name);
  }
  spec.kind = CovarianceKind::squared_exponential;
  spec.theta.ell = spec.d / 4.0;
  spec.theta.sigma2 = 1e-9;
  spec.replicates = 50;
  return spec;
}

SyntheticInstance generate(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticInstance out;
  out.theta = spec.theta;

  Coords coords;
  if (spec.kind == CovarianceKind::matern32_grid) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(spec.d))));
    if (side * side != spec.d)
      throw ConfigError("synthetic: grid kernel needs a square feature count");
    coords.kind = Coords::Kind::grid;
    coords.grid_h = side;
    coords.grid_w = side;
  }
  CovarianceModel cov(spec.kind, spec.theta, coords, spec.d);

  Rng tree_rng = make_rng(spec.seed, stream::prior);
  out.tree = sample_prior(spec.n, tree_rng);

  // Values diffuse from the root (zero vector) toward the leaves; parents are
  // visited before children by walking merges root-first.
  std::vector<Eigen::VectorXd> value(out.tree.n_nodes());
  value[out.tree.root()] = Eigen::VectorXd::Zero(spec.d);
  Rng diff_rng = make_rng(spec.seed, stream::diffusion);
  Eigen::VectorXd z(spec.d);
  for (int k = spec.n - 2; k >= 0; --k) {
    const Merge& m = out.tree.merges[k];
    const int parent = spec.n + k;
    for (int child : {m.left, m.right}) {
      const double dt = m.time - out.tree.node_time(child);
      for (int j = 0; j < spec.d; ++j) z[j] = normal01(diff_rng);
      value[child] = value[parent] + std::sqrt(std::max(0.0, dt)) * cov.correlate(z);
    }
  }

  out.data.x.resize(spec.n, spec.d);
  for (int i = 0; i < spec.n; ++i) out.data.x.row(i) = value[i];
  out.data.coords = coords;
  return out;
}

}  // namespace coaltree
