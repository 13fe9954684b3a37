#pragma once

#include <cstdint>
#include <string>

#include "coaltree/coalescent.hpp"
#include "coaltree/dataset.hpp"
#include "coaltree/kernels.hpp"

namespace coaltree {

struct SyntheticSpec {
  int n = 32;
  int d = 32;
  CovarianceKind kind = CovarianceKind::squared_exponential;
  Theta theta;
  std::uint64_t seed = 0;
  int replicates = 1;

  void validate() const;
};

// Named sizes: d1 = {32,32}, d2 = {64,64}, d3 = {128,128}, each with the
// default generator hyperparameters (ell = d/4, sigma2 = 1e-9) and 50
// replicates.
SyntheticSpec preset_spec(const std::string& name);

struct SyntheticInstance {
  Dataset data;
  Dendrogram tree;
  Theta theta;
};

// Coalescent tree draw plus Brownian diffusion from a zero-vector root down to
// the leaves: each child value is Gaussian around its parent with covariance
// (elapsed time) * Phi.
SyntheticInstance generate(const SyntheticSpec& spec);

}  // namespace coaltree
