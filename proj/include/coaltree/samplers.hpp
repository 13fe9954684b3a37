#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coaltree/coalescent.hpp"
#include "coaltree/dataset.hpp"
#include "coaltree/kernels.hpp"
#include "coaltree/special_math.hpp"
#include "coaltree/tree_model.hpp"

namespace coaltree {

enum class Algorithm { mpost1, mpost2, postpost, greedy, mgreedy };
enum class WeightMode { exact_bessel, laplace_limit };
enum class GreedyVariant { corrected, original };

Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Algorithm a);

struct SamplerConfig {
  Algorithm algorithm = Algorithm::mpost1;
  int particles = 100;
  double resample_threshold = 0.5;  // fraction of M
  double window_factor = 100.0;
  WeightMode weight_mode = WeightMode::exact_bessel;
  bool exact_correction = false;  // reweight fast increments by exact/fast at the choice
  bool truncated_weights = false; // renormalize pair weights over v > r
  bool greedy_textbook_mode = false;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: resolve from env / hardware

  void validate() const;
};

struct PairCandidate {
  int left = -1;
  int right = -1;
  double eps = 0.0;
  double const_part = 0.0;      // t_c1 + t_c2 - s_c1 - s_c2, so r = 2 t_prev - const_part
  double cached_log_core = 0.0; // lambda-free Bessel/power term for the fast weight
};

struct Particle {
  Dendrogram tree;                    // merges appended as stages complete
  std::vector<NodeMessage> messages;  // indexed by node id
  std::vector<int> active;            // active node ids, ascending
  std::vector<PairCandidate> candidates;
  double log_weight = 0.0;
  double t_prev = 0.0;
};

struct SmcResult {
  std::vector<Particle> particles;
  std::vector<double> norm_weights;  // normalized final weights
  std::vector<double> ess_trace;     // after each stage
  std::vector<int> resample_stages;
  int max_weight_index = 0;
  double runtime_seconds = 0.0;
};

// lambda-tilde, the GIG order induced by marginalizing d dimensions.
inline double gig_order(int d) { return 1.0 - 0.5 * d; }

// Closed-form log pair weight via Bessel K (or its Laplace limit).
double pair_log_weight_exact(double eps, double r, double lambda, int d,
                             WeightMode mode = WeightMode::exact_bessel);

// Cached fast weight: the Bessel/power core never sees lambda, so per stage it
// costs one multiply-add per pair.
double pair_log_weight_fast(const PairCandidate& candidate, double t_prev, double lambda);

double candidate_log_core(double eps, int d);

// Leaf messages plus the full candidate list (eps cached; fast cores when
// with_log_core is set).
Particle make_initial_particle(const Dataset& data, const CovarianceModel& cov,
                               bool with_log_core);

// One SMC stage: weight pairs, draw the merging pair, draw its time, merge.
void smc_step(Particle& particle, double lambda, const CovarianceModel& cov,
              const SamplerConfig& config, int d, Rng& rng);

SmcResult run_smc(const Dataset& data, const CovarianceModel& cov,
                  const SamplerConfig& config);

// Cubic-cost reference: exact weights recomputed for every pair at every
// stage.  Same target as run_smc with exact weights.
SmcResult run_postpost(const Dataset& data, const CovarianceModel& cov,
                       const SamplerConfig& config);

double greedy_delta_corrected(double eps, double r, double lambda, int d);
double greedy_delta_original(double eps, double r, double lambda, int d);

Dendrogram run_greedy(const Dataset& data, const CovarianceModel& cov,
                      GreedyVariant variant, bool textbook_mode = false);

struct HyperBounds {
  double log_ell_lo = -10.0, log_ell_hi = 10.0;
  double log_sigma2_lo = -25.0, log_sigma2_hi = 5.0;
};

struct HyperOptions {
  bool fix_sigma2 = false;
  double sigma2_value = 1e-9;
  bool literal_sum = false;  // debug: objective = logsumexp of log Z_k instead of the sum
  HyperBounds bounds;
};

// One coordinate-wise slice-sampling sweep over the free hyperparameters in
// log space; the objective replays the tree's merges under the candidate theta.
Theta sample_hyperparams(const Dataset& data, const Dendrogram& tree,
                         const CovarianceModel& cov, Rng& rng,
                         const HyperOptions& options);

struct AlternatingResult {
  SmcResult smc;                     // final iteration's particle set
  std::vector<Theta> theta_trace;    // post-burn-in draws
  std::vector<Dendrogram> max_weight_trees;  // post-burn-in, one per iteration
  Theta theta_mean;                  // averaged over the trace
  double runtime_seconds = 0.0;
};

AlternatingResult run_alternating(const Dataset& data, CovarianceKind kind,
                                  const Theta& theta_init, const SamplerConfig& config,
                                  int n_iter, int burn_in, const HyperOptions& options);

// Deterministic thread-count resolution: explicit config beats the
// environment cap (COALTREE_THREADS) beats hardware concurrency.
int resolve_threads(int requested);

}  // namespace coaltree
