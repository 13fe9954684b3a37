#include "coaltree/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "coaltree/errors.hpp"

namespace coaltree {

namespace {

constexpr double kEpsFloor = 1e-300;
constexpr double kInf = std::numeric_limits<double>::infinity();

double pair_r(const PairCandidate& c, double t_prev) {
  return std::max(0.0, 2.0 * t_prev - c.const_part);
}

bool candidate_order(const PairCandidate& a, const PairCandidate& b) {
  return a.left != b.left ? a.left < b.left : a.right < b.right;
}

PairCandidate make_candidate(int a, int b, const std::vector<NodeMessage>& messages,
                             const CovarianceModel& cov, int d, bool with_core) {
  PairCandidate c;
  c.left = std::min(a, b);
  c.right = std::max(a, b);
  const NodeMessage& m1 = messages[c.left];
  const NodeMessage& m2 = messages[c.right];
  c.eps = cov.quad_form(m1.mean - m2.mean);
  c.const_part = m1.created_at + m2.created_at - m1.variance - m2.variance;
  c.cached_log_core = with_core ? candidate_log_core(c.eps, d) : 0.0;
  return c;
}

void rebuild_candidates(Particle& p, const CovarianceModel& cov, int d, bool with_core) {
  p.candidates.clear();
  const std::size_t m = p.active.size();
  p.candidates.reserve(m * (m - 1) / 2);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      p.candidates.push_back(make_candidate(p.active[i], p.active[j], p.messages, cov, d, with_core));
}

// Merges the chosen pair at absolute time t_k and refreshes the candidate
// list: stale pairs drop out, pairs against the new node come in, and the
// list returns to (left, right) order so every algorithm enumerates pairs
// identically.
MergeResult apply_merge(Particle& p, std::size_t idx, double t_k, const CovarianceModel& cov,
                        int d, bool with_core) {
  const PairCandidate chosen = p.candidates[idx];
  MergeResult res = merge_message(p.messages[chosen.left], p.messages[chosen.right], t_k,
                                  p.t_prev, cov, chosen.eps);
  const int node = p.tree.n_leaves + static_cast<int>(p.tree.merges.size());
  p.tree.merges.push_back({chosen.left, chosen.right, t_k});
  p.messages[node] = res.message;
  p.active.erase(std::remove_if(p.active.begin(), p.active.end(),
                                [&](int id) { return id == chosen.left || id == chosen.right; }),
                 p.active.end());
  p.candidates.erase(
      std::remove_if(p.candidates.begin(), p.candidates.end(),
                     [&](const PairCandidate& c) {
                       return c.left == chosen.left || c.left == chosen.right ||
                              c.right == chosen.left || c.right == chosen.right;
                     }),
      p.candidates.end());
  for (int a : p.active)
    p.candidates.push_back(make_candidate(a, node, p.messages, cov, d, with_core));
  p.active.push_back(node);
  std::sort(p.candidates.begin(), p.candidates.end(), candidate_order);
  p.t_prev = t_k;
  return res;
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load(std::memory_order_relaxed)) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int j = 0; j < workers; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

void systematic_resample(std::vector<Particle>& particles, const std::vector<double>& weights,
                         Rng& rng) {
  const int m = static_cast<int>(particles.size());
  const double u0 = uniform01(rng) / m;
  std::vector<int> ancestors(m);
  double cum = weights[0];
  int j = 0;
  for (int i = 0; i < m; ++i) {
    const double u = u0 + static_cast<double>(i) / m;
    while (u > cum && j < m - 1) cum += weights[++j];
    ancestors[i] = j;
  }
  std::vector<Particle> next;
  next.reserve(m);
  for (int a : ancestors) next.push_back(particles[a]);
  particles = std::move(next);
  for (Particle& p : particles) p.log_weight = 0.0;
}

SmcResult run_engine(const Dataset& data, const CovarianceModel& cov, const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.algorithm == Algorithm::greedy || cfg.algorithm == Algorithm::mgreedy)
    throw ConfigError("run_smc: greedy algorithms have no particle system");
  if (data.n() < 2) throw DataError("run_smc: need at least two rows");
  if (cov.dim() != data.d()) throw ConfigError("run_smc: covariance dimension mismatch");
  const auto t0 = std::chrono::steady_clock::now();
  const int n = data.n();
  const int d = data.d();
  const int particles = cfg.particles;
  const bool fast = cfg.algorithm == Algorithm::mpost2;
  const int threads = resolve_threads(cfg.threads);

  SmcResult out;
  out.particles.assign(particles, make_initial_particle(data, cov, fast));
  std::vector<double> lw(particles), w(particles);
  for (int k = 1; k <= n - 1; ++k) {
    const double lambda = coalescent_rate(n, k);
    parallel_for(particles, threads, [&](int i) {
      Rng rng = make_rng(cfg.seed, stream::smc_stage, static_cast<std::uint64_t>(k),
                         static_cast<std::uint64_t>(i));
      smc_step(out.particles[i], lambda, cov, cfg, d, rng);
    });
    for (int i = 0; i < particles; ++i) lw[i] = out.particles[i].log_weight;
    const double lse = log_sum_exp(lw.data(), lw.data() + particles);
    if (!std::isfinite(lse)) throw NumericalError("run_smc: particle weights collapsed");
    double sum_sq = 0.0;
    for (int i = 0; i < particles; ++i) {
      w[i] = std::exp(lw[i] - lse);
      sum_sq += w[i] * w[i];
    }
    out.ess_trace.push_back(1.0 / sum_sq);
    if (k < n - 1 && out.ess_trace.back() < cfg.resample_threshold * particles) {
      out.resample_stages.push_back(k);
      Rng rng = make_rng(cfg.seed, stream::resample, static_cast<std::uint64_t>(k));
      systematic_resample(out.particles, w, rng);
    }
  }
  out.norm_weights = w;
  out.max_weight_index =
      static_cast<int>(std::max_element(w.begin(), w.end()) - w.begin());
  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

double gig_mode_delta(double order, double eps, double r, double lambda) {
  return (order + std::sqrt(order * order + lambda * eps)) / (2.0 * lambda) - 0.5 * r;
}

}  // namespace

Algorithm algorithm_from_string(const std::string& name) {
  if (name == "mpost1") return Algorithm::mpost1;
  if (name == "mpost2") return Algorithm::mpost2;
  if (name == "postpost") return Algorithm::postpost;
  if (name == "greedy") return Algorithm::greedy;
  if (name == "mgreedy") return Algorithm::mgreedy;
  throw ConfigError("unknown algorithm: " + name);
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::mpost1: return "mpost1";
    case Algorithm::mpost2: return "mpost2";
    case Algorithm::postpost: return "postpost";
    case Algorithm::greedy: return "greedy";
    case Algorithm::mgreedy: return "mgreedy";
  }
  throw ConfigError("unknown algorithm enum value");
}

void SamplerConfig::validate() const {
  if (particles < 1) throw ConfigError("particles must be >= 1");
  if (!(resample_threshold >= 0.0 && resample_threshold <= 1.0))
    throw ConfigError("resample threshold must lie in [0, 1]");
  if (!(window_factor > 0.0) || !std::isfinite(window_factor))
    throw ConfigError("slice window scale must be positive and finite");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (exact_correction && algorithm != Algorithm::mpost2)
    throw ConfigError("exact correction applies to the cached-weight sampler only");
  if (truncated_weights && algorithm == Algorithm::mpost2)
    throw ConfigError("truncated pair weights need exact per-stage weights");
}

double pair_log_weight_exact(double eps, double r, double lambda, int d, WeightMode mode) {
  if (!(lambda > 0.0)) throw std::domain_error("pair_log_weight_exact: lambda must be positive");
  if (r < 0.0) throw std::domain_error("pair_log_weight_exact: r must be nonnegative");
  eps = std::max(eps, kEpsFloor);
  if (mode == WeightMode::laplace_limit)
    return -0.25 * (d - 1) * std::log(eps) - std::sqrt(lambda * eps) + 0.5 * lambda * r;
  const double order = gig_order(d);
  return log_bessel_k(order, std::sqrt(lambda * eps)) -
         0.5 * order * (std::log(lambda) - std::log(eps)) + 0.5 * lambda * r;
}

double candidate_log_core(double eps, int d) {
  eps = std::max(eps, kEpsFloor);
  const double order = gig_order(d);
  return log_bessel_k(order, std::sqrt(eps)) + 0.5 * order * std::log(eps);
}

double pair_log_weight_fast(const PairCandidate& candidate, double t_prev, double lambda) {
  if (!(lambda > 0.0)) throw std::domain_error("pair_log_weight_fast: lambda must be positive");
  return candidate.cached_log_core + 0.5 * lambda * pair_r(candidate, t_prev);
}

Particle make_initial_particle(const Dataset& data, const CovarianceModel& cov,
                               bool with_log_core) {
  if (data.n() < 2) throw DataError("make_initial_particle: need at least two rows");
  if (cov.dim() != data.d())
    throw ConfigError("make_initial_particle: covariance dimension mismatch");
  Particle p;
  p.tree.n_leaves = data.n();
  p.messages.resize(2 * data.n() - 1);
  for (int i = 0; i < data.n(); ++i) p.messages[i] = leaf_message(data, i);
  p.active.resize(data.n());
  std::iota(p.active.begin(), p.active.end(), 0);
  rebuild_candidates(p, cov, data.d(), with_log_core);
  return p;
}

void smc_step(Particle& particle, double lambda, const CovarianceModel& cov,
              const SamplerConfig& config, int d, Rng& rng) {
  const bool fast = config.algorithm == Algorithm::mpost2;
  if (config.algorithm == Algorithm::postpost) rebuild_candidates(particle, cov, d, false);
  const std::size_t m = particle.candidates.size();
  if (m == 0) throw DataError("smc_step: no candidate pairs remain");

  std::vector<double> lw(m);
  for (std::size_t i = 0; i < m; ++i) {
    const PairCandidate& c = particle.candidates[i];
    if (fast) {
      lw[i] = pair_log_weight_fast(c, particle.t_prev, lambda);
    } else {
      lw[i] = pair_log_weight_exact(c.eps, pair_r(c, particle.t_prev), lambda, d,
                                    config.weight_mode);
    }
    if (config.truncated_weights) {
      GigParams gp{gig_order(d), std::max(c.eps, kEpsFloor), lambda,
                   pair_r(c, particle.t_prev)};
      lw[i] += gig_log_tail_mass(gp) - gig_log_normalizer(gp);
    }
  }
  const double lse = log_sum_exp(lw.data(), lw.data() + m);
  if (!std::isfinite(lse)) throw NumericalError("smc_step: pair weights are not normalizable");

  // Pair first: the merging pair never conditions on its holding time.
  const double u = uniform01(rng);
  std::size_t idx = m - 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    acc += std::exp(lw[i] - lse);
    if (u < acc) {
      idx = i;
      break;
    }
  }

  double increment = lse;
  const PairCandidate& chosen = particle.candidates[idx];
  const double r = pair_r(chosen, particle.t_prev);
  if (fast && config.exact_correction)
    increment += pair_log_weight_exact(chosen.eps, r, lambda, d, WeightMode::exact_bessel) -
                 lw[idx];

  GigParams gp{gig_order(d), std::max(chosen.eps, kEpsFloor), lambda, r};
  SliceOptions slice;
  slice.window_factor = config.window_factor;
  const double v = gig_slice_sample(gp, rng, slice);
  const double delta = std::max(0.0, 0.5 * (v - r));
  apply_merge(particle, idx, particle.t_prev + delta, cov, d, fast);
  particle.log_weight += increment;
}

SmcResult run_smc(const Dataset& data, const CovarianceModel& cov, const SamplerConfig& config) {
  return run_engine(data, cov, config);
}

SmcResult run_postpost(const Dataset& data, const CovarianceModel& cov,
                       const SamplerConfig& config) {
  SamplerConfig cfg = config;
  cfg.algorithm = Algorithm::postpost;
  return run_engine(data, cov, cfg);
}

double greedy_delta_corrected(double eps, double r, double lambda, int d) {
  if (!(lambda > 0.0)) throw std::domain_error("greedy_delta_corrected: lambda must be positive");
  return gig_mode_delta(gig_order(d), std::max(eps, 0.0), r, lambda);
}

double greedy_delta_original(double eps, double r, double lambda, int d) {
  if (!(lambda > 0.0)) throw std::domain_error("greedy_delta_original: lambda must be positive");
  eps = std::max(eps, 0.0);
  const double dd = static_cast<double>(d);
  return (-dd + std::sqrt(dd * dd + 2.0 * lambda * eps)) / (2.0 * lambda) - 0.5 * r;
}

Dendrogram run_greedy(const Dataset& data, const CovarianceModel& cov, GreedyVariant variant,
                      bool textbook_mode) {
  if (data.n() < 2) throw DataError("run_greedy: need at least two rows");
  if (cov.dim() != data.d()) throw ConfigError("run_greedy: covariance dimension mismatch");
  const int n = data.n();
  const int d = data.d();
  Particle p = make_initial_particle(data, cov, false);
  for (int k = 1; k <= n - 1; ++k) {
    const double lambda = coalescent_rate(n, k);
    std::size_t best = 0;
    double best_delta = kInf;
    for (std::size_t i = 0; i < p.candidates.size(); ++i) {
      const PairCandidate& c = p.candidates[i];
      const double r = pair_r(c, p.t_prev);
      double delta;
      if (variant == GreedyVariant::corrected) {
        const double order = gig_order(d) - (textbook_mode ? 1.0 : 0.0);
        delta = gig_mode_delta(order, std::max(c.eps, 0.0), r, lambda);
      } else {
        delta = greedy_delta_original(c.eps, r, lambda, d);
      }
      if (delta < best_delta) {
        best_delta = delta;
        best = i;
      }
    }
    apply_merge(p, best, p.t_prev + std::max(0.0, best_delta), cov, d, false);
  }
  return p.tree;
}

namespace {

std::vector<double> merge_log_terms(const Dataset& data, const Dendrogram& tree,
                                    const CovarianceModel& cov) {
  std::vector<NodeMessage> messages(tree.n_nodes());
  for (int i = 0; i < tree.n_leaves; ++i) messages[i] = leaf_message(data, i);
  std::vector<double> terms;
  terms.reserve(tree.merges.size());
  double t_prev = 0.0;
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    const Merge& mg = tree.merges[k];
    MergeResult res =
        merge_message(messages[mg.left], messages[mg.right], mg.time, t_prev, cov);
    messages[tree.n_leaves + static_cast<int>(k)] = res.message;
    terms.push_back(res.log_z);
    t_prev = mg.time;
  }
  return terms;
}

double replay_objective(const Dataset& data, const Dendrogram& tree, CovarianceKind kind,
                        const Coords& coords, const Theta& theta, bool literal_sum) {
  try {
    CovarianceModel cov(kind, theta, coords, data.d());
    if (!literal_sum) return tree_log_likelihood(data, tree, cov);
    const std::vector<double> terms = merge_log_terms(data, tree, cov);
    return log_sum_exp(terms.data(), terms.data() + terms.size());
  } catch (const NumericalError&) {
    return -kInf;
  }
}

// One log-space slice update (step-out then shrink) of a single coordinate.
void slice_coordinate(double* coord, double lo, double hi, Rng& rng,
                      const std::function<double()>& objective) {
  const double x0 = std::clamp(std::log(*coord), lo, hi);
  auto eval = [&](double x) {
    *coord = std::exp(x);
    return objective();
  };
  const double f0 = eval(x0);
  if (!std::isfinite(f0)) {
    *coord = std::exp(x0);
    return;
  }
  const double y = f0 + std::log(1.0 - uniform01(rng));
  const double width = 1.0;
  double left = x0 - width * uniform01(rng);
  double right = left + width;
  for (int s = 0; s < 64 && left > lo && eval(left) > y; ++s) left -= width;
  for (int s = 0; s < 64 && right < hi && eval(right) > y; ++s) right += width;
  left = std::max(left, lo);
  right = std::min(right, hi);
  for (int s = 0; s < 64; ++s) {
    const double x1 = left + (right - left) * uniform01(rng);
    if (eval(x1) > y) return;
    (x1 < x0 ? left : right) = x1;
  }
  *coord = std::exp(x0);
}

}  // namespace

Theta sample_hyperparams(const Dataset& data, const Dendrogram& tree, const CovarianceModel& cov,
                         Rng& rng, const HyperOptions& options) {
  Theta theta = cov.theta();
  if (options.fix_sigma2) theta.sigma2 = options.sigma2_value;
  const CovarianceKind kind = cov.kind();
  auto objective = [&] {
    return replay_objective(data, tree, kind, data.coords, theta, options.literal_sum);
  };
  const HyperBounds& b = options.bounds;
  switch (kind) {
    case CovarianceKind::squared_exponential:
      slice_coordinate(&theta.ell, b.log_ell_lo, b.log_ell_hi, rng, objective);
      break;
    case CovarianceKind::matern32_grid:
      slice_coordinate(&theta.ell_x, b.log_ell_lo, b.log_ell_hi, rng, objective);
      slice_coordinate(&theta.ell_y, b.log_ell_lo, b.log_ell_hi, rng, objective);
      break;
    case CovarianceKind::diagonal:
      break;
  }
  if (!options.fix_sigma2)
    slice_coordinate(&theta.sigma2, b.log_sigma2_lo, b.log_sigma2_hi, rng, objective);
  return theta;
}

AlternatingResult run_alternating(const Dataset& data, CovarianceKind kind,
                                  const Theta& theta_init, const SamplerConfig& config,
                                  int n_iter, int burn_in, const HyperOptions& options) {
  config.validate();
  if (n_iter <= 0) throw ConfigError("run_alternating: iterations must be positive");
  if (burn_in < 0 || burn_in >= n_iter)
    throw ConfigError("run_alternating: burn-in must lie in [0, iterations)");
  const auto t0 = std::chrono::steady_clock::now();
  const bool greedy =
      config.algorithm == Algorithm::greedy || config.algorithm == Algorithm::mgreedy;

  AlternatingResult out;
  Theta theta = theta_init;
  if (options.fix_sigma2) theta.sigma2 = options.sigma2_value;
  for (int it = 0; it < n_iter; ++it) {
    CovarianceModel cov(kind, theta, data.coords, data.d());
    Dendrogram tree;
    if (greedy) {
      const GreedyVariant variant = config.algorithm == Algorithm::mgreedy
                                        ? GreedyVariant::corrected
                                        : GreedyVariant::original;
      tree = run_greedy(data, cov, variant, config.greedy_textbook_mode);
    } else {
      SamplerConfig sub = config;
      sub.seed = derive_seed(config.seed, stream::alternate, static_cast<std::uint64_t>(it));
      out.smc = run_engine(data, cov, sub);
      tree = out.smc.particles[out.smc.max_weight_index].tree;
    }
    Rng hyper_rng = make_rng(config.seed, stream::hyper, static_cast<std::uint64_t>(it));
    theta = sample_hyperparams(data, tree, cov, hyper_rng, options);
    if (it >= burn_in) {
      out.theta_trace.push_back(theta);
      out.max_weight_trees.push_back(std::move(tree));
    }
  }
  out.theta_mean = theta;
  if (!out.theta_trace.empty()) {
    double ell = 0.0, ell_x = 0.0, ell_y = 0.0, sigma2 = 0.0;
    for (const Theta& t : out.theta_trace) {
      ell += t.ell;
      ell_x += t.ell_x;
      ell_y += t.ell_y;
      sigma2 += t.sigma2;
    }
    const double inv = 1.0 / static_cast<double>(out.theta_trace.size());
    out.theta_mean.ell = ell * inv;
    out.theta_mean.ell_x = ell_x * inv;
    out.theta_mean.ell_y = ell_y * inv;
    out.theta_mean.sigma2 = sigma2 * inv;
  }
  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("COALTREE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace coaltree
