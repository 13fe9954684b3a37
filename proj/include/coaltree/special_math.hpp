#pragma once

#include "coaltree/rng.hpp"

namespace coaltree {

// log K_nu(z), the modified Bessel function of the second kind, computed in
// the log domain so that extreme orders/arguments (nu up to ~64, z down to
// ~1e-150) neither overflow nor underflow.
double log_bessel_k(double order, double z);

// Generalized inverse Gaussian over v with density proportional to
//   v^(order-1) * exp(-chi/(2v) - psi*v/2),   v > lower_bound >= 0.
struct GigParams {
  double order = 0.0;
  double chi = 1.0;
  double psi = 1.0;
  double lower_bound = 0.0;

  void validate() const;  // throws std::domain_error on nonpositive chi/psi
};

// Unnormalized log density (the core above), -inf outside the support.
double gig_log_unnormalized(const GigParams& p, double v);

// log of the full-support normalizer: integral of the core over (0, inf).
// Closed form 2 K_order(sqrt(chi*psi)) / (psi/chi)^(order/2).
double gig_log_normalizer(const GigParams& p);

// log of the integral of the core over (lower_bound, inf).
double gig_log_tail_mass(const GigParams& p);

// Normalized log density on (lower_bound, inf); -inf outside.
double gig_log_density(const GigParams& p, double v);

// Mode of the untruncated density (closed form).
double gig_mode(const GigParams& p);

// Mean / variance of the untruncated distribution via Bessel ratios.
double gig_mean(const GigParams& p);
double gig_variance(const GigParams& p);

struct SliceOptions {
  double window_factor = 100.0;  // upper bracket scale multiplier
  int updates = 16;              // internal chain length per returned draw
  int max_shrink = 64;           // shrink iterations before giving up
};

// Draws v from the truncated GIG by slice sampling (step-out + shrinkage).
// Throws NumericalError if a slice cannot be located.
double gig_slice_sample(const GigParams& p, Rng& rng, const SliceOptions& opt = {});

// Stable log(exp(a) + exp(b)).
double log_add_exp(double a, double b);

// Stable log of a sum of exponentials; -inf for an empty range.
double log_sum_exp(const double* begin, const double* end);

}  // namespace coaltree
