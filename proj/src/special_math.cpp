#include "coaltree/special_math.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "coaltree/errors.hpp"

namespace coaltree {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Temme's gamma pair:
//   gam1 = [1/G(1-mu) - 1/G(1+mu)] / (2 mu),  gam2 = [1/G(1-mu) + 1/G(1+mu)] / 2.
// The series branch keeps gam1 accurate through the mu -> 0 cancellation.
void gamma_pair(double mu, double& gam1, double& gam2, double& gampl, double& gammi) {
  // coefficients of 1/Gamma(1+x) = 1 + c1 x + c2 x^2 + ...
  constexpr double c1 = 0.5772156649015329;
  constexpr double c2 = -0.6558780715202538;
  constexpr double c3 = -0.0420026350340952;
  constexpr double c4 = 0.1665386113822915;
  constexpr double c5 = -0.0421977345555443;
  constexpr double c6 = -0.0096219715278770;
  if (std::fabs(mu) < 1e-3) {
    const double m2 = mu * mu;
    gam1 = -(c1 + m2 * (c3 + m2 * c5));
    gam2 = 1.0 + m2 * (c2 + m2 * (c4 + m2 * c6));
    gampl = gam2 - mu * gam1;
    gammi = gam2 + mu * gam1;
  } else {
    gampl = 1.0 / std::tgamma(1.0 + mu);
    gammi = 1.0 / std::tgamma(1.0 - mu);
    gam1 = (gammi - gampl) / (2.0 * mu);
    gam2 = (gammi + gampl) / 2.0;
  }
}

// Series for K_mu(z), K_{mu+1}(z) with |mu| <= 1/2 and 0 < z <= 2, returned as
// logs.  Intermediate sums stay within double range down to z ~ 1e-150 because
// the 2/z amplification of the second function is applied in the log domain.
void temme_pair(double mu, double z, double& lk0, double& lk1) {
  const double x1 = 0.5 * z;
  const double pimu = M_PI * mu;
  const double fact = (pimu == 0.0) ? 1.0 : pimu / std::sin(pimu);
  const double d = -std::log(x1);
  const double e = mu * d;
  const double fact2 = (e == 0.0) ? 1.0 : std::sinh(e) / e;
  double gam1, gam2, gampl, gammi;
  gamma_pair(mu, gam1, gam2, gampl, gammi);
  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  const double ee = std::exp(e);
  double p = 0.5 * ee / gampl;
  double q = 0.5 / (ee * gammi);
  double c = 1.0;
  const double d2 = x1 * x1;
  double sum1 = p;
  for (int i = 1; i <= 1000; ++i) {
    ff = (i * ff + p + q) / (i * i - mu * mu);
    c *= d2 / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - i * ff);
    if (std::fabs(del) < std::fabs(sum) * 1e-17) break;
  }
  lk0 = std::log(sum);
  lk1 = std::log(sum1) + std::log(2.0) - std::log(z);
}

// Steed's continued fraction CF2 for z > 2, |mu| <= 1/2; returns logs with the
// exp(-z) factor absorbed analytically so large z cannot underflow.
void cf2_pair(double mu, double z, double& lk0, double& lk1) {
  double b = 2.0 * (1.0 + z);
  double d = 1.0 / b;
  double delh = d;
  double h = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  bool converged = false;
  for (int i = 2; i <= 100000; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::fabs(dels / s) < 1e-16) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("log_bessel_k: continued fraction did not converge");
  h = a1 * h;
  lk0 = 0.5 * std::log(M_PI / (2.0 * z)) - z - std::log(s);
  lk1 = lk0 + std::log((mu + z + 0.5 - h) / z);
}

// Large-argument expansion, summed until the terms stop improving (they
// eventually diverge; stopping at the smallest term bounds the error by it).
double log_k_asymptotic(double nu, double z) {
  const double fournu2 = 4.0 * nu * nu;
  double sum = 1.0;
  double term = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 64; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (fournu2 - odd * odd) / (8.0 * k * z);
    if (std::fabs(term) >= prev) break;
    sum += term;
    prev = std::fabs(term);
    if (prev < 1e-17 * std::fabs(sum) || term == 0.0) break;
  }
  return 0.5 * std::log(M_PI / (2.0 * z)) - z + std::log(sum);
}

// Adaptive Simpson with Richardson correction; integrand assumed O(1) scaled.
double simpson_rec(const std::function<double(double)>& f, double a, double m, double b,
                   double fa, double fm, double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) < 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double simpson_adaptive(const std::function<double(double)>& f, double a, double b,
                        double tol) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, m, b, fa, fm, fb, whole, tol, 52);
}

}  // namespace

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

double log_sum_exp(const double* begin, const double* end) {
  double m = kNegInf;
  for (const double* p = begin; p != end; ++p) m = std::max(m, *p);
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (const double* p = begin; p != end; ++p) acc += std::exp(*p - m);
  return m + std::log(acc);
}

double log_bessel_k(double order, double z) {
  if (!std::isfinite(order) || !std::isfinite(z) || z <= 0.0)
    throw std::domain_error("log_bessel_k: requires finite order and z > 0");
  const double nu = std::fabs(order);
  if (z > 50.0 * std::max(1.0, nu)) return log_k_asymptotic(nu, z);
  const int m = static_cast<int>(std::lround(nu));
  const double mu = nu - m;
  double lk0, lk1;
  if (z <= 2.0)
    temme_pair(mu, z, lk0, lk1);
  else
    cf2_pair(mu, z, lk0, lk1);
  if (m == 0) return lk0;
  // upward recurrence K_{v+1} = (2v/z) K_v + K_{v-1}: all terms positive, so it
  // is stable in the log domain for arbitrarily large intermediate magnitudes.
  const double l2z = std::log(2.0) - std::log(z);
  for (int i = 1; i < m; ++i) {
    const double lnext = log_add_exp(l2z + std::log(mu + i) + lk1, lk0);
    lk0 = lk1;
    lk1 = lnext;
  }
  return lk1;
}

void GigParams::validate() const {
  if (!std::isfinite(order)) throw std::domain_error("gig: order must be finite");
  if (!(chi > 0.0) || !std::isfinite(chi)) throw std::domain_error("gig: chi must be > 0");
  if (!(psi > 0.0) || !std::isfinite(psi)) throw std::domain_error("gig: psi must be > 0");
  if (!(lower_bound >= 0.0) || !std::isfinite(lower_bound))
    throw std::domain_error("gig: lower_bound must be >= 0");
}

double gig_log_unnormalized(const GigParams& p, double v) {
  if (!(v > p.lower_bound) || !(v > 0.0) || !std::isfinite(v)) return kNegInf;
  return (p.order - 1.0) * std::log(v) - 0.5 * p.chi / v - 0.5 * p.psi * v;
}

double gig_log_normalizer(const GigParams& p) {
  p.validate();
  const double omega = std::sqrt(p.chi) * std::sqrt(p.psi);
  return std::log(2.0) + log_bessel_k(p.order, omega) -
         0.5 * p.order * (std::log(p.psi) - std::log(p.chi));
}

double gig_mode(const GigParams& p) {
  p.validate();
  const double lm1 = p.order - 1.0;
  const double s = std::hypot(lm1, std::sqrt(p.chi) * std::sqrt(p.psi));
  // rationalized form avoids cancellation when order - 1 < 0
  return (lm1 > 0.0) ? (lm1 + s) / p.psi : p.chi / (s - lm1);
}

double gig_mean(const GigParams& p) {
  p.validate();
  const double omega = std::sqrt(p.chi) * std::sqrt(p.psi);
  const double lr = log_bessel_k(p.order + 1.0, omega) - log_bessel_k(p.order, omega);
  return std::sqrt(p.chi / p.psi) * std::exp(lr);
}

double gig_variance(const GigParams& p) {
  p.validate();
  const double omega = std::sqrt(p.chi) * std::sqrt(p.psi);
  const double lk0 = log_bessel_k(p.order, omega);
  const double lk1 = log_bessel_k(p.order + 1.0, omega);
  const double lk2 = log_bessel_k(p.order + 2.0, omega);
  return (p.chi / p.psi) * (std::exp(lk2 - lk0) - std::exp(2.0 * (lk1 - lk0)));
}

double gig_log_tail_mass(const GigParams& p) {
  p.validate();
  if (p.lower_bound <= 0.0) return gig_log_normalizer(p);
  GigParams full = p;
  full.lower_bound = 0.0;
  // integrate the core over (L, inf) in u = log v
  auto g = [&full](double u) { return gig_log_unnormalized(full, std::exp(u)) + u; };
  const double logl = std::log(p.lower_bound);
  const double u_lo = logl + 1e-13 * std::max(1.0, std::fabs(logl));
  GigParams shifted = full;
  shifted.order += 1.0;  // stationary point of v*core(v)
  const double u_peak = std::max(std::log(gig_mode(shifted)), u_lo);
  const double gmax = std::max(g(u_peak), g(u_lo));
  double u_hi = u_peak + 1.0;
  for (int i = 0; i < 60 && g(u_hi) > gmax - 120.0; ++i) u_hi = u_peak + 2.0 * (u_hi - u_peak);
  auto f = [&g, gmax](double u) {
    const double gv = g(u);
    return (gv > gmax - 700.0) ? std::exp(gv - gmax) : 0.0;
  };
  const double width = u_hi - u_lo;
  double total = simpson_adaptive(f, u_lo, std::min(u_peak, u_hi), 1e-13 * width) +
                 simpson_adaptive(f, std::min(u_peak, u_hi), u_hi, 1e-13 * width);
  // refine once with a tolerance tied to the first estimate
  if (total > 0.0) {
    const double tol = 1e-12 * total;
    total = simpson_adaptive(f, u_lo, std::min(u_peak, u_hi), tol) +
            simpson_adaptive(f, std::min(u_peak, u_hi), u_hi, tol);
  }
  if (!(total > 0.0)) throw NumericalError("gig_log_tail_mass: vanishing tail integral");
  return gmax + std::log(total);
}

double gig_log_density(const GigParams& p, double v) {
  p.validate();
  const double core = gig_log_unnormalized(p, v);
  if (core == kNegInf) return kNegInf;
  return core - gig_log_tail_mass(p);
}

double gig_slice_sample(const GigParams& p, Rng& rng, const SliceOptions& opt) {
  p.validate();
  const double L = p.lower_bound;
  // window scale covers the inverse-gamma-like, gamma-like, and sqrt(chi/psi)
  // concentration regimes of the distribution
  const double spread = gig_mode(p) + std::sqrt(p.chi / p.psi) +
                        (2.0 * std::fabs(p.order) + 3.0) / p.psi;
  const double upper_delta = 0.5 * opt.window_factor * std::max({L, spread, 1e-8});
  const double s_hi = std::log(upper_delta);
  const double s_lo = s_hi - 760.0;  // below double underflow relative to the window
  auto h = [&p, L](double s) {
    return gig_log_unnormalized(p, L + 2.0 * std::exp(s)) + s;
  };
  double cur = s_lo;
  double hcur = kNegInf;
  const int probes = 160;
  for (int i = 0; i <= probes; ++i) {
    const double s = s_lo + (s_hi - s_lo) * i / probes;
    const double v = h(s);
    if (v > hcur) {
      hcur = v;
      cur = s;
    }
  }
  if (!std::isfinite(hcur))
    throw NumericalError("gig_slice_sample: no support inside sampling window");
  for (int it = 0; it < opt.updates; ++it) {
    const double y = hcur + std::log(uniform01(rng));
    double lo = s_lo;
    double hi = s_hi;
    bool accepted = false;
    for (int k = 0; k < opt.max_shrink; ++k) {
      const double cand = lo + (hi - lo) * uniform01(rng);
      const double hc = h(cand);
      if (hc > y) {
        cur = cand;
        hcur = hc;
        accepted = true;
        break;
      }
      if (cand < cur)
        lo = cand;
      else
        hi = cand;
    }
    if (!accepted) throw NumericalError("gig_slice_sample: slice shrinkage failed");
  }
  return L + 2.0 * std::exp(cur);
}

}  // namespace coaltree
