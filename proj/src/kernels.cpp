#include "coaltree/kernels.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "coaltree/errors.hpp"

namespace coaltree {

namespace {

// Grid/positions resolved to per-dimension coordinates; unit-spaced 1-D when
// the dataset supplies none.
std::vector<double> resolve_positions(const Coords& coords, int dim) {
  std::vector<double> pos(dim);
  if (coords.kind == Coords::Kind::positions) {
    if (static_cast<int>(coords.positions.size()) != dim)
      throw ConfigError("coords: positions size != data dimension");
    return coords.positions;
  }
  for (int j = 0; j < dim; ++j) pos[j] = j;
  return pos;
}

}  // namespace

CovarianceKind covariance_kind_from_string(const std::string& name) {
  if (name == "se" || name == "squared_exponential") return CovarianceKind::squared_exponential;
  if (name == "matern32" || name == "matern32_grid") return CovarianceKind::matern32_grid;
  if (name == "diagonal") return CovarianceKind::diagonal;
  throw ConfigError("unknown kernel '" + name + "'");
}

std::string to_string(CovarianceKind kind) {
  switch (kind) {
    case CovarianceKind::squared_exponential: return "squared_exponential";
    case CovarianceKind::matern32_grid: return "matern32_grid";
    case CovarianceKind::diagonal: return "diagonal";
  }
  return "?";
}

CovarianceModel::CovarianceModel(CovarianceKind kind, const Theta& theta, const Coords& coords,
                                 int dim)
    : kind_(kind), theta_(theta), dim_(dim) {
  if (dim <= 0) throw ConfigError("covariance: dimension must be positive");
  if (theta.sigma2 < 0.0) throw ConfigError("covariance: sigma2 must be >= 0");
  phi_.resize(dim, dim);
  switch (kind) {
    case CovarianceKind::squared_exponential: {
      if (theta.ell <= 0.0) throw ConfigError("covariance: ell must be > 0");
      // ell is an inverse length scale: it divides the squared distance.
      const std::vector<double> pos = resolve_positions(coords, dim);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          const double dd = pos[i] - pos[j];
          phi_(i, j) = std::exp(-dd * dd / (2.0 * theta.ell)) + (i == j ? theta.sigma2 : 0.0);
        }
      break;
    }
    case CovarianceKind::matern32_grid: {
      if (theta.ell_x <= 0.0 || theta.ell_y <= 0.0)
        throw ConfigError("covariance: ell_x, ell_y must be > 0");
      int h = coords.grid_h, w = coords.grid_w;
      if (coords.kind != Coords::Kind::grid) {
        // fall back to a square layout when the dimension permits one
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim))));
        if (side * side != dim)
          throw ConfigError("matern32_grid requires grid coords (dimension is not square)");
        h = w = side;
      } else if (h * w != dim) {
        throw ConfigError("coords: grid h*w != data dimension");
      }
      const double s3 = std::sqrt(3.0);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
          const double dx = std::abs(i / w - j / w);
          const double dy = std::abs(i % w - j % w);
          const double ax = s3 * dx / theta.ell_x;
          const double ay = s3 * dy / theta.ell_y;
          // separable 3/2 kernel: both exponent terms must be negative
          phi_(i, j) = (1.0 + ax) * (1.0 + ay) * std::exp(-ax - ay) +
                       (i == j ? theta.sigma2 : 0.0);
        }
      break;
    }
    case CovarianceKind::diagonal: {
      if (!theta.diag.empty() && static_cast<int>(theta.diag.size()) != dim)
        throw ConfigError("covariance: diagonal entries size != dimension");
      phi_.setZero();
      for (int i = 0; i < dim; ++i) {
        const double v = (theta.diag.empty() ? 1.0 : theta.diag[i]) + theta.sigma2;
        if (v <= 0.0) throw ConfigError("covariance: diagonal entries must be > 0");
        phi_(i, i) = v;
      }
      break;
    }
  }

  const double trace_scale = phi_.trace() / dim;
  const double jitters[] = {0.0, 1e-10 * trace_scale, 1e-6 * trace_scale};
  bool done = false;
  for (double j : jitters) {
    Eigen::MatrixXd attempt = phi_;
    if (j > 0.0) attempt.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(attempt);
    if (llt.info() == Eigen::Success) {
      chol_lower_ = llt.matrixL();
      jitter_ = j;
      done = true;
      break;
    }
  }
  if (!done) throw NumericalError("covariance factorization failed after jitter escalation");
  log_det_ = 2.0 * chol_lower_.diagonal().array().log().sum();
}

double CovarianceModel::quad_form(const Eigen::VectorXd& delta) const {
  if (delta.size() != dim_) throw std::invalid_argument("quad_form: dimension mismatch");
  const Eigen::VectorXd y =
      chol_lower_.triangularView<Eigen::Lower>().solve(delta);
  return y.squaredNorm();
}

Eigen::VectorXd CovarianceModel::correlate(const Eigen::VectorXd& z) const {
  if (z.size() != dim_) throw std::invalid_argument("correlate: dimension mismatch");
  return chol_lower_.triangularView<Eigen::Lower>() * z;
}

}  // namespace coaltree
