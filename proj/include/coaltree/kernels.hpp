#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "coaltree/dataset.hpp"

namespace coaltree {

enum class CovarianceKind { squared_exponential, matern32_grid, diagonal };

CovarianceKind covariance_kind_from_string(const std::string& name);
std::string to_string(CovarianceKind kind);

// Kernel hyperparameters. `ell` acts as an inverse length scale for the
// squared-exponential kernel (it divides the squared distance directly) and as
// a per-axis length scale for the grid kernel.
struct Theta {
  double ell = 1.0;
  double ell_x = 1.0;
  double ell_y = 1.0;
  double sigma2 = 0.0;
  std::vector<double> diag;  // diagonal kernel entries; ones when empty
};

// Dense d x d feature covariance with a cached Cholesky factor.  Assembly is
// deterministic: the same kind/theta/coords always produce identical bytes.
class CovarianceModel {
 public:
  CovarianceModel(CovarianceKind kind, const Theta& theta, const Coords& coords, int dim);

  int dim() const { return dim_; }
  CovarianceKind kind() const { return kind_; }
  const Theta& theta() const { return theta_; }
  const Eigen::MatrixXd& phi() const { return phi_; }
  double log_det() const { return log_det_; }
  double jitter_used() const { return jitter_; }

  // delta' * Phi^{-1} * delta through the cached factor.
  double quad_form(const Eigen::VectorXd& delta) const;

  // L * z for unit normals z: used to diffuse points with covariance Phi.
  Eigen::VectorXd correlate(const Eigen::VectorXd& z) const;

 private:
  CovarianceKind kind_;
  Theta theta_;
  int dim_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd chol_lower_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

}  // namespace coaltree
