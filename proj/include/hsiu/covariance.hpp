// Polynomial endmember kernel and the per-class marginal covariance
//   Sigma_k = s_k^2 * K_M + diag(sigma^2),   K_M = Q Q^T.
//
// The Woodbury path never forms an L x L matrix: with m = R(R+1)/2 columns
// in Q, class setup is O(L m^2) and each solve / quadratic form is O(L m).
#pragma once

#include "hsiu/core.hpp"

namespace hsiu {

/// Second-order symmetric polynomial kernel over the band signatures
/// (rows of M): gram(i, j) = (M.row(i) . M.row(j))^2, and its exact factor
/// Q = [m_1*m_1, ..., m_R*m_R, sqrt(2) m_1*m_2, ..., sqrt(2) m_{R-1}*m_R].
struct KernelMatrix {
  Matrix gram;    // L x L
  Matrix factor;  // L x R(R+1)/2

  Index bands() const noexcept { return gram.rows(); }
  Index rank_bound() const noexcept { return factor.cols(); }
};

KernelMatrix build_polynomial_kernel(const EndmemberMatrix& endmembers);

class ClassCovariance {
 public:
  enum class Method {
    Woodbury,  // low-rank + diagonal algebra in the m x m space
    Dense,     // explicit L x L Cholesky; kept as a test oracle
  };

  /// Throws InvalidInput if any noise variance is not strictly positive, if
  /// scale < 0, or if the sizes disagree with the kernel.
  ClassCovariance(const KernelMatrix& kernel, double scale, const Vector& noise_variances,
                  Method method = Method::Woodbury);

  Vector solve(const Vector& v) const;
  Matrix solve(const Matrix& v) const;
  double quadratic_form(const Vector& v) const;
  /// Quadratic form of every column of `columns` (L x N) in one pass.
  Vector quadratic_forms(const Matrix& columns) const;
  double log_det() const noexcept { return log_det_; }

  /// Dense Sigma^{-1}; O(L^2 m) on the Woodbury path.
  Matrix inverse() const;

  /// E[phi | residual] = s^2 K_M Sigma^{-1} residual, the Gaussian conditional
  /// mean of the marginalized nonlinearity. Zero when scale == 0.
  Vector nonlinearity_mean(const Vector& residual) const;

  double scale() const noexcept { return scale_; }
  const Vector& noise_variances() const noexcept { return noise_; }
  Index bands() const noexcept { return noise_.size(); }
  Method method() const noexcept { return method_; }

 private:
  Method method_;
  double scale_;
  Vector noise_;
  Vector inv_noise_;
  Matrix factor_;  // Q (empty when scale == 0)
  Eigen::LLT<Matrix> inner_;  // Woodbury: I + s^2 Q^T D^{-1} Q. Dense: Sigma.
  double log_det_ = 0.0;
};

/// Per-pixel marginal log-likelihood of a residual y - M a under class
/// covariance Sigma_k with phi integrated out:
///   -L/2 log(2 pi) - 1/2 log|Sigma_k| - 1/2 r^T Sigma_k^{-1} r.
double marginal_pixel_loglik(const Vector& residual, const ClassCovariance& cov);

}  // namespace hsiu
