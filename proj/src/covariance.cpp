#include "hsiu/covariance.hpp"

#include <cmath>
#include <numbers>

namespace hsiu {

namespace {

constexpr double kJitter = 1e-10;

// Cholesky with one bounded jitter retry.
Eigen::LLT<Matrix> factorize_spd(Matrix a, const char* what) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  a.diagonal().array() += kJitter;
  llt.compute(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure(std::string(what) + " is not positive definite after jitter");
  }
  return llt;
}

}  // namespace

KernelMatrix build_polynomial_kernel(const EndmemberMatrix& endmembers) {
  const Matrix& m = endmembers.values();
  const Index bands = m.rows();
  const Index count = m.cols();

  KernelMatrix k;
  Matrix inner = m * m.transpose();
  k.gram = inner.array().square().matrix();

  k.factor.resize(bands, count * (count + 1) / 2);
  Index col = 0;
  for (Index r = 0; r < count; ++r) {
    k.factor.col(col++) = m.col(r).array().square().matrix();
  }
  for (Index i = 0; i < count; ++i) {
    for (Index j = i + 1; j < count; ++j) {
      k.factor.col(col++) = std::numbers::sqrt2 * (m.col(i).array() * m.col(j).array()).matrix();
    }
  }
  return k;
}

ClassCovariance::ClassCovariance(const KernelMatrix& kernel, double scale,
                                 const Vector& noise_variances, Method method)
    : method_(method), scale_(scale), noise_(noise_variances) {
  if (noise_.size() != kernel.bands()) {
    throw DimensionMismatch("noise variance vector length does not match band count");
  }
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw InvalidInput("nonlinearity scale must be finite and nonnegative");
  }
  if (!noise_.allFinite() || (noise_.array() <= 0.0).any()) {
    throw InvalidInput("noise variances must be finite and strictly positive");
  }
  inv_noise_ = noise_.cwiseInverse();

  if (method_ == Method::Dense) {
    Matrix sigma = scale_ * kernel.gram;
    sigma.diagonal() += noise_;
    inner_ = factorize_spd(std::move(sigma), "class covariance");
    const Matrix& l = inner_.matrixLLT();
    log_det_ = 2.0 * l.diagonal().array().log().sum();
    factor_ = kernel.factor;
    return;
  }

  log_det_ = noise_.array().log().sum();
  if (scale_ == 0.0) return;

  factor_ = kernel.factor;
  const Index m = factor_.cols();
  Matrix weighted = inv_noise_.asDiagonal() * factor_;
  Matrix b = Matrix::Identity(m, m) + scale_ * (factor_.transpose() * weighted);
  inner_ = factorize_spd(std::move(b), "Woodbury inner matrix");
  log_det_ += 2.0 * Matrix(inner_.matrixLLT()).diagonal().array().log().sum();
}

Vector ClassCovariance::solve(const Vector& v) const {
  if (v.size() != bands()) throw DimensionMismatch("solve: vector length does not match bands");
  if (method_ == Method::Dense) return inner_.solve(v);
  Vector x = inv_noise_.cwiseProduct(v);
  if (scale_ == 0.0) return x;
  Vector u = inner_.solve(factor_.transpose() * x);
  x.noalias() -= scale_ * inv_noise_.cwiseProduct(factor_ * u);
  return x;
}

Matrix ClassCovariance::solve(const Matrix& v) const {
  if (v.rows() != bands()) throw DimensionMismatch("solve: matrix rows do not match bands");
  if (method_ == Method::Dense) return inner_.solve(v);
  Matrix x = inv_noise_.asDiagonal() * v;
  if (scale_ == 0.0) return x;
  Matrix u = inner_.solve(factor_.transpose() * x);
  x.noalias() -= scale_ * (inv_noise_.asDiagonal() * (factor_ * u));
  return x;
}

double ClassCovariance::quadratic_form(const Vector& v) const {
  if (v.size() != bands()) {
    throw DimensionMismatch("quadratic_form: vector length does not match bands");
  }
  if (method_ == Method::Dense) return v.dot(inner_.solve(v));
  const double diag_part = v.cwiseAbs2().dot(inv_noise_);
  if (scale_ == 0.0) return diag_part;
  const Vector t = factor_.transpose() * inv_noise_.cwiseProduct(v);
  return diag_part - scale_ * t.dot(inner_.solve(t));
}

Vector ClassCovariance::quadratic_forms(const Matrix& columns) const {
  if (columns.rows() != bands()) {
    throw DimensionMismatch("quadratic_forms: matrix rows do not match bands");
  }
  if (method_ == Method::Dense) {
    return columns.cwiseProduct(inner_.solve(columns)).colwise().sum().transpose();
  }
  Vector out = columns.cwiseAbs2().transpose() * inv_noise_;
  if (scale_ == 0.0) return out;
  const Matrix t = factor_.transpose() * (inv_noise_.asDiagonal() * columns);
  out.noalias() -= scale_ * t.cwiseProduct(inner_.solve(t)).colwise().sum().transpose();
  return out;
}

Matrix ClassCovariance::inverse() const {
  if (method_ == Method::Dense) return inner_.solve(Matrix::Identity(bands(), bands()));
  Matrix inv = inv_noise_.asDiagonal();
  if (scale_ == 0.0) return inv;
  const Matrix weighted = inv_noise_.asDiagonal() * factor_;  // D^{-1} Q
  inv.noalias() -= scale_ * (weighted * inner_.solve(weighted.transpose()));
  return inv;
}

Vector ClassCovariance::nonlinearity_mean(const Vector& residual) const {
  if (scale_ == 0.0) return Vector::Zero(bands());
  return scale_ * (factor_ * (factor_.transpose() * solve(residual)));
}

double marginal_pixel_loglik(const Vector& residual, const ClassCovariance& cov) {
  if (residual.size() != cov.bands()) {
    throw DimensionMismatch("residual length does not match covariance bands");
  }
  const double l = static_cast<double>(cov.bands());
  return -0.5 * l * std::log(2.0 * std::numbers::pi) - 0.5 * cov.log_det() -
         0.5 * cov.quadratic_form(residual);
}

}  // namespace hsiu
