#include "hsiu/trunc_gauss.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <numbers>

namespace hsiu {

namespace {

void require_spd(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw InvalidInput(std::string(what) + " must be square");
  if (!m.allFinite()) throw InvalidInput(std::string(what) + " contains non-finite values");
  if (!m.isApprox(m.transpose(), 1e-10)) throw InvalidInput(std::string(what) + " is not symmetric");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw InvalidInput(std::string(what) + " is not positive definite");
  }
}

}  // namespace

SimplexGaussian::SimplexGaussian(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (covariance_.rows() != mean_.size()) {
    throw DimensionMismatch("covariance size does not match mean length");
  }
  require_spd(covariance_, "hidden covariance");
  precision_ = covariance_.llt().solve(Matrix::Identity(mean_.size(), mean_.size()));
}

SimplexGaussian SimplexGaussian::from_precision(Vector mean, Matrix precision) {
  if (precision.rows() != mean.size()) {
    throw DimensionMismatch("precision size does not match mean length");
  }
  require_spd(precision, "hidden precision");
  SimplexGaussian g;
  g.mean_ = std::move(mean);
  g.covariance_ = precision.llt().solve(Matrix::Identity(precision.rows(), precision.cols()));
  g.precision_ = std::move(precision);
  return g;
}

bool in_open_simplex(const Vector& c, double margin) {
  if (!c.allFinite()) return false;
  if (margin == 0.0) return (c.array() > 0.0).all() && c.sum() < 1.0;
  return (c.array() >= margin).all() && 1.0 - c.sum() >= margin;
}

namespace detail {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace detail

}  // namespace hsiu
