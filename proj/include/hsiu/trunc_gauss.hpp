// Gaussian laws truncated to the open unit simplex
//   S = { c : c_r > 0, sum(c) < 1 }.
//
// Draws come from a coordinate-wise Gibbs scan: each c_r given the others is
// a univariate normal truncated to (0, 1 - sum_{j != r} c_j). The scan is
// warm-started from the caller's previous value, so inside an outer Gibbs
// sampler it leaves N_S(mean, cov) invariant without needing an exact draw.
#pragma once

#include "hsiu/core.hpp"
#include "hsiu/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hsiu {

/// Strict interior margin kept by every returned sample.
inline constexpr double kSimplexMargin = 1e-12;

class SimplexGaussian {
 public:
  /// Hidden mean and hidden covariance. Throws InvalidInput unless the
  /// covariance is symmetric positive definite.
  SimplexGaussian(Vector mean, Matrix covariance);
  static SimplexGaussian from_precision(Vector mean, Matrix precision);

  Index dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  const Matrix& precision() const noexcept { return precision_; }

 private:
  SimplexGaussian() = default;
  Vector mean_;
  Matrix covariance_;
  Matrix precision_;
};

bool in_open_simplex(const Vector& c, double margin = kSimplexMargin);

namespace detail {
double normal_cdf(double x);
double normal_quantile(double p);
}  // namespace detail

/// Standard normal truncated to [lo, hi].
///
/// Intervals whose density varies by less than a factor e use uniform
/// rejection; intervals starting beyond 4 sd use exponential rejection;
/// everything else uses inverse-CDF sampling in the lower tail.
template <class Urbg>
double sample_std_truncated_normal(double lo, double hi, Urbg& rng) {
  if (!(lo <= hi)) throw SamplingFailure("empty truncation interval");
  if (lo == hi) return lo;
  if (hi <= 0.0) {
    return -sample_std_truncated_normal(-hi, -lo, rng);
  }
  // Here hi > 0. nearest = point of [lo, hi] closest to 0.
  const double nearest = lo > 0.0 ? lo : 0.0;
  const double farthest = std::max(std::abs(lo), std::abs(hi));
  constexpr int kMaxTries = 100000;

  if (0.5 * (farthest * farthest - nearest * nearest) <= 1.0) {
    for (int i = 0; i < kMaxTries; ++i) {
      const double x = lo + (hi - lo) * uniform_open(rng);
      if (std::log(uniform_open(rng)) <= 0.5 * (nearest * nearest - x * x)) return x;
    }
    throw SamplingFailure("uniform rejection did not terminate");
  }
  if (lo > 4.0) {
    const double rate = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
    for (int i = 0; i < kMaxTries; ++i) {
      const double x = lo - std::log(uniform_open(rng)) / rate;
      if (x > hi) continue;
      const double d = x - rate;
      if (std::log(uniform_open(rng)) <= -0.5 * d * d) return x;
    }
    throw SamplingFailure("exponential rejection did not terminate");
  }
  // Inverse CDF. Work on the side where the CDF values are small so that
  // their differences keep relative precision.
  const bool flip = lo > 0.0;
  const double a = flip ? -hi : lo;
  const double b = flip ? -lo : hi;
  const double pa = detail::normal_cdf(a);
  const double pb = detail::normal_cdf(b);
  double x = detail::normal_quantile(pa + (pb - pa) * uniform_open(rng));
  x = std::clamp(x, a, b);
  return flip ? -x : x;
}

/// Normal(mean, sd^2) truncated to [lo, hi]; result clamped into [lo, hi].
template <class Urbg>
double sample_truncated_normal(double mean, double sd, double lo, double hi, Urbg& rng) {
  const double x = mean + sd * sample_std_truncated_normal((lo - mean) / sd, (hi - mean) / sd, rng);
  return std::clamp(x, lo, hi);
}

/// Coordinate-wise Gibbs scan on N_S(mean, precision^{-1}). Starts from
/// `start` when it lies strictly inside S, otherwise from the barycenter.
template <class Urbg>
Vector sample_simplex_gaussian(const Vector& mean, const Matrix& precision, Urbg& rng,
                               const Vector* start = nullptr, int sweeps = 5) {
  const Index d = mean.size();
  Vector c;
  if (start != nullptr && start->size() == d && in_open_simplex(*start)) {
    c = *start;
  } else {
    c = Vector::Constant(d, 1.0 / static_cast<double>(d + 1));
  }
  double total = c.sum();
  for (int s = 0; s < sweeps; ++s) {
    for (Index r = 0; r < d; ++r) {
      const double prec = precision(r, r);
      double shift = precision.col(r).dot(c - mean) - prec * (c(r) - mean(r));
      const double cond_mean = mean(r) - shift / prec;
      const double cond_sd = 1.0 / std::sqrt(prec);
      const double others = total - c(r);
      const double lo = kSimplexMargin;
      const double hi = std::max(lo, 1.0 - others - kSimplexMargin);
      const double v = sample_truncated_normal(cond_mean, cond_sd, lo, hi, rng);
      total = others + v;
      c(r) = v;
    }
    total = c.sum();
  }
  if (!in_open_simplex(c, 0.0)) {
    std::ostringstream msg;
    msg << "simplex Gaussian sample left the simplex: c = " << c.transpose()
        << ", mean = " << mean.transpose();
    throw SamplingFailure(msg.str());
  }
  return c;
}

template <class Urbg>
Vector sample_simplex_gaussian(const SimplexGaussian& dist, Urbg& rng,
                               const Vector* start = nullptr, int sweeps = 5) {
  return sample_simplex_gaussian(dist.mean(), dist.precision(), rng, start, sweeps);
}

}  // namespace hsiu
