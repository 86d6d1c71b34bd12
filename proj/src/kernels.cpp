#include "hsiu/kernels.hpp"

#include "hsiu/rng.hpp"
#include "hsiu/trunc_gauss.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <vector>

namespace hsiu {

namespace {

constexpr int kMaxClasses = 64;

void check_logliks(const Matrix& logliks, const LabelField& z) {
  if (logliks.cols() != z.size() || logliks.rows() != z.classes()) {
    throw DimensionMismatch("log-likelihood table does not match the label field");
  }
  if (z.classes() > kMaxClasses) throw InvalidInput("too many classes");
}

void loglik_column(const Matrix& residuals, std::span<const ClassCovariance> covs, Matrix& out,
                   Index n) {
  const Vector r = residuals.col(n);
  for (std::size_t k = 0; k < covs.size(); ++k) {
    out(static_cast<Index>(k), n) = marginal_pixel_loglik(r, covs[k]);
  }
}

int draw_label(const LabelField& z, const Matrix& logliks, const Lattice& lattice, double beta,
               StreamKey key, Index n) {
  std::array<double, kMaxClasses> logw{};
  const int classes = z.classes();
  for (int k = 0; k < classes; ++k) logw[static_cast<std::size_t>(k)] = logliks(k, n);
  for (Index m : lattice.neighbors(n)) logw[static_cast<std::size_t>(z[m])] += beta;
  CounterStream rng(key.seed, key.pass, static_cast<std::uint64_t>(n),
                    static_cast<std::uint64_t>(KernelBlock::Labels));
  return sample_categorical_log(std::span<const double>(logw.data(), static_cast<std::size_t>(classes)),
                                rng);
}

void abundance_pixel(Matrix& free, const Matrix& shifted_pixels, const LabelField& z,
                     std::span<const AbundanceTerms> terms, StreamKey key, int sweeps, Index n) {
  const AbundanceTerms& t = terms[static_cast<std::size_t>(z[n])];
  const Vector mean = t.precision_llt.solve(t.weighted.transpose() * shifted_pixels.col(n));
  const Vector start = free.col(n);
  CounterStream rng(key.seed, key.pass, static_cast<std::uint64_t>(n),
                    static_cast<std::uint64_t>(KernelBlock::Abundances));
  free.col(n) = sample_simplex_gaussian(mean, t.precision, rng, &start, sweeps);
}

void check_abundance_inputs(const Matrix& free, const Matrix& shifted_pixels, const LabelField& z,
                            std::span<const AbundanceTerms> terms) {
  if (free.cols() != shifted_pixels.cols() || free.cols() != z.size()) {
    throw DimensionMismatch("abundance update: pixel counts disagree");
  }
  if (static_cast<int>(terms.size()) != z.classes()) {
    throw DimensionMismatch("abundance update: one term set per class is required");
  }
}

}  // namespace

Matrix class_logliks_serial(const Matrix& residuals, std::span<const ClassCovariance> covs) {
  Matrix out(static_cast<Index>(covs.size()), residuals.cols());
  for (Index n = 0; n < residuals.cols(); ++n) loglik_column(residuals, covs, out, n);
  return out;
}

Matrix class_logliks_parallel(const Matrix& residuals, std::span<const ClassCovariance> covs,
                              int threads) {
  Matrix out(static_cast<Index>(covs.size()), residuals.cols());
#pragma omp parallel for schedule(static) num_threads(std::max(1, threads))
  for (Index n = 0; n < residuals.cols(); ++n) loglik_column(residuals, covs, out, n);
  return out;
}

void label_sweep_raster(LabelField& z, const Matrix& logliks, const Lattice& lattice, double beta,
                        StreamKey key) {
  check_logliks(logliks, z);
  for (Index n = 0; n < z.size(); ++n) z.set(n, draw_label(z, logliks, lattice, beta, key, n));
}

void label_sweep_colored(LabelField& z, const Matrix& logliks, const Lattice& lattice, double beta,
                         StreamKey key, int threads) {
  check_logliks(logliks, z);
  std::array<std::vector<Index>, 4> by_color;
  for (Index n = 0; n < z.size(); ++n) {
    by_color[static_cast<std::size_t>(lattice.color(n))].push_back(n);
  }
  for (const auto& pixels : by_color) {
    const auto count = static_cast<Index>(pixels.size());
    std::vector<int> drawn(pixels.size());
#pragma omp parallel for schedule(static) num_threads(std::max(1, threads))
    for (Index i = 0; i < count; ++i) {
      drawn[static_cast<std::size_t>(i)] =
          draw_label(z, logliks, lattice, beta, key, pixels[static_cast<std::size_t>(i)]);
    }
    for (std::size_t i = 0; i < pixels.size(); ++i) z.set(pixels[i], drawn[i]);
  }
}

AbundanceTerms::AbundanceTerms(const ClassCovariance& cov, const Matrix& shifted_endmembers)
    : weighted(cov.solve(shifted_endmembers)),
      precision(shifted_endmembers.transpose() * weighted) {
  precision = 0.5 * (precision + precision.transpose()).eval();
  precision_llt.compute(precision);
  if (precision_llt.info() != Eigen::Success) {
    precision.diagonal().array() += 1e-10;
    precision_llt.compute(precision);
    if (precision_llt.info() != Eigen::Success) {
      throw NumericalFailure("abundance precision matrix is not positive definite");
    }
  }
}

void abundance_update_serial(Matrix& free, const Matrix& shifted_pixels, const LabelField& z,
                             std::span<const AbundanceTerms> terms, StreamKey key, int sweeps) {
  check_abundance_inputs(free, shifted_pixels, z, terms);
  for (Index n = 0; n < free.cols(); ++n) {
    abundance_pixel(free, shifted_pixels, z, terms, key, sweeps, n);
  }
}

void abundance_update_parallel(Matrix& free, const Matrix& shifted_pixels, const LabelField& z,
                               std::span<const AbundanceTerms> terms, StreamKey key, int sweeps,
                               int threads) {
  check_abundance_inputs(free, shifted_pixels, z, terms);
  const Index n_pixels = free.cols();
  // Exceptions must not escape an OpenMP region; rethrow the first one after it.
  std::exception_ptr error;
#pragma omp parallel for schedule(static) num_threads(std::max(1, threads))
  for (Index n = 0; n < n_pixels; ++n) {
    try {
      abundance_pixel(free, shifted_pixels, z, terms, key, sweeps, n);
    } catch (...) {
#pragma omp critical(hsiu_abundance_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace hsiu
