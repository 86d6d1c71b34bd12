// Per-pixel kernels of the sampler, each with a serial reference driver and
// an OpenMP driver.
//
// Randomness comes from CounterStream(seed, pass, pixel, block), so a
// pixel's draw is independent of the visiting order and of the number of
// threads. The abundance drivers are bit-identical to each other. The label
// drivers differ in visiting order: the raster driver is the sequential
// reference; the colored driver updates the four parity classes of the
// lattice one after another, which is a valid Gibbs scan because same-color
// pixels are never neighbors.
#pragma once

#include "hsiu/core.hpp"
#include "hsiu/covariance.hpp"
#include "hsiu/mrf.hpp"

#include <cstdint>
#include <span>

namespace hsiu {

enum class KernelBlock : std::uint64_t { Labels = 1, Abundances = 2 };

struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t pass = 0;  // increments on every kernel invocation
};

/// K x N matrix of marginal_pixel_loglik(residual_n, covs[k]).
Matrix class_logliks_serial(const Matrix& residuals, std::span<const ClassCovariance> covs);
Matrix class_logliks_parallel(const Matrix& residuals, std::span<const ClassCovariance> covs,
                              int threads);

/// Draws z_n with probability proportional to
/// exp(potts_local_logweight(n, k) + logliks(k, n)).
void label_sweep_raster(LabelField& z, const Matrix& logliks, const Lattice& lattice, double beta,
                        StreamKey key);
void label_sweep_colored(LabelField& z, const Matrix& logliks, const Lattice& lattice, double beta,
                         StreamKey key, int threads);

/// Class-level terms for the abundance conditional: with Mt = [m_1 - m_R, ...],
/// weighted = Sigma_k^{-1} Mt and precision = Mt^T Sigma_k^{-1} Mt.
struct AbundanceTerms {
  Matrix weighted;
  Matrix precision;
  Eigen::LLT<Matrix> precision_llt;

  /// Throws NumericalFailure if the precision is not SPD even after jitter.
  AbundanceTerms(const ClassCovariance& cov, const Matrix& shifted_endmembers);
};

/// c_n ~ N_S(cbar_n, Psi_n) with Psi_n = precision^{-1} and
/// cbar_n = Psi_n weighted^T (y_n - m_R). Warm-starts from the current c_n.
void abundance_update_serial(Matrix& free, const Matrix& shifted_pixels, const LabelField& z,
                             std::span<const AbundanceTerms> terms, StreamKey key, int sweeps);
void abundance_update_parallel(Matrix& free, const Matrix& shifted_pixels, const LabelField& z,
                               std::span<const AbundanceTerms> terms, StreamKey key, int sweeps,
                               int threads);

}  // namespace hsiu
