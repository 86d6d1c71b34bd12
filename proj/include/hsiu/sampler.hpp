// Metropolis-within-Gibbs sampler for the residual-component-analysis
// mixing model
//
//   y_n = M a_n + phi_n + e_n,  e_n ~ N(0, diag(sigma^2)),
//   phi_n | z_n = k ~ N(0, s_k^2 K_M)  (phi_n = 0 for k = 0),
//
// with phi marginalized out. One iteration updates, in order: the labels z
// (Potts prior), the abundances C (truncated Gaussians on the simplex), the
// noise variances sigma^2 (log-space random walks, one per band) and the
// class scales s^2 (log-space random walks, one per nonlinear class).
#pragma once

#include "hsiu/core.hpp"
#include "hsiu/covariance.hpp"
#include "hsiu/mrf.hpp"
#include "hsiu/rng.hpp"

#include <cstdint>
#include <vector>

namespace hsiu {

struct SamplerConfig {
  int iterations = 3000;  // N_MC
  int burn_in = 1000;     // N_bi
  int classes = 4;        // K
  double beta = 1.2;
  double gamma = 1.0;     // inverse-gamma shape for s_k^2
  double nu = 0.25;       // inverse-gamma scale for s_k^2
  NeighborhoodOrder neighborhood = NeighborhoodOrder::EightPixel;
  std::uint64_t seed = 1;
  int adapt_interval = 50;
  double adapt_factor = 1.1;
  double target_acceptance = 0.5;  // steps grow above target + 0.1, shrink below target - 0.1
  int thinning = 1;
  int inner_sweeps = 5;            // Gibbs scans per simplex-Gaussian draw
  double initial_noise_step = 0.5;    // log-space; large so sigma^2 leaves the FCLS-residual start quickly
  double initial_scale_step = 0.1;
  int threads = 0;                 // 0 = sequential reference kernels

  bool update_labels = true;
  bool update_abundances = true;
  bool update_noise = true;
  bool update_scales = true;
  // Evaluates every band's proposal against the same state and accepts them
  // independently. Ignores the coupling of bands through Sigma_k, so it does
  // not target the exact conditional.
  bool approximate_parallel_noise = false;

  /// Throws InvalidInput when a field is out of range.
  void validate() const;
};

/// Per-coordinate Gaussian random-walk step sizes with acceptance bookkeeping.
struct RandomWalk {
  Vector step;
  std::vector<long> window_accepted;
  std::vector<long> window_proposed;
  std::vector<long> accepted;
  std::vector<long> proposed;

  RandomWalk() = default;
  RandomWalk(Index size, double initial_step);

  void record(Index i, bool accept);
  /// Multiply step i by factor when its window acceptance is above hi,
  /// divide when below lo; then clear the windows.
  void adapt(double factor, double lo, double hi);
  void reset_totals();
  Vector acceptance_rates() const;
};

struct SamplerState {
  Matrix free_abundances;  // (R-1) x N
  LabelField labels;
  Vector noise_variances;  // L
  Vector scales;           // K-1, for classes 1..K-1
  RandomWalk noise_walk;
  RandomWalk scale_walk;
  Engine rng;
  long iteration = 0;
  std::uint64_t kernel_pass = 0;
};

struct Chain {
  SamplerConfig config;
  Index width = 0;
  Index height = 0;
  Index bands = 0;
  Index endmembers = 0;
  std::vector<Matrix> free_abundances;
  std::vector<std::vector<int>> labels;
  std::vector<Vector> noise_variances;
  std::vector<Vector> scales;
  std::vector<double> log_posterior;  // one entry per iteration, burn-in included
  Vector noise_acceptance;            // post-burn-in acceptance rates
  Vector scale_acceptance;
  Vector noise_steps;                 // frozen step sizes
  Vector scale_steps;
  double runtime_seconds = 0.0;

  std::size_t size() const noexcept { return labels.size(); }
};

struct Estimates {
  LabelField labels;          // per-pixel marginal MAP
  AbundanceMatrix abundances; // mean of c_n over samples with z_n == MAP label
  Vector noise_variances;     // posterior means
  Vector scales;
  Matrix label_posterior;     // K x N empirical label frequencies
};

class RcaSampler {
 public:
  RcaSampler(HyperspectralImage image, EndmemberMatrix endmembers, SamplerConfig config);

  /// FCLS abundances clamped to the open simplex (margin 1e-6), z = 0,
  /// sigma_l^2 = mean squared FCLS residual in band l, s_k^2 = k / 100.
  SamplerState initial_state() const;

  /// State from explicit values (validated).
  SamplerState make_state(Matrix free_abundances, LabelField labels, Vector noise_variances,
                          Vector scales) const;

  void sample_labels(SamplerState& s) const;
  void sample_abundances(SamplerState& s) const;
  void sample_noise_variances(SamplerState& s) const;
  void sample_nonlinearity_scales(SamplerState& s) const;

  /// One full iteration: the four blocks, burn-in adaptation and the
  /// divergence check. Throws ChainDivergence on a non-finite state.
  void step(SamplerState& s) const;

  Chain run() const;
  Chain run(SamplerState state) const;

  /// Log of the marginalized posterior up to an additive constant.
  double log_posterior(const SamplerState& s) const;

  /// y_n - M a_n for every pixel.
  Matrix residuals(const Matrix& free_abundances) const;
  std::vector<ClassCovariance> class_covariances(const SamplerState& s) const;

  const SamplerConfig& config() const noexcept { return config_; }
  const KernelMatrix& kernel() const noexcept { return kernel_; }
  const HyperspectralImage& image() const noexcept { return image_; }
  const EndmemberMatrix& endmembers() const noexcept { return endmembers_; }
  const Lattice& lattice() const noexcept { return lattice_; }

 private:
  std::vector<std::vector<Index>> members(const LabelField& z) const;
  double class_loglik(const Matrix& residuals, double scale, const Vector& noise) const;

  HyperspectralImage image_;
  EndmemberMatrix endmembers_;
  SamplerConfig config_;
  KernelMatrix kernel_;
  Lattice lattice_;
  Matrix shifted_endmembers_;  // [m_1 - m_R, ..., m_{R-1} - m_R]
  Matrix shifted_pixels_;      // y_n - m_R
};

Chain run_rca_su(const HyperspectralImage& image, const EndmemberMatrix& endmembers,
                 const SamplerConfig& config);

/// Marginal MAP labels (ties to the smaller class), conditional MMSE
/// abundances, posterior-mean sigma^2 and s^2. Throws InvalidInput for an
/// empty chain.
Estimates estimate(const Chain& chain);

/// Relabels nonlinear classes so that the estimated scales ascend; class 0
/// stays fixed. Returns perm with perm[old] = new.
std::vector<int> scale_ordering(const Vector& scales);
Estimates align_nonlinear_classes(const Estimates& est);

}  // namespace hsiu
