// Synthetic scene generation: Potts label maps, flat-Dirichlet abundances,
// four mixing models (LMM, GBM, PPNMM, RCA) and colored or i.i.d. noise.
#pragma once

#include "hsiu/core.hpp"
#include "hsiu/covariance.hpp"
#include "hsiu/mrf.hpp"
#include "hsiu/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hsiu {

enum class Scenario {
  RcaLevels,    // class 0 linear, classes 1..K-1 RCA with increasing s^2
  MixedModels,  // K = 4: LMM, GBM, PPNMM, RCA
};

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

struct NoiseSpec {
  bool colored = true;      // 1e-4 * (2 - sin(pi l / (L-1))), l = 1..L
  double variance = 1e-4;   // used when !colored
};

struct ScenarioSpec {
  Scenario scenario = Scenario::RcaLevels;
  Index width = 30;
  Index height = 30;
  Index bands = 64;
  Index endmembers = 3;
  int classes = 4;
  double beta = 1.2;
  NeighborhoodOrder neighborhood = NeighborhoodOrder::EightPixel;
  int potts_sweeps = 200;
  std::vector<double> rca_scales{0.01, 0.1, 1.0};  // rca-levels, one per nonlinear class
  double gbm_gamma_min = 0.5;                       // mixed-models
  double gbm_gamma_max = 1.0;
  double ppnmm_b = 0.5;
  double rca_scale = 0.1;
  NoiseSpec noise;
  std::uint64_t seed = 7;
  std::string endmember_file;  // empty: synthetic-smooth spectra

  /// Throws InvalidInput when the parameters are inconsistent.
  void validate() const;
};

struct PixelMix {
  Vector y;    // M a + phi (noise not included)
  Vector phi;
};

struct SyntheticDataset {
  ScenarioSpec spec;
  EndmemberMatrix endmembers;
  HyperspectralImage image;
  AbundanceMatrix abundances;
  LabelField labels;
  Matrix nonlinearity;    // L x N, the phi_n
  Matrix noise;           // L x N, the e_n
  Vector noise_variances;
  Vector scales;          // K-1 entries; NaN for classes not generated by RCA
};

/// Flat Dirichlet draw: strictly positive, sums to one.
Vector sample_uniform_simplex(Index count, Engine& rng);

/// phi = s Q g with g ~ N(0, I_m), an exact draw from N(0, s^2 K_M).
PixelMix gen_rca_pixel(const EndmemberMatrix& m, const Vector& a, double scale,
                       const KernelMatrix& kernel, Engine& rng);

/// Generalized bilinear model. `gamma` is R x R; only the strict upper
/// triangle is read.
PixelMix gen_gbm_pixel(const EndmemberMatrix& m, const Vector& a, const Matrix& gamma);

/// Polynomial post-nonlinear model: u = M a, phi = b (u * u).
PixelMix gen_ppnmm_pixel(const EndmemberMatrix& m, const Vector& a, double b);

/// sigma_l^2 = 1e-4 * (2 - sin(pi l / (L - 1))) for l = 1..L. Requires L >= 2.
Vector colored_noise_variances(Index bands);

/// R smooth positive spectra on a normalized wavelength axis, each a
/// clipped sum of 3-5 Gaussian bumps over a small baseline.
EndmemberMatrix synthetic_smooth_endmembers(Index bands, Index count, Engine& rng);

SyntheticDataset generate(const ScenarioSpec& spec, const EndmemberMatrix& endmembers, Engine& rng);

/// Builds the endmembers (file or synthetic) and seeds the engine from spec.seed.
SyntheticDataset generate(const ScenarioSpec& spec);

}  // namespace hsiu
