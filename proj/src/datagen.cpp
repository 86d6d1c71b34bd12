#include "hsiu/datagen.hpp"

#include "hsiu/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace hsiu {

std::string to_string(Scenario s) {
  return s == Scenario::RcaLevels ? "rca-levels" : "mixed-models";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "rca-levels") return Scenario::RcaLevels;
  if (s == "mixed-models") return Scenario::MixedModels;
  throw InvalidInput("unknown scenario '" + s + "' (expected rca-levels or mixed-models)");
}

void ScenarioSpec::validate() const {
  if (width < 1 || height < 1) throw InvalidInput("width and height must be positive");
  if (bands < 2) throw InvalidInput("at least two bands are required");
  if (endmembers < 2) throw InvalidInput("at least two endmembers are required");
  if (classes < 2) throw InvalidInput("at least two classes are required");
  if (!(beta >= 0.0)) throw InvalidInput("beta must be nonnegative");
  if (potts_sweeps < 1) throw InvalidInput("potts_sweeps must be >= 1");
  if (!noise.colored && !(noise.variance > 0.0)) {
    throw InvalidInput("i.i.d. noise variance must be positive");
  }
  if (scenario == Scenario::RcaLevels) {
    if (static_cast<int>(rca_scales.size()) != classes - 1) {
      throw InvalidInput("rca-levels needs exactly K-1 nonlinearity scales");
    }
    for (double s : rca_scales) {
      if (!(s > 0.0)) throw InvalidInput("nonlinearity scales must be positive");
    }
  } else {
    if (classes != 4) throw InvalidInput("mixed-models uses exactly four classes");
    if (!(gbm_gamma_min <= gbm_gamma_max)) throw InvalidInput("GBM gamma range is empty");
    if (!(rca_scale > 0.0)) throw InvalidInput("RCA scale must be positive");
  }
}

Vector sample_uniform_simplex(Index count, Engine& rng) {
  if (count < 2) throw InvalidInput("simplex sampling needs at least two components");
  Vector a(count);
  for (Index r = 0; r < count; ++r) a(r) = -std::log(uniform_open(rng));
  return a / a.sum();
}

PixelMix gen_rca_pixel(const EndmemberMatrix& m, const Vector& a, double scale,
                       const KernelMatrix& kernel, Engine& rng) {
  if (!(scale >= 0.0)) throw InvalidInput("RCA scale must be nonnegative");
  PixelMix out;
  Vector g(kernel.rank_bound());
  for (Index i = 0; i < g.size(); ++i) g(i) = standard_normal(rng);
  out.phi = std::sqrt(scale) * (kernel.factor * g);
  out.y = m.values() * a + out.phi;
  return out;
}

PixelMix gen_gbm_pixel(const EndmemberMatrix& m, const Vector& a, const Matrix& gamma) {
  const Matrix& e = m.values();
  PixelMix out;
  out.phi = Vector::Zero(e.rows());
  for (Index i = 0; i < e.cols(); ++i) {
    for (Index j = i + 1; j < e.cols(); ++j) {
      out.phi += (gamma(i, j) * a(i) * a(j)) * e.col(i).cwiseProduct(e.col(j));
    }
  }
  out.y = e * a + out.phi;
  return out;
}

PixelMix gen_ppnmm_pixel(const EndmemberMatrix& m, const Vector& a, double b) {
  PixelMix out;
  const Vector u = m.values() * a;
  out.phi = b * u.cwiseAbs2();
  out.y = u + out.phi;
  return out;
}

Vector colored_noise_variances(Index bands) {
  if (bands < 2) throw InvalidInput("colored noise needs at least two bands");
  Vector v(bands);
  for (Index l = 1; l <= bands; ++l) {
    v(l - 1) = 1e-4 * (2.0 - std::sin(std::numbers::pi * static_cast<double>(l) /
                                      static_cast<double>(bands - 1)));
  }
  return v;
}

EndmemberMatrix synthetic_smooth_endmembers(Index bands, Index count, Engine& rng) {
  std::uniform_int_distribution<int> n_bumps(3, 5);
  std::uniform_real_distribution<double> center(0.0, 1.0);
  std::uniform_real_distribution<double> width(0.05, 0.25);
  std::uniform_real_distribution<double> height(0.15, 0.6);
  Matrix m(bands, count);
  for (Index r = 0; r < count; ++r) {
    const int k = n_bumps(rng);
    std::vector<std::array<double, 3>> bumps;
    for (int i = 0; i < k; ++i) bumps.push_back({center(rng), width(rng), height(rng)});
    for (Index l = 0; l < bands; ++l) {
      const double x = static_cast<double>(l) / static_cast<double>(std::max<Index>(bands - 1, 1));
      double v = 0.05;
      for (const auto& [c, w, h] : bumps) v += h * std::exp(-0.5 * (x - c) * (x - c) / (w * w));
      m(l, r) = std::clamp(v, 0.01, 0.95);
    }
  }
  return EndmemberMatrix(std::move(m));
}

SyntheticDataset generate(const ScenarioSpec& spec, const EndmemberMatrix& endmembers,
                          Engine& rng) {
  spec.validate();
  if (endmembers.bands() != spec.bands || endmembers.count() != spec.endmembers) {
    throw DimensionMismatch("endmember matrix is " + std::to_string(endmembers.bands()) + "x" +
                            std::to_string(endmembers.count()) + ", spec expects " +
                            std::to_string(spec.bands) + "x" + std::to_string(spec.endmembers));
  }
  const Index bands = spec.bands;
  const Index count = spec.endmembers;
  const Index n_pixels = spec.width * spec.height;
  const int k_classes = spec.classes;

  LabelField labels = sample_potts_field(spec.width, spec.height, k_classes, spec.beta,
                                         spec.potts_sweeps, rng, spec.neighborhood);

  Vector scales = Vector::Constant(k_classes - 1, std::numeric_limits<double>::quiet_NaN());
  if (spec.scenario == Scenario::RcaLevels) {
    for (int k = 1; k < k_classes; ++k) scales(k - 1) = spec.rca_scales[static_cast<std::size_t>(k - 1)];
  } else {
    scales(2) = spec.rca_scale;
  }

  const KernelMatrix kernel = build_polynomial_kernel(endmembers);
  const Vector noise_var = spec.noise.colored ? colored_noise_variances(bands)
                                              : Vector::Constant(bands, spec.noise.variance);

  Matrix a(count, n_pixels);
  Matrix clean(bands, n_pixels);
  Matrix phi(bands, n_pixels);
  Matrix noise(bands, n_pixels);
  std::uniform_real_distribution<double> gamma_draw(spec.gbm_gamma_min, spec.gbm_gamma_max);

  for (Index n = 0; n < n_pixels; ++n) {
    const Vector an = sample_uniform_simplex(count, rng);
    a.col(n) = an;
    const int k = labels[n];
    PixelMix mix;
    if (k == 0) {
      mix.phi = Vector::Zero(bands);
      mix.y = endmembers.values() * an;
    } else if (spec.scenario == Scenario::RcaLevels || k == 3) {
      mix = gen_rca_pixel(endmembers, an, scales(k - 1), kernel, rng);
    } else if (k == 1) {
      Matrix gamma = Matrix::Zero(count, count);
      for (Index i = 0; i < count; ++i) {
        for (Index j = i + 1; j < count; ++j) gamma(i, j) = gamma_draw(rng);
      }
      mix = gen_gbm_pixel(endmembers, an, gamma);
    } else {
      mix = gen_ppnmm_pixel(endmembers, an, spec.ppnmm_b);
    }
    phi.col(n) = mix.phi;
    clean.col(n) = mix.y;
  }
  for (Index n = 0; n < n_pixels; ++n) {
    for (Index l = 0; l < bands; ++l) noise(l, n) = std::sqrt(noise_var(l)) * standard_normal(rng);
  }

  return SyntheticDataset{
      spec,
      endmembers,
      HyperspectralImage(spec.width, spec.height, clean + noise),
      AbundanceMatrix(std::move(a)),
      std::move(labels),
      std::move(phi),
      std::move(noise),
      noise_var,
      scales,
  };
}

SyntheticDataset generate(const ScenarioSpec& spec) {
  spec.validate();
  Engine rng(spec.seed);
  if (!spec.endmember_file.empty()) {
    return generate(spec, read_endmembers_csv(spec.endmember_file), rng);
  }
  const EndmemberMatrix m = synthetic_smooth_endmembers(spec.bands, spec.endmembers, rng);
  return generate(spec, m, rng);
}

}  // namespace hsiu
