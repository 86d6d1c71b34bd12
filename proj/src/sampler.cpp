#include "hsiu/sampler.hpp"

#include "hsiu/fcls.hpp"
#include "hsiu/kernels.hpp"
#include "hsiu/trunc_gauss.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace hsiu {

namespace {

constexpr double kInitMargin = 1e-6;
constexpr double kNoiseFloor = 1e-12;

// log IG(x; shape, scale) without the normalizing constant.
double log_inverse_gamma(double x, double shape, double scale) {
  return -(shape + 1.0) * std::log(x) - scale / x;
}

Matrix gather_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Index>(i)) = m.col(cols[i]);
  return out;
}

}  // namespace

void SamplerConfig::validate() const {
  if (iterations < 1) throw InvalidInput("iterations must be at least 1");
  if (burn_in < 0 || burn_in >= iterations) {
    throw InvalidInput("burn-in must satisfy 0 <= burn-in < iterations");
  }
  if (classes < 2 || classes > 64) throw InvalidInput("class count must be in [2, 64]");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw InvalidInput("beta must be positive");
  if (!(gamma > 0.0) || !(nu > 0.0)) throw InvalidInput("gamma and nu must be positive");
  if (adapt_interval < 1) throw InvalidInput("adaptation interval must be at least 1");
  if (!(adapt_factor >= 1.0)) throw InvalidInput("adaptation factor must be at least 1");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw InvalidInput("target acceptance must be in (0, 1)");
  }
  if (thinning < 1) throw InvalidInput("thinning must be at least 1");
  if (inner_sweeps < 1) throw InvalidInput("inner sweeps must be at least 1");
  if (!(initial_noise_step > 0.0) || !(initial_scale_step > 0.0)) {
    throw InvalidInput("initial proposal steps must be positive");
  }
  if (threads < 0) throw InvalidInput("thread count must be nonnegative");
}

RandomWalk::RandomWalk(Index size, double initial_step)
    : step(Vector::Constant(size, initial_step)),
      window_accepted(static_cast<std::size_t>(size), 0),
      window_proposed(static_cast<std::size_t>(size), 0),
      accepted(static_cast<std::size_t>(size), 0),
      proposed(static_cast<std::size_t>(size), 0) {}

void RandomWalk::record(Index i, bool accept) {
  const auto j = static_cast<std::size_t>(i);
  ++window_proposed[j];
  ++proposed[j];
  if (accept) {
    ++window_accepted[j];
    ++accepted[j];
  }
}

void RandomWalk::adapt(double factor, double lo, double hi) {
  for (std::size_t j = 0; j < window_proposed.size(); ++j) {
    if (window_proposed[j] > 0) {
      const double rate =
          static_cast<double>(window_accepted[j]) / static_cast<double>(window_proposed[j]);
      const auto i = static_cast<Index>(j);
      if (rate > hi) step(i) *= factor;
      else if (rate < lo) step(i) /= factor;
    }
    window_accepted[j] = 0;
    window_proposed[j] = 0;
  }
}

void RandomWalk::reset_totals() {
  std::fill(accepted.begin(), accepted.end(), 0);
  std::fill(proposed.begin(), proposed.end(), 0);
}

Vector RandomWalk::acceptance_rates() const {
  Vector out(static_cast<Index>(proposed.size()));
  for (std::size_t j = 0; j < proposed.size(); ++j) {
    out(static_cast<Index>(j)) =
        proposed[j] > 0 ? static_cast<double>(accepted[j]) / static_cast<double>(proposed[j])
                        : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

RcaSampler::RcaSampler(HyperspectralImage image, EndmemberMatrix endmembers, SamplerConfig config)
    : image_(std::move(image)),
      endmembers_(std::move(endmembers)),
      config_(config),
      kernel_(build_polynomial_kernel(endmembers_)),
      lattice_(image_.width(), image_.height(), config.neighborhood) {
  config_.validate();
  if (image_.bands() != endmembers_.bands()) {
    throw DimensionMismatch("image and endmember matrix disagree on the band count");
  }
  if (endmembers_.count() < 2) throw InvalidInput("unmixing requires at least two endmembers");
  const Matrix& m = endmembers_.values();
  const Index r = m.cols();
  shifted_endmembers_ = m.leftCols(r - 1).colwise() - m.col(r - 1);
  shifted_pixels_ = image_.data().colwise() - m.col(r - 1);
}

SamplerState RcaSampler::initial_state() const {
  FclsOptions opts;
  opts.threads = config_.threads;
  Matrix a = fcls(image_.data(), endmembers_, opts).abundances.values();
  a = a.cwiseMax(kInitMargin);
  a.array().rowwise() /= a.colwise().sum().array();

  const Matrix resid = image_.data() - endmembers_.values() * a;
  Vector noise = resid.cwiseAbs2().rowwise().mean().cwiseMax(kNoiseFloor);

  Vector scales(config_.classes - 1);
  for (Index k = 0; k < scales.size(); ++k) scales(k) = 0.01 * static_cast<double>(k + 1);

  return make_state(a.topRows(a.rows() - 1), LabelField(image_.width(), image_.height(), config_.classes),
                    std::move(noise), std::move(scales));
}

SamplerState RcaSampler::make_state(Matrix free_abundances, LabelField labels,
                                    Vector noise_variances, Vector scales) const {
  if (free_abundances.rows() != endmembers_.count() - 1 ||
      free_abundances.cols() != image_.pixels()) {
    throw DimensionMismatch("free abundance matrix must be (R-1) x N");
  }
  for (Index n = 0; n < free_abundances.cols(); ++n) {
    if (!in_open_simplex(free_abundances.col(n), 0.0)) {
      throw InvalidInput("initial abundances must lie in the open simplex");
    }
  }
  if (labels.width() != image_.width() || labels.height() != image_.height() ||
      labels.classes() != config_.classes) {
    throw DimensionMismatch("label field does not match the image or class count");
  }
  if (noise_variances.size() != image_.bands()) {
    throw DimensionMismatch("noise variance vector must have one entry per band");
  }
  if (!noise_variances.allFinite() || (noise_variances.array() <= 0.0).any()) {
    throw InvalidInput("noise variances must be finite and positive");
  }
  if (scales.size() != config_.classes - 1) {
    throw DimensionMismatch("scale vector must have K-1 entries");
  }
  if (!scales.allFinite() || (scales.array() <= 0.0).any()) {
    throw InvalidInput("nonlinearity scales must be finite and positive");
  }

  SamplerState s{std::move(free_abundances),
                 std::move(labels),
                 std::move(noise_variances),
                 std::move(scales),
                 RandomWalk(image_.bands(), config_.initial_noise_step),
                 RandomWalk(config_.classes - 1, config_.initial_scale_step),
                 Engine(config_.seed),
                 0,
                 0};
  return s;
}

Matrix RcaSampler::residuals(const Matrix& free_abundances) const {
  return shifted_pixels_ - shifted_endmembers_ * free_abundances;
}

std::vector<ClassCovariance> RcaSampler::class_covariances(const SamplerState& s) const {
  std::vector<ClassCovariance> covs;
  covs.reserve(static_cast<std::size_t>(config_.classes));
  covs.emplace_back(kernel_, 0.0, s.noise_variances);
  for (Index k = 0; k < s.scales.size(); ++k) {
    covs.emplace_back(kernel_, s.scales(k), s.noise_variances);
  }
  return covs;
}

std::vector<std::vector<Index>> RcaSampler::members(const LabelField& z) const {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(z.classes()));
  for (Index n = 0; n < z.size(); ++n) out[static_cast<std::size_t>(z[n])].push_back(n);
  return out;
}

double RcaSampler::class_loglik(const Matrix& residuals, double scale, const Vector& noise) const {
  if (residuals.cols() == 0) return 0.0;
  const ClassCovariance cov(kernel_, scale, noise);
  const double l = static_cast<double>(residuals.rows());
  const double per_pixel = -0.5 * l * std::log(2.0 * std::numbers::pi) - 0.5 * cov.log_det();
  return static_cast<double>(residuals.cols()) * per_pixel -
         0.5 * cov.quadratic_forms(residuals).sum();
}

void RcaSampler::sample_labels(SamplerState& s) const {
  const Matrix resid = residuals(s.free_abundances);
  const auto covs = class_covariances(s);
  const StreamKey key{config_.seed, s.kernel_pass++};
  if (config_.threads == 0) {
    const Matrix logliks = class_logliks_serial(resid, covs);
    label_sweep_raster(s.labels, logliks, lattice_, config_.beta, key);
  } else {
    const Matrix logliks = class_logliks_parallel(resid, covs, config_.threads);
    label_sweep_colored(s.labels, logliks, lattice_, config_.beta, key, config_.threads);
  }
}

void RcaSampler::sample_abundances(SamplerState& s) const {
  const auto covs = class_covariances(s);
  std::vector<AbundanceTerms> terms;
  terms.reserve(covs.size());
  for (const auto& cov : covs) terms.emplace_back(cov, shifted_endmembers_);
  const StreamKey key{config_.seed, s.kernel_pass++};
  if (config_.threads == 0) {
    abundance_update_serial(s.free_abundances, shifted_pixels_, s.labels, terms, key,
                            config_.inner_sweeps);
  } else {
    abundance_update_parallel(s.free_abundances, shifted_pixels_, s.labels, terms, key,
                              config_.inner_sweeps, config_.threads);
  }
}

// Bands are visited in order; each proposal sigma_l^2 -> sigma_l^2 + delta
// is a rank-one change of every Sigma_k, so with
//   c_k = 1 + delta * [Sigma_k^{-1}]_ll,  w_k = row l of Sigma_k^{-1} Ybar_k
// the log-likelihood ratio is
//   sum_k -N_k/2 log c_k + delta / (2 c_k) ||w_k||^2.
// Sigma_k^{-1} and Sigma_k^{-1} Ybar_k are rebuilt each call and updated by
// Sherman-Morrison after every accepted band.
void RcaSampler::sample_noise_variances(SamplerState& s) const {
  const Matrix resid = residuals(s.free_abundances);
  const auto groups = members(s.labels);
  const auto covs = class_covariances(s);

  struct ClassBlock {
    Matrix inverse;   // L x L
    Matrix weighted;  // L x N_k
    double count;
  };
  std::vector<ClassBlock> blocks;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) continue;
    Matrix ybar = gather_columns(resid, groups[k]);
    Matrix inv = covs[k].inverse();
    Matrix w = inv * ybar;
    blocks.push_back({std::move(inv), std::move(w), static_cast<double>(groups[k].size())});
  }

  const Index bands = s.noise_variances.size();
  std::vector<double> logr(static_cast<std::size_t>(bands));
  std::vector<double> deltas(static_cast<std::size_t>(bands));

  auto log_ratio = [&](Index l, double delta) {
    double out = 0.0;
    for (const auto& b : blocks) {
      const double c = 1.0 + delta * b.inverse(l, l);
      if (!(c > 0.0)) return -std::numeric_limits<double>::infinity();
      out += -0.5 * b.count * std::log(c) + 0.5 * (delta / c) * b.weighted.row(l).squaredNorm();
    }
    return out;
  };
  auto apply = [&](Index l, double delta) {
    for (auto& b : blocks) {
      const double c = 1.0 + delta * b.inverse(l, l);
      const Vector u = b.inverse.col(l);
      const Eigen::RowVectorXd wl = b.weighted.row(l);
      b.inverse.noalias() -= (delta / c) * (u * u.transpose());
      b.weighted.noalias() -= (delta / c) * (u * wl);
    }
  };

  if (config_.approximate_parallel_noise) {
    for (Index l = 0; l < bands; ++l) {
      const double proposed = s.noise_variances(l) * std::exp(s.noise_walk.step(l) * standard_normal(s.rng));
      deltas[static_cast<std::size_t>(l)] = proposed - s.noise_variances(l);
      logr[static_cast<std::size_t>(l)] = log_ratio(l, deltas[static_cast<std::size_t>(l)]);
    }
    for (Index l = 0; l < bands; ++l) {
      const bool accept = std::log(uniform_open(s.rng)) < logr[static_cast<std::size_t>(l)];
      s.noise_walk.record(l, accept);
      if (accept) s.noise_variances(l) += deltas[static_cast<std::size_t>(l)];
    }
    return;
  }

  for (Index l = 0; l < bands; ++l) {
    const double current = s.noise_variances(l);
    const double proposed = current * std::exp(s.noise_walk.step(l) * standard_normal(s.rng));
    const double delta = proposed - current;
    const bool accept = std::log(uniform_open(s.rng)) < log_ratio(l, delta);
    s.noise_walk.record(l, accept);
    if (!accept) continue;
    s.noise_variances(l) = proposed;
    apply(l, delta);
  }
}

void RcaSampler::sample_nonlinearity_scales(SamplerState& s) const {
  const Matrix resid = residuals(s.free_abundances);
  const auto groups = members(s.labels);
  for (Index k = 0; k < s.scales.size(); ++k) {
    const auto& idx = groups[static_cast<std::size_t>(k + 1)];
    if (idx.empty()) {
      // Empty class: the conditional is the IG(gamma, nu) prior.
      std::gamma_distribution<double> g(config_.gamma, 1.0 / config_.nu);
      s.scales(k) = 1.0 / g(s.rng);
      continue;
    }
    const Matrix ybar = gather_columns(resid, idx);
    const double current = s.scales(k);
    const double proposed = current * std::exp(s.scale_walk.step(k) * standard_normal(s.rng));
    const double logr = class_loglik(ybar, proposed, s.noise_variances) -
                        class_loglik(ybar, current, s.noise_variances) +
                        log_inverse_gamma(proposed, config_.gamma, config_.nu) -
                        log_inverse_gamma(current, config_.gamma, config_.nu) +
                        std::log(proposed) - std::log(current);
    const bool accept = std::log(uniform_open(s.rng)) < logr;
    s.scale_walk.record(k, accept);
    if (accept) s.scales(k) = proposed;
  }
}

double RcaSampler::log_posterior(const SamplerState& s) const {
  const Matrix resid = residuals(s.free_abundances);
  const auto groups = members(s.labels);
  double out = 0.0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    if (groups[k].empty()) continue;
    const double scale = k == 0 ? 0.0 : s.scales(static_cast<Index>(k) - 1);
    out += class_loglik(gather_columns(resid, groups[k]), scale, s.noise_variances);
  }
  out += config_.beta * static_cast<double>(agreeing_pairs(s.labels, lattice_));
  out -= s.noise_variances.array().log().sum();
  for (Index k = 0; k < s.scales.size(); ++k) {
    out += log_inverse_gamma(s.scales(k), config_.gamma, config_.nu);
  }
  return out;
}

void RcaSampler::step(SamplerState& s) const {
  if (config_.update_labels) sample_labels(s);
  if (config_.update_abundances) sample_abundances(s);
  if (config_.update_noise) sample_noise_variances(s);
  if (config_.update_scales) sample_nonlinearity_scales(s);
  ++s.iteration;

  if (s.iteration <= config_.burn_in && s.iteration % config_.adapt_interval == 0) {
    const double lo = config_.target_acceptance - 0.1;
    const double hi = config_.target_acceptance + 0.1;
    s.noise_walk.adapt(config_.adapt_factor, lo, hi);
    s.scale_walk.adapt(config_.adapt_factor, lo, hi);
  }
  if (s.iteration == config_.burn_in) {
    s.noise_walk.reset_totals();
    s.scale_walk.reset_totals();
  }

  if (!s.free_abundances.allFinite() || !s.noise_variances.allFinite() ||
      !s.scales.allFinite() || (s.noise_variances.array() <= 0.0).any() ||
      (s.scales.array() <= 0.0).any()) {
    throw ChainDivergence("non-finite or nonpositive sampler state", s.iteration);
  }
}

Chain RcaSampler::run() const { return run(initial_state()); }

Chain RcaSampler::run(SamplerState state) const {
  const auto start = std::chrono::steady_clock::now();
  Chain chain;
  chain.config = config_;
  chain.width = image_.width();
  chain.height = image_.height();
  chain.bands = image_.bands();
  chain.endmembers = endmembers_.count();
  const auto kept = static_cast<std::size_t>((config_.iterations - config_.burn_in) / config_.thinning);
  chain.free_abundances.reserve(kept);
  chain.labels.reserve(kept);
  chain.noise_variances.reserve(kept);
  chain.scales.reserve(kept);
  chain.log_posterior.reserve(static_cast<std::size_t>(config_.iterations));

  while (state.iteration < config_.iterations) {
    step(state);
    const double lp = log_posterior(state);
    if (!std::isfinite(lp)) throw ChainDivergence("non-finite log-posterior", state.iteration);
    chain.log_posterior.push_back(lp);
    const long past = state.iteration - config_.burn_in;
    if (past > 0 && past % config_.thinning == 0) {
      chain.free_abundances.push_back(state.free_abundances);
      chain.labels.push_back(state.labels.labels());
      chain.noise_variances.push_back(state.noise_variances);
      chain.scales.push_back(state.scales);
    }
  }
  chain.noise_acceptance = state.noise_walk.acceptance_rates();
  chain.scale_acceptance = state.scale_walk.acceptance_rates();
  chain.noise_steps = state.noise_walk.step;
  chain.scale_steps = state.scale_walk.step;
  chain.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return chain;
}

Chain run_rca_su(const HyperspectralImage& image, const EndmemberMatrix& endmembers,
                 const SamplerConfig& config) {
  return RcaSampler(image, endmembers, config).run();
}

Estimates estimate(const Chain& chain) {
  if (chain.size() == 0) throw InvalidInput("cannot estimate from an empty chain");
  const int classes = chain.config.classes;
  const Index n_pixels = chain.width * chain.height;
  const auto samples = chain.size();

  Matrix counts = Matrix::Zero(classes, n_pixels);
  for (const auto& z : chain.labels) {
    for (Index n = 0; n < n_pixels; ++n) counts(z[static_cast<std::size_t>(n)], n) += 1.0;
  }

  std::vector<int> map(static_cast<std::size_t>(n_pixels));
  for (Index n = 0; n < n_pixels; ++n) {
    Index best = 0;
    counts.col(n).maxCoeff(&best);  // first maximum, i.e. the smallest class on ties
    map[static_cast<std::size_t>(n)] = static_cast<int>(best);
  }

  const Index free_rows = chain.endmembers - 1;
  Matrix sum = Matrix::Zero(free_rows, n_pixels);
  for (std::size_t t = 0; t < samples; ++t) {
    for (Index n = 0; n < n_pixels; ++n) {
      if (chain.labels[t][static_cast<std::size_t>(n)] == map[static_cast<std::size_t>(n)]) {
        sum.col(n) += chain.free_abundances[t].col(n);
      }
    }
  }
  for (Index n = 0; n < n_pixels; ++n) sum.col(n) /= counts(map[static_cast<std::size_t>(n)], n);

  Matrix full(chain.endmembers, n_pixels);
  full.topRows(free_rows) = sum.cwiseMax(0.0);
  full.row(free_rows) = (1.0 - full.topRows(free_rows).colwise().sum().array()).cwiseMax(0.0).matrix();
  full.array().rowwise() /= full.colwise().sum().array();

  Vector noise = Vector::Zero(chain.bands);
  Vector scales = Vector::Zero(classes - 1);
  for (std::size_t t = 0; t < samples; ++t) {
    noise += chain.noise_variances[t];
    scales += chain.scales[t];
  }
  const double inv = 1.0 / static_cast<double>(samples);

  return Estimates{LabelField(chain.width, chain.height, classes, std::move(map)),
                   AbundanceMatrix(std::move(full)), noise * inv, scales * inv, counts * inv};
}

std::vector<int> scale_ordering(const Vector& scales) {
  std::vector<int> order(static_cast<std::size_t>(scales.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scales(a) < scales(b); });
  std::vector<int> perm(order.size() + 1);
  perm[0] = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    perm[static_cast<std::size_t>(order[rank]) + 1] = static_cast<int>(rank) + 1;
  }
  return perm;
}

Estimates align_nonlinear_classes(const Estimates& est) {
  const auto perm = scale_ordering(est.scales);
  std::vector<int> labels = est.labels.labels();
  for (int& z : labels) z = perm[static_cast<std::size_t>(z)];
  Vector scales(est.scales.size());
  Matrix posterior(est.label_posterior.rows(), est.label_posterior.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    posterior.row(perm[k]) = est.label_posterior.row(static_cast<Index>(k));
    if (k > 0) scales(perm[k] - 1) = est.scales(static_cast<Index>(k) - 1);
  }
  return Estimates{LabelField(est.labels.width(), est.labels.height(), est.labels.classes(),
                              std::move(labels)),
                   est.abundances, est.noise_variances, std::move(scales), std::move(posterior)};
}

}  // namespace hsiu
