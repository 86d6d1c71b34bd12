// Potts-Markov random field on a rectangular pixel grid with free
// (truncated) boundaries.
#pragma once

#include "hsiu/core.hpp"
#include "hsiu/rng.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace hsiu {

enum class NeighborhoodOrder { FourPixel, EightPixel };

/// W x H grid of class labels in {0, ..., K-1}, row-major.
class LabelField {
 public:
  LabelField(Index width, Index height, int classes);
  LabelField(Index width, Index height, int classes, std::vector<int> labels);

  Index width() const noexcept { return width_; }
  Index height() const noexcept { return height_; }
  Index size() const noexcept { return static_cast<Index>(labels_.size()); }
  int classes() const noexcept { return classes_; }

  int operator[](Index n) const { return labels_[static_cast<std::size_t>(n)]; }
  void set(Index n, int k);
  const std::vector<int>& labels() const noexcept { return labels_; }
  std::vector<Index> histogram() const;

  friend bool operator==(const LabelField&, const LabelField&) = default;

 private:
  Index width_;
  Index height_;
  int classes_;
  std::vector<int> labels_;
};

/// In-bounds neighbors of pixel n (no self, no duplicates).
std::vector<Index> neighbors(Index n, Index width, Index height, NeighborhoodOrder order);

/// Neighbor lists for every pixel, precomputed once.
class Lattice {
 public:
  Lattice(Index width, Index height, NeighborhoodOrder order);

  Index width() const noexcept { return width_; }
  Index height() const noexcept { return height_; }
  Index size() const noexcept { return width_ * height_; }
  NeighborhoodOrder order() const noexcept { return order_; }

  std::span<const Index> neighbors(Index n) const {
    const auto b = offsets_[static_cast<std::size_t>(n)];
    const auto e = offsets_[static_cast<std::size_t>(n) + 1];
    return {adjacency_.data() + b, e - b};
  }

  /// 2 x 2 parity coloring: no two neighbors (4- or 8-connected) share a
  /// color, so all pixels of one color can be updated simultaneously.
  int color(Index n) const noexcept {
    return static_cast<int>(2 * ((n / width_) % 2) + (n % width_) % 2);
  }

 private:
  Index width_;
  Index height_;
  NeighborhoodOrder order_;
  std::vector<std::size_t> offsets_;
  std::vector<Index> adjacency_;
};

/// beta times the number of neighbors of n currently labeled k.
double potts_local_logweight(const LabelField& z, const Lattice& lattice, Index n, int k,
                             double beta);

/// Number of unordered neighbor pairs sharing a label. The Potts log-prior
/// is beta times this count (up to the partition constant), which is the
/// joint law whose single-site conditionals are potts_local_logweight.
Index agreeing_pairs(const LabelField& z, const Lattice& lattice);

/// One raster-order single-site Gibbs sweep of the Potts prior.
void potts_gibbs_sweep(LabelField& z, const Lattice& lattice, double beta, Engine& rng);

/// Uniform random start followed by `sweeps` Gibbs sweeps. Throws
/// InvalidInput for K < 2, beta < 0 or sweeps < 1.
LabelField sample_potts_field(Index width, Index height, int classes, double beta, int sweeps,
                              Engine& rng,
                              NeighborhoodOrder order = NeighborhoodOrder::EightPixel);

/// Draw an index from unnormalized log-weights (max-subtracted).
template <class Urbg>
int sample_categorical_log(std::span<const double> logw, Urbg& rng) {
  double mx = logw[0];
  for (double v : logw) mx = v > mx ? v : mx;
  double total = 0.0;
  for (double v : logw) total += std::exp(v - mx);
  double u = uniform_open(rng) * total;
  const int k_last = static_cast<int>(logw.size()) - 1;
  for (int k = 0; k < k_last; ++k) {
    u -= std::exp(logw[static_cast<std::size_t>(k)] - mx);
    if (u <= 0.0) return k;
  }
  return k_last;
}

}  // namespace hsiu
