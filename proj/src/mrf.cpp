#include "hsiu/mrf.hpp"

#include <array>
#include <cmath>

namespace hsiu {

LabelField::LabelField(Index width, Index height, int classes)
    : LabelField(width, height, classes,
                 std::vector<int>(static_cast<std::size_t>(width * height), 0)) {}

LabelField::LabelField(Index width, Index height, int classes, std::vector<int> labels)
    : width_(width), height_(height), classes_(classes), labels_(std::move(labels)) {
  if (width_ < 1 || height_ < 1) throw InvalidInput("label field dimensions must be positive");
  if (classes_ < 1) throw InvalidInput("label field needs at least one class");
  if (static_cast<Index>(labels_.size()) != width_ * height_) {
    throw DimensionMismatch("label vector length does not equal W*H");
  }
  for (int k : labels_) {
    if (k < 0 || k >= classes_) throw InvalidInput("label out of range: " + std::to_string(k));
  }
}

void LabelField::set(Index n, int k) {
  if (k < 0 || k >= classes_) throw InvalidInput("label out of range: " + std::to_string(k));
  labels_[static_cast<std::size_t>(n)] = k;
}

std::vector<Index> LabelField::histogram() const {
  std::vector<Index> h(static_cast<std::size_t>(classes_), 0);
  for (int k : labels_) ++h[static_cast<std::size_t>(k)];
  return h;
}

std::vector<Index> neighbors(Index n, Index width, Index height, NeighborhoodOrder order) {
  if (n < 0 || n >= width * height) {
    throw InvalidInput("pixel index " + std::to_string(n) + " out of range");
  }
  static constexpr std::array<std::array<int, 2>, 4> kFour{{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};
  static constexpr std::array<std::array<int, 2>, 8> kEight{
      {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

  const Index row = n / width;
  const Index col = n % width;
  std::vector<Index> out;
  auto visit = [&](const auto& offsets) {
    for (const auto& [dr, dc] : offsets) {
      const Index r = row + dr;
      const Index c = col + dc;
      if (r >= 0 && r < height && c >= 0 && c < width) out.push_back(r * width + c);
    }
  };
  if (order == NeighborhoodOrder::FourPixel) {
    visit(kFour);
  } else {
    visit(kEight);
  }
  return out;
}

Lattice::Lattice(Index width, Index height, NeighborhoodOrder order)
    : width_(width), height_(height), order_(order) {
  if (width < 1 || height < 1) throw InvalidInput("lattice dimensions must be positive");
  offsets_.reserve(static_cast<std::size_t>(width * height) + 1);
  offsets_.push_back(0);
  for (Index n = 0; n < width * height; ++n) {
    for (Index m : hsiu::neighbors(n, width, height, order)) adjacency_.push_back(m);
    offsets_.push_back(adjacency_.size());
  }
}

double potts_local_logweight(const LabelField& z, const Lattice& lattice, Index n, int k,
                             double beta) {
  if (n < 0 || n >= z.size()) throw InvalidInput("pixel index out of range");
  int count = 0;
  for (Index m : lattice.neighbors(n)) count += (z[m] == k);
  return beta * count;
}

Index agreeing_pairs(const LabelField& z, const Lattice& lattice) {
  Index pairs = 0;
  for (Index n = 0; n < z.size(); ++n) {
    for (Index m : lattice.neighbors(n)) {
      if (m > n && z[m] == z[n]) ++pairs;
    }
  }
  return pairs;
}

void potts_gibbs_sweep(LabelField& z, const Lattice& lattice, double beta, Engine& rng) {
  std::vector<double> logw(static_cast<std::size_t>(z.classes()));
  for (Index n = 0; n < z.size(); ++n) {
    std::fill(logw.begin(), logw.end(), 0.0);
    for (Index m : lattice.neighbors(n)) logw[static_cast<std::size_t>(z[m])] += beta;
    z.set(n, sample_categorical_log<Engine>(logw, rng));
  }
}

LabelField sample_potts_field(Index width, Index height, int classes, double beta, int sweeps,
                              Engine& rng, NeighborhoodOrder order) {
  if (classes < 2) throw InvalidInput("Potts field needs at least two classes");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidInput("beta must be finite and >= 0");
  if (sweeps < 1) throw InvalidInput("at least one Gibbs sweep is required");

  const Lattice lattice(width, height, order);
  std::uniform_int_distribution<int> uniform(0, classes - 1);
  std::vector<int> init(static_cast<std::size_t>(width * height));
  for (int& k : init) k = uniform(rng);
  LabelField z(width, height, classes, std::move(init));
  for (int s = 0; s < sweeps; ++s) potts_gibbs_sweep(z, lattice, beta, rng);
  return z;
}

}  // namespace hsiu
