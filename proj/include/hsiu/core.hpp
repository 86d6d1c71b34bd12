// Core domain types shared by every hsiu module: endmember matrices,
// hyperspectral images, abundance matrices and the error hierarchy.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hsiu {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad arguments: non-finite values, out-of-range parameters, malformed files.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operands whose shapes do not agree.
class DimensionMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// A factorization failed even after the bounded jitter retry.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constrained sampler could not produce a valid draw.
class SamplingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The Markov chain produced a non-finite state.
class ChainDivergence : public std::runtime_error {
 public:
  ChainDivergence(const std::string& what, long iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// L x R matrix of known pure spectra; endmembers are the columns.
class EndmemberMatrix {
 public:
  explicit EndmemberMatrix(Matrix values);

  const Matrix& values() const noexcept { return values_; }
  Index bands() const noexcept { return values_.rows(); }
  Index count() const noexcept { return values_.cols(); }

 private:
  Matrix values_;
};

/// W x H grid of L-band spectra stored as an L x N matrix. Pixel n sits at
/// row-major grid position (n / W, n % W).
class HyperspectralImage {
 public:
  HyperspectralImage(Index width, Index height, Matrix data);

  Index width() const noexcept { return width_; }
  Index height() const noexcept { return height_; }
  Index bands() const noexcept { return data_.rows(); }
  Index pixels() const noexcept { return data_.cols(); }
  const Matrix& data() const noexcept { return data_; }
  auto pixel(Index n) const { return data_.col(n); }

 private:
  Index width_;
  Index height_;
  Matrix data_;
};

/// R x N abundance matrix. Columns are nonnegative and sum to one.
///
/// The sampler works on the free parameterization C ((R-1) x N) in which the
/// last abundance is implied: a_R = 1 - sum(c).
class AbundanceMatrix {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit AbundanceMatrix(Matrix values);
  static AbundanceMatrix from_free(const Matrix& free);

  const Matrix& values() const noexcept { return values_; }
  Matrix free() const { return values_.topRows(values_.rows() - 1); }
  Index endmembers() const noexcept { return values_.rows(); }
  Index pixels() const noexcept { return values_.cols(); }

 private:
  Matrix values_;
};

}  // namespace hsiu
