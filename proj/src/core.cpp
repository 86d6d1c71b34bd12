#include "hsiu/core.hpp"

#include <cmath>

namespace hsiu {

EndmemberMatrix::EndmemberMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) {
    throw InvalidInput("endmember matrix must have at least one band and one endmember");
  }
  if (!values_.allFinite()) throw InvalidInput("endmember matrix contains non-finite values");
}

HyperspectralImage::HyperspectralImage(Index width, Index height, Matrix data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width_ < 1 || height_ < 1) throw InvalidInput("image dimensions must be positive");
  if (data_.cols() != width_ * height_) {
    throw DimensionMismatch("image data has " + std::to_string(data_.cols()) +
                            " pixels, expected W*H = " + std::to_string(width_ * height_));
  }
  if (data_.rows() < 1) throw InvalidInput("image must have at least one band");
  if (!data_.allFinite()) throw InvalidInput("image contains non-finite values");
}

AbundanceMatrix::AbundanceMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() < 2) throw InvalidInput("abundance matrix needs at least two endmembers");
  if (!values_.allFinite()) throw InvalidInput("abundance matrix contains non-finite values");
  for (Index n = 0; n < values_.cols(); ++n) {
    if ((values_.col(n).array() < 0.0).any()) {
      throw InvalidInput("abundance column " + std::to_string(n) + " has a negative entry");
    }
    if (std::abs(values_.col(n).sum() - 1.0) > kSumTolerance) {
      throw InvalidInput("abundance column " + std::to_string(n) + " does not sum to one");
    }
  }
}

AbundanceMatrix AbundanceMatrix::from_free(const Matrix& free) {
  Matrix a(free.rows() + 1, free.cols());
  a.topRows(free.rows()) = free;
  a.row(free.rows()) = (1.0 - free.colwise().sum().array()).matrix();
  return AbundanceMatrix(std::move(a));
}

}  // namespace hsiu
