#include "hsiu/core.hpp"

#include <doctest.h>

#include <limits>

using namespace hsiu;

TEST_CASE("endmember matrix validates shape and finiteness") {
  CHECK_NOTHROW(EndmemberMatrix(Matrix::Ones(4, 2)));
  CHECK_THROWS_AS(EndmemberMatrix(Matrix(0, 2)), InvalidInput);
  Matrix bad = Matrix::Ones(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(EndmemberMatrix{bad}, InvalidInput);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(EndmemberMatrix{bad}, InvalidInput);

  const EndmemberMatrix m(Matrix::Ones(5, 3));
  CHECK(m.bands() == 5);
  CHECK(m.count() == 3);
}

TEST_CASE("image requires N = W*H and finite data") {
  CHECK_NOTHROW(HyperspectralImage(3, 2, Matrix::Zero(4, 6)));
  CHECK_THROWS_AS(HyperspectralImage(3, 2, Matrix::Zero(4, 5)), DimensionMismatch);
  CHECK_THROWS_AS(HyperspectralImage(0, 2, Matrix::Zero(4, 0)), InvalidInput);
  Matrix d = Matrix::Zero(2, 4);
  d(0, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(HyperspectralImage(2, 2, d), InvalidInput);

  Matrix data(2, 6);
  for (Index n = 0; n < 6; ++n) data.col(n).setConstant(static_cast<double>(n));
  const HyperspectralImage img(3, 2, data);
  CHECK(img.pixels() == 6);
  CHECK(img.pixel(4)(1) == 4.0);
}

TEST_CASE("abundance matrix enforces the simplex") {
  Matrix a(3, 2);
  a << 0.2, 0.5, 0.3, 0.5, 0.5, 0.0;
  CHECK_NOTHROW(AbundanceMatrix{a});

  Matrix neg = a;
  neg(0, 0) = -0.1;
  neg(1, 0) = 0.6;
  CHECK_THROWS_AS(AbundanceMatrix{neg}, InvalidInput);

  Matrix off = a;
  off(0, 1) += 1e-9;
  CHECK_THROWS_AS(AbundanceMatrix{off}, InvalidInput);

  CHECK_THROWS_AS(AbundanceMatrix(Matrix::Ones(1, 3)), InvalidInput);
}

TEST_CASE("free parameterization round-trips") {
  Matrix free(2, 3);
  free << 0.1, 0.4, 0.25, 0.2, 0.5, 0.25;
  const AbundanceMatrix a = AbundanceMatrix::from_free(free);
  CHECK(a.endmembers() == 3);
  CHECK(a.values()(2, 0) == doctest::Approx(0.7));
  CHECK(a.values()(2, 1) == doctest::Approx(0.1));
  CHECK((a.free() - free).norm() == 0.0);

  Matrix outside(1, 1);
  outside << 1.2;
  CHECK_THROWS_AS(AbundanceMatrix::from_free(outside), InvalidInput);
}

TEST_CASE("chain divergence carries the iteration") {
  const ChainDivergence e("bad state", 17);
  CHECK(e.iteration() == 17);
  CHECK(std::string(e.what()).find("17") != std::string::npos);
}
