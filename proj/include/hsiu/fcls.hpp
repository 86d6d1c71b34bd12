// Fully constrained least squares (linear mixing baseline).
//
// Each pixel solves  min ||y - M a||^2  s.t.  a >= 0, sum(a) = 1  by
// appending a heavily weighted row of ones to M and a matching entry to y,
// then running Lawson-Hanson active-set NNLS on the augmented system.
#pragma once

#include "hsiu/core.hpp"

#include <optional>

namespace hsiu {

struct FclsOptions {
  double sum_weight = 1e5;    // weight of the appended sum-to-one row
  int max_iterations = 0;     // active-set iterations; 0 means 30 * R
  double tolerance = 1e-10;   // relative dual-feasibility tolerance
  int threads = 0;            // 0 = serial
};

struct FclsResult {
  AbundanceMatrix abundances;
  Index failed_pixels = 0;    // pixels that hit the iteration cap (set to the barycenter)
};

/// Lawson-Hanson NNLS: min ||A x - b|| s.t. x >= 0. Returns nullopt if the
/// iteration cap is reached before the KKT conditions hold.
std::optional<Vector> nnls(const Matrix& a, const Vector& b, int max_iterations,
                           double tolerance = 1e-10);

/// Single-pixel FCLS; nullopt on non-convergence. The output is clamped to
/// the closed simplex and renormalized.
std::optional<Vector> fcls_pixel(const Vector& y, const Matrix& endmembers,
                                 const FclsOptions& opts = {});

FclsResult fcls(const Matrix& pixels, const EndmemberMatrix& endmembers,
                const FclsOptions& opts = {});

}  // namespace hsiu
