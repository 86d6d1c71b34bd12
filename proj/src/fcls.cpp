#include "hsiu/fcls.hpp"

#include <algorithm>
#include <vector>

namespace hsiu {

std::optional<Vector> nnls(const Matrix& a, const Vector& b, int max_iterations, double tolerance) {
  const Index n = a.cols();
  if (b.size() != a.rows()) throw DimensionMismatch("nnls: right-hand side length mismatch");

  Vector x = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Vector w = a.transpose() * b;
  // Dual feasibility is judged relative to the column scale of A.
  const double tol = tolerance * std::max(1.0, a.norm());

  auto passive_indices = [&] {
    std::vector<Index> idx;
    for (Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    return idx;
  };
  auto solve_passive = [&](const std::vector<Index>& idx) {
    Matrix sub(a.rows(), static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) sub.col(static_cast<Index>(i)) = a.col(idx[i]);
    Vector zs = sub.colPivHouseholderQr().solve(b);
    Vector z = Vector::Zero(n);
    for (std::size_t i = 0; i < idx.size(); ++i) z(idx[i]) = zs(static_cast<Index>(i));
    return z;
  };

  int iterations = 0;
  while (true) {
    Index best = -1;
    double best_w = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) return x;
    if (++iterations > max_iterations) return std::nullopt;
    passive[static_cast<std::size_t>(best)] = true;

    while (true) {
      const auto idx = passive_indices();
      Vector z = solve_passive(idx);
      bool feasible = true;
      for (Index j : idx) feasible = feasible && z(j) > 0.0;
      if (feasible) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Index j : idx) {
        if (z(j) <= 0.0) alpha = std::min(alpha, x(j) / (x(j) - z(j)));
      }
      x += alpha * (z - x);
      for (Index j : idx) {
        if (x(j) <= tolerance) {
          x(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
      if (++iterations > max_iterations) return std::nullopt;
    }
    w = a.transpose() * (b - a * x);
  }
}

std::optional<Vector> fcls_pixel(const Vector& y, const Matrix& endmembers,
                                 const FclsOptions& opts) {
  const Index bands = endmembers.rows();
  const Index count = endmembers.cols();
  if (y.size() != bands) throw DimensionMismatch("pixel length does not match endmember bands");
  if (!(opts.sum_weight > 0.0)) throw InvalidInput("FCLS sum weight must be positive");

  Matrix aug(bands + 1, count);
  aug.topRows(bands) = endmembers;
  aug.row(bands).setConstant(opts.sum_weight);
  Vector rhs(bands + 1);
  rhs.head(bands) = y;
  rhs(bands) = opts.sum_weight;

  const int cap = opts.max_iterations > 0 ? opts.max_iterations : 30 * static_cast<int>(count);
  auto x = nnls(aug, rhs, cap, opts.tolerance);
  if (!x) return std::nullopt;
  Vector a = x->cwiseMax(0.0);
  const double total = a.sum();
  if (!(total > 0.0)) return std::nullopt;
  return a / total;
}

FclsResult fcls(const Matrix& pixels, const EndmemberMatrix& endmembers, const FclsOptions& opts) {
  const Index count = endmembers.count();
  if (count < 2) throw InvalidInput("FCLS needs at least two endmembers");
  if (pixels.rows() != endmembers.bands()) {
    throw DimensionMismatch("image bands do not match endmember bands");
  }
  const Index n_pixels = pixels.cols();
  Matrix out(count, n_pixels);
  std::vector<char> failed(static_cast<std::size_t>(n_pixels), 0);

#pragma omp parallel for schedule(static) num_threads(std::max(1, opts.threads)) if (opts.threads > 0)
  for (Index n = 0; n < n_pixels; ++n) {
    auto a = fcls_pixel(pixels.col(n), endmembers.values(), opts);
    if (a) {
      out.col(n) = *a;
    } else {
      out.col(n).setConstant(1.0 / static_cast<double>(count));
      failed[static_cast<std::size_t>(n)] = 1;
    }
  }
  Index failures = 0;
  for (char f : failed) failures += f;
  return {AbundanceMatrix(std::move(out)), failures};
}

}  // namespace hsiu
