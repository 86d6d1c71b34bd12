// Unmixing and detection metrics.
//
// Per-class breakdowns are keyed on a label field (normally the true one).
// Classes without pixels are reported as absent, never as zero.
#pragma once

#include "hsiu/core.hpp"
#include "hsiu/covariance.hpp"
#include "hsiu/mrf.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hsiu {

using ClassMetrics = std::vector<std::optional<double>>;

/// sqrt(1/(N_k R) sum_{n in I_k} ||ahat_n - a_n||^2) per class.
ClassMetrics rnmse_per_class(const Matrix& a_hat, const Matrix& a_true, const LabelField& z);

/// sqrt(1/(N_k L) sum_{n in I_k} ||yhat_n - y_n||^2) per class.
ClassMetrics re_per_class(const Matrix& y_hat, const Matrix& y, const LabelField& z);

/// M A.
Matrix reconstruct_linear(const EndmemberMatrix& m, const AbundanceMatrix& a);

/// M a_n + s_k^2 K_M Sigma_k^{-1} (y_n - M a_n) with k = z_n, i.e. the
/// linear part plus the conditional mean of the marginalized nonlinearity.
/// `scales` holds s_1^2..s_{K-1}^2.
Matrix reconstruct_rca(const Matrix& y, const EndmemberMatrix& m, const AbundanceMatrix& a,
                       const LabelField& z, const Vector& scales, const Vector& noise_variances);

struct Confusion {
  Eigen::MatrixXi counts;  // rows: true class, columns: estimated class
  double accuracy = 0.0;
};

/// Relabels the nonlinear classes of z_hat by ascending s2_hat (class 0 is
/// fixed), then counts. Throws InvalidInput for out-of-range labels.
Confusion confusion_and_accuracy(const LabelField& z_hat, const LabelField& z_true,
                                 const Vector& s2_hat);

/// |s2_true - s2_hat| / s2_true after sorting s2_hat ascending. NaN truth
/// entries (classes not generated by RCA) give NaN. Throws InvalidInput for
/// a zero true value or a length mismatch.
Vector hyperparam_errors(const Vector& s2_hat, const Vector& s2_true);

/// mean_l |sigma2_hat_l - sigma2_l| / sigma2_l.
double noise_relative_error(const Vector& sigma2_hat, const Vector& sigma2_true);

struct MethodReport {
  std::string name;
  ClassMetrics rnmse;              // keyed on true labels
  ClassMetrics re;
  ClassMetrics rnmse_by_estimate;  // keyed on estimated labels (empty for FCLS)
  ClassMetrics re_by_estimate;
  std::optional<Confusion> confusion;
  std::optional<Vector> scale_errors;
  std::optional<double> noise_error;
  std::optional<Vector> scales;
};

struct EvalReport {
  Index width = 0;
  Index height = 0;
  Index bands = 0;
  Index endmembers = 0;
  int classes = 0;
  std::vector<Index> class_counts;  // true class histogram
  std::vector<MethodReport> methods;
  nlohmann::json metadata;
};

nlohmann::json to_json(const EvalReport& report);
std::string to_markdown(const EvalReport& report);

}  // namespace hsiu
