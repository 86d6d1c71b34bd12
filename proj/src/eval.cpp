#include "hsiu/eval.hpp"

#include "hsiu/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hsiu {

namespace {

ClassMetrics per_class_rms(const Matrix& est, const Matrix& truth, const LabelField& z,
                           const char* what) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) {
    throw DimensionMismatch(std::string(what) + ": estimate and truth shapes differ");
  }
  if (est.cols() != z.size()) {
    throw DimensionMismatch(std::string(what) + ": label field does not match the pixel count");
  }
  const auto k_count = static_cast<std::size_t>(z.classes());
  std::vector<double> sq(k_count, 0.0);
  std::vector<Index> count(k_count, 0);
  for (Index n = 0; n < z.size(); ++n) {
    const auto k = static_cast<std::size_t>(z[n]);
    sq[k] += (est.col(n) - truth.col(n)).squaredNorm();
    ++count[k];
  }
  ClassMetrics out(k_count);
  bool any = false;
  for (std::size_t k = 0; k < k_count; ++k) {
    if (count[k] == 0) continue;
    any = true;
    out[k] = std::sqrt(sq[k] / (static_cast<double>(count[k]) * static_cast<double>(est.rows())));
  }
  if (!any) throw InvalidInput(std::string(what) + ": every class is empty");
  return out;
}

nlohmann::json metrics_json(const ClassMetrics& m) {
  auto out = nlohmann::json::array();
  for (const auto& v : m) {
    if (v) out.push_back(*v);
    else out.push_back(nullptr);
  }
  return out;
}

nlohmann::json vector_json(const Vector& v) {
  auto out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) out.push_back(v(i));
    else out.push_back(nullptr);
  }
  return out;
}

std::string cell(const std::optional<double>& v, double unit) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v / unit);
  return buf;
}

}  // namespace

ClassMetrics rnmse_per_class(const Matrix& a_hat, const Matrix& a_true, const LabelField& z) {
  return per_class_rms(a_hat, a_true, z, "rnmse");
}

ClassMetrics re_per_class(const Matrix& y_hat, const Matrix& y, const LabelField& z) {
  return per_class_rms(y_hat, y, z, "re");
}

Matrix reconstruct_linear(const EndmemberMatrix& m, const AbundanceMatrix& a) {
  if (m.count() != a.endmembers()) {
    throw DimensionMismatch("endmember and abundance counts differ");
  }
  return m.values() * a.values();
}

Matrix reconstruct_rca(const Matrix& y, const EndmemberMatrix& m, const AbundanceMatrix& a,
                       const LabelField& z, const Vector& scales, const Vector& noise_variances) {
  Matrix out = reconstruct_linear(m, a);
  if (y.rows() != out.rows() || y.cols() != out.cols() || z.size() != y.cols()) {
    throw DimensionMismatch("reconstruction inputs disagree in shape");
  }
  if (scales.size() != z.classes() - 1) {
    throw DimensionMismatch("one scale per nonlinear class is required");
  }
  const KernelMatrix kernel = build_polynomial_kernel(m);
  std::vector<ClassCovariance> covs;
  for (Index k = 0; k < scales.size(); ++k) covs.emplace_back(kernel, scales(k), noise_variances);
  for (Index n = 0; n < y.cols(); ++n) {
    if (z[n] == 0) continue;
    const Vector r = y.col(n) - out.col(n);
    out.col(n) += covs[static_cast<std::size_t>(z[n] - 1)].nonlinearity_mean(r);
  }
  return out;
}

Confusion confusion_and_accuracy(const LabelField& z_hat, const LabelField& z_true,
                                 const Vector& s2_hat) {
  if (z_hat.size() != z_true.size()) throw DimensionMismatch("label fields differ in size");
  if (z_hat.classes() != z_true.classes()) throw DimensionMismatch("class counts differ");
  if (s2_hat.size() != z_hat.classes() - 1) {
    throw DimensionMismatch("one scale per nonlinear class is required");
  }
  const int k_count = z_true.classes();
  const auto perm = scale_ordering(s2_hat);
  Confusion c;
  c.counts = Eigen::MatrixXi::Zero(k_count, k_count);
  for (Index n = 0; n < z_true.size(); ++n) {
    const int t = z_true[n];
    const int e = z_hat[n];
    if (t < 0 || t >= k_count || e < 0 || e >= k_count) throw InvalidInput("label out of range");
    ++c.counts(t, perm[static_cast<std::size_t>(e)]);
  }
  c.accuracy = static_cast<double>(c.counts.trace()) / static_cast<double>(z_true.size());
  return c;
}

Vector hyperparam_errors(const Vector& s2_hat, const Vector& s2_true) {
  if (s2_hat.size() != s2_true.size()) throw DimensionMismatch("scale vectors differ in length");
  std::vector<double> sorted(s2_hat.data(), s2_hat.data() + s2_hat.size());
  std::sort(sorted.begin(), sorted.end());
  Vector out(s2_true.size());
  for (Index k = 0; k < s2_true.size(); ++k) {
    const double t = s2_true(k);
    if (std::isnan(t)) {
      out(k) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    if (t == 0.0) throw InvalidInput("true scale is zero; relative error undefined");
    out(k) = std::abs(t - sorted[static_cast<std::size_t>(k)]) / t;
  }
  return out;
}

double noise_relative_error(const Vector& sigma2_hat, const Vector& sigma2_true) {
  if (sigma2_hat.size() != sigma2_true.size() || sigma2_true.size() == 0) {
    throw DimensionMismatch("noise variance vectors differ in length");
  }
  if ((sigma2_true.array() <= 0.0).any()) throw InvalidInput("true noise variances must be positive");
  return ((sigma2_hat - sigma2_true).array().abs() / sigma2_true.array()).mean();
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json j;
  j["width"] = report.width;
  j["height"] = report.height;
  j["bands"] = report.bands;
  j["endmembers"] = report.endmembers;
  j["classes"] = report.classes;
  j["class_counts"] = report.class_counts;
  j["metadata"] = report.metadata;
  auto methods = nlohmann::json::array();
  for (const auto& m : report.methods) {
    nlohmann::json e;
    e["name"] = m.name;
    e["rnmse"] = metrics_json(m.rnmse);
    e["re"] = metrics_json(m.re);
    if (!m.rnmse_by_estimate.empty()) {
      e["rnmse_by_estimated_label"] = metrics_json(m.rnmse_by_estimate);
      e["re_by_estimated_label"] = metrics_json(m.re_by_estimate);
    }
    if (m.confusion) {
      auto rows = nlohmann::json::array();
      for (Index i = 0; i < m.confusion->counts.rows(); ++i) {
        std::vector<int> row(static_cast<std::size_t>(m.confusion->counts.cols()));
        for (Index k = 0; k < m.confusion->counts.cols(); ++k) {
          row[static_cast<std::size_t>(k)] = m.confusion->counts(i, k);
        }
        rows.push_back(row);
      }
      e["confusion"] = rows;
      e["accuracy"] = m.confusion->accuracy;
    }
    if (m.scales) e["s2"] = vector_json(*m.scales);
    if (m.scale_errors) e["s2_relative_error"] = vector_json(*m.scale_errors);
    if (m.noise_error) e["sigma2_mean_relative_error"] = *m.noise_error;
    methods.push_back(e);
  }
  j["methods"] = methods;
  return j;
}

std::string to_markdown(const EvalReport& report) {
  std::ostringstream os;
  os << "# Evaluation report\n\n";
  os << "Image " << report.width << " x " << report.height << ", " << report.bands << " bands, "
     << report.endmembers << " endmembers, " << report.classes << " classes.\n\n";

  auto table = [&](const char* title, auto pick) {
    os << "## " << title << " (x 1e-2)\n\n| method |";
    for (int k = 0; k < report.classes; ++k) os << " class " << k << " |";
    os << "\n|---|";
    for (int k = 0; k < report.classes; ++k) os << "---|";
    os << "\n";
    for (const auto& m : report.methods) {
      os << "| " << m.name << " |";
      const ClassMetrics& v = pick(m);
      for (const auto& x : v) os << " " << cell(x, 1e-2) << " |";
      os << "\n";
    }
    os << "\n";
  };
  table("RNMSE", [](const MethodReport& m) -> const ClassMetrics& { return m.rnmse; });
  table("RE", [](const MethodReport& m) -> const ClassMetrics& { return m.re; });

  for (const auto& m : report.methods) {
    if (m.confusion) {
      os << "## Confusion matrix: " << m.name << "\n\n| true \\ estimated |";
      for (int k = 0; k < report.classes; ++k) os << " " << k << " |";
      os << "\n|---|";
      for (int k = 0; k < report.classes; ++k) os << "---|";
      os << "\n";
      for (Index i = 0; i < m.confusion->counts.rows(); ++i) {
        os << "| " << i << " |";
        for (Index k = 0; k < m.confusion->counts.cols(); ++k) os << " " << m.confusion->counts(i, k) << " |";
        os << "\n";
      }
      os << "\nAccuracy: " << m.confusion->accuracy << "\n\n";
    }
    if (m.scales && m.scale_errors) {
      os << "## Nonlinearity scales: " << m.name << "\n\n| class | estimate | relative error |\n|---|---|---|\n";
      for (Index k = 0; k < m.scales->size(); ++k) {
        os << "| " << k + 1 << " | " << (*m.scales)(k) << " | ";
        const double e = (*m.scale_errors)(k);
        if (std::isnan(e)) os << "-";
        else os << e;
        os << " |\n";
      }
      os << "\n";
    }
    if (m.noise_error) {
      os << "Noise variance mean relative error (" << m.name << "): " << *m.noise_error << "\n\n";
    }
  }
  return os.str();
}

}  // namespace hsiu
