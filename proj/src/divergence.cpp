#include "catmc/divergence.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "catmc/error.hpp"

namespace catmc {

namespace {

void check_distribution(const Vector& p, const char* name) {
  if (p.size() < 1) throw InvalidInput(std::string(name) + " is empty");
  if (!p.allFinite() || p.minCoeff() < 0.0)
    throw InvalidInput(std::string(name) + " has negative or non-finite entries");
  if (std::abs(p.sum() - 1.0) > 1e-9)
    throw InvalidInput(std::string(name) + " does not sum to 1");
}

void check_pair(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw InvalidInput("distributions differ in length");
  check_distribution(p, "p");
  check_distribution(q, "q");
}

double pairwise_sum_range(const double* first, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += first[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_range(first, half) + pairwise_sum_range(first + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_range(values.data(), values.size());
}

double kl_categorical(const Vector& p, const Vector& q) {
  check_pair(p, q);
  double total = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] == 0.0) return std::numeric_limits<double>::infinity();
    total += p[k] * std::log(p[k] / q[k]);
  }
  // Rounding can leave a tiny negative value for p ~ q.
  return std::max(total, 0.0);
}

double hellinger_sq(const Vector& p, const Vector& q) {
  check_pair(p, q);
  return (p.array().sqrt() - q.array().sqrt()).square().sum();
}

DivergenceReport avg_matrix_divergence(const LinkFamily& family, const Matrix& P, const Matrix& Q,
                                       DivergenceKind kind, bool keep_per_entry) {
  if (P.rows() != Q.rows() || P.cols() != Q.cols())
    throw InvalidInput("matrix divergence: dimension mismatch");
  if (P.size() == 0) throw InvalidInput("matrix divergence: empty matrices");
  std::vector<double> terms(static_cast<std::size_t>(P.size()));
  Matrix per_entry(P.rows(), P.cols());
  // Row-major traversal fixes the summation order.
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      const Vector p = eval_probs(family, P(i, j));
      const Vector q = eval_probs(family, Q(i, j));
      const double d = kind == DivergenceKind::KL ? kl_categorical(p, q) : hellinger_sq(p, q);
      terms[static_cast<std::size_t>(i * P.cols() + j)] = d;
      per_entry(i, j) = d;
    }
  }
  DivergenceReport report;
  report.kind = kind;
  report.value = pairwise_sum(terms) / static_cast<double>(P.size());
  if (keep_per_entry) report.per_entry = std::move(per_entry);
  return report;
}

double kl_upper_bound(const Vector& p, const Vector& q) {
  check_pair(p, q);
  if (p.minCoeff() <= 0.0 || q.minCoeff() <= 0.0)
    throw InvalidInput("KL upper bound needs strictly positive distributions");
  const Eigen::Index K = p.size();
  const double pK = p[K - 1];
  const double qK = q[K - 1];
  // 1 - sum_{i<K} q_i is q_K for a normalized q.
  const double q_tail = 1.0 - q.head(K - 1).sum();
  double total = 0.0;
  for (Eigen::Index k = 0; k + 1 < K; ++k) {
    const double num = (p[k] - q[k]) * (p[k] - q[k]) + (p[k] * q[k] - p[k] * p[k]) * (1.0 - qK) +
                       (p[k] * q[k] - q[k] * q[k]) * (1.0 - pK);
    total += num / (q[k] * q_tail);
  }
  return total;
}

double hellinger_lb_gap(const MultinomialLogitFamily& family, const Matrix& M, const Matrix& Mhat,
                        double alpha, double beta_minus) {
  if (M.rows() != Mhat.rows() || M.cols() != Mhat.cols())
    throw InvalidInput("Hellinger gap: dimension mismatch");
  if (!(alpha > 0.0)) throw InvalidInput("Hellinger gap: alpha must be positive");
  if (M.cwiseAbs().maxCoeff() > alpha || Mhat.cwiseAbs().maxCoeff() > alpha)
    throw InvalidInput("Hellinger gap: entries must lie in [-alpha, alpha]");
  const double hellinger =
      avg_matrix_divergence(family, M, Mhat, DivergenceKind::HellingerSq).value;
  const double frob = (M - Mhat).squaredNorm() / static_cast<double>(M.size());
  return hellinger - beta_minus / 4.0 * frob;
}

}  // namespace catmc
