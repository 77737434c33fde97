#pragma once

#include <optional>
#include <span>

#include "catmc/links.hpp"
#include "catmc/types.hpp"

namespace catmc {

enum class DivergenceKind { KL, HellingerSq };

struct DivergenceReport {
  DivergenceKind kind = DivergenceKind::KL;
  // Average over all d1 * d2 entries; +infinity when some KL term is infinite.
  double value = 0.0;
  std::optional<Matrix> per_entry;
};

// Sum with pairwise (tree) reduction; the result does not depend on how the
// input was produced, only on its order.
double pairwise_sum(std::span<const double> values);

// sum_k p_k log(p_k / q_k), natural log, with 0 log(0 / q) = 0. Returns
// +infinity when some p_k > 0 meets q_k = 0.
double kl_categorical(const Vector& p, const Vector& q);

inline bool is_infinite_divergence(double value) { return value == std::numeric_limits<double>::infinity(); }

// sum_k (sqrt(p_k) - sqrt(q_k))^2, in [0, 2].
double hellinger_sq(const Vector& p, const Vector& q);

// Entrywise divergence between the categorical laws f(P_ij) and f(Q_ij),
// averaged over the matrix.
DivergenceReport avg_matrix_divergence(const LinkFamily& family, const Matrix& P, const Matrix& Q,
                                       DivergenceKind kind, bool keep_per_entry = false);

// Quadratic-ratio upper bound on KL(p || q) for strictly positive p, q:
//   sum_{k<K} [(p_k - q_k)^2 + (p_k q_k - p_k^2)(1 - q_K) + (p_k q_k - q_k^2)(1 - p_K)]
//             / [q_k (1 - sum_{i<K} q_i)]
double kl_upper_bound(const Vector& p, const Vector& q);

// avg Hellinger^2(f(M), f(Mhat)) - (beta_minus / 4) ||M - Mhat||_F^2 / (d1 d2).
// Non-negative whenever beta_minus is a valid curvature floor on [-alpha, alpha].
double hellinger_lb_gap(const MultinomialLogitFamily& family, const Matrix& M, const Matrix& Mhat,
                        double alpha, double beta_minus);

}  // namespace catmc
