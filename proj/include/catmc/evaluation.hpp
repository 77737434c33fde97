#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "catmc/links.hpp"
#include "catmc/sampling.hpp"
#include "catmc/solver.hpp"
#include "catmc/types.hpp"

namespace catmc {

struct Prediction {
  Matrix labels;
  // Entries where two or more categories shared the maximal probability.
  long long ties = 0;
  // Entries moved into the family's domain before evaluation.
  long long clamped = 0;
};

// Label a_{k*} with k* = argmax_k f_k(X_ij), lowest k on ties. With alpha set,
// logit inputs are clamped to [-alpha, alpha]; tabular inputs are always
// rounded to the nearest integer in 1..K. Both adjustments are counted.
Prediction predict_categories(const LinkFamily& family, const Matrix& X,
                              const std::vector<double>& labels,
                              std::optional<double> alpha = std::nullopt);

struct RatingReport {
  std::vector<double> labels;
  // Mean |true - predicted| per true category; NaN where no test cell has it.
  std::vector<double> per_category;
  std::vector<long long> counts;
  double overall = 0.0;
};

// Mean absolute label error on the test cells, split by true category.
RatingReport rating_report(const ObservationSet& test, const Matrix& predicted_labels);

// sum over observed cells of (X_ij - label_ij)^2 and its gradient.
double squared_loss(const ObservationSet& obs, const Matrix& X);
Matrix squared_loss_grad(const ObservationSet& obs, const Matrix& X);

// Least-squares completion over the same constraint set, labels taken as
// real values. spec.alpha must cover every label.
Estimate baseline_real_completion(const ObservationSet& obs, const ConstraintSpec& spec,
                                  const SolverConfig& cfg = {});

// Nearest label, ties to the larger one, clamped to [a_1, a_K].
Matrix round_to_labels(const Matrix& X, const std::vector<double>& labels);

// ||M - Mhat||_F^2 / (d1 d2).
double mse_per_entry(const Matrix& M, const Matrix& Mhat);

struct BoundConstants {
  double C_prime = 1.0;
  double C1 = 1.0;
  double C2 = 1.0;
};

struct BoundReport {
  // C' alpha K L / beta- * sqrt(r (d1 + d2) / m) * sqrt(1 + (d1 + d2) log(d1 d2) / m)
  double upper_full = 0.0;
  // sqrt(2) C' alpha K L / beta- * sqrt(r (d1 + d2) / m)
  double upper_simple = 0.0;
  // C2 alpha / sqrt(K beta+) * sqrt(r max(d1, d2) / m)
  double lower_rate = 0.0;
  // min(C1, lower_rate)
  double lower = 0.0;
  // upper_simple / lower_rate
  double ratio = 0.0;
  // K^{3/2} L sqrt(beta+) / beta-
  double k_factor = 0.0;
  // m >= (d1 + d2) log(d1 d2), where upper_full <= upper_simple.
  bool simple_form_valid = false;

  int K = 0;
  double L_alpha = 0.0;
  double beta_minus = 0.0;
  double beta_plus = 0.0;
  double alpha = 0.0;
  int rank = 0;
  int d1 = 0;
  int d2 = 0;
  double m = 0.0;
  BoundConstants constants;
};

BoundReport bound_report(const SmoothnessReport& smooth, const ConstraintSpec& spec, double m,
                         int K, const BoundConstants& constants = {});

nlohmann::json to_json(const RatingReport& report);
nlohmann::json to_json(const BoundReport& report);

// Plain-text table with one column per category and an Overall column.
std::string format_rating_table(const std::vector<std::pair<std::string, RatingReport>>& rows);
std::string format_bound_table(const BoundReport& report);

}  // namespace catmc
