#pragma once

#include <iosfwd>
#include <vector>

#include "catmc/links.hpp"

namespace catmc {

struct TrainingPair {
  double x = 0.0;
  int k = 0;  // 0-based category index
};

struct TrainingPairs {
  int K = 0;
  std::vector<TrainingPair> pairs;

  // Throws DegenerateData when fewer than two categories or two distinct
  // inputs are present, InvalidInput on a bad category index.
  void validate() const;
};

struct FitConfig {
  int max_iters = 5000;
  // Converged once the gradient of the per-pair objective is this small.
  double grad_tol = 1e-9;
  double backtrack_factor = 0.5;
  double armijo_c = 1e-4;
  // Any |parameter| beyond this is reported as divergence (separated data).
  // A stalled line search with a long Newton step is reported the same way.
  double param_limit = 1e3;
};

struct FitResult {
  MultinomialLogitFamily family = MultinomialLogitFamily::uniform(2);
  bool converged = false;
  bool diverged = false;
  int iters = 0;
  // Per-pair objective (mean log-likelihood minus ridge / n) and its gradient norm.
  double objective = 0.0;
  double grad_norm = 0.0;
  std::vector<double> trace;
};

// Ridge-penalized maximum likelihood over (alpha_k, beta_k), k < K, with the
// last category fixed at zero:
//   maximize sum_n log f_{k_n}(x_n) - reg * sum_{k<K} (alpha_k^2 + beta_k^2)
// by damped Newton ascent (gradient steps where the curvature is unusable)
// with Armijo backtracking.
// A run that exhausts max_iters or diverges returns converged = false and the
// caller decides whether to warn; separated data at reg = 0 diverges.
FitResult fit_logit(const TrainingPairs& data, double reg = 1e-6, const FitConfig& cfg = {});

// Mean per-pair log-likelihood.
double loglik_of_fit(const MultinomialLogitFamily& family, const TrainingPairs& data);

// "x<TAB>k" lines, k 1-based.
TrainingPairs read_training_pairs(std::istream& in, int K);
void write_training_pairs(std::ostream& out, const TrainingPairs& data);

}  // namespace catmc
