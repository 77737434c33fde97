#pragma once

#include <json.hpp>
#include <variant>
#include <vector>

#include "catmc/types.hpp"

namespace catmc {

// Multinomial logit link: f_k(x) proportional to exp(alpha_k + beta_k x).
//
// Parameters are stored with the last category as reference
// (alpha_K = beta_K = 0). The constructor subtracts the last entry from every
// intercept and slope, which leaves every f_k unchanged.
class MultinomialLogitFamily {
 public:
  MultinomialLogitFamily(std::vector<double> alphas, std::vector<double> betas);

  // K categories, all parameters zero: the uniform distribution at every x.
  static MultinomialLogitFamily uniform(int K);

  // Slopes evenly spaced over [-1, 1] and zero intercepts, before the
  // reference normalization. Produces K ordered, overlapping bumps.
  static MultinomialLogitFamily evenly_spaced(int K);

  int K() const { return static_cast<int>(alphas_.size()); }
  const std::vector<double>& alphas() const { return alphas_; }
  const std::vector<double>& betas() const { return betas_; }

  // True when all slopes coincide, i.e. f does not depend on x.
  bool is_constant() const;

  Vector probs(double x) const;
  Vector derivs(double x) const;

  // log f_k(x) evaluated without forming f_k first.
  double log_prob(int k, double x) const;
  // f_k'(x) / f_k(x) = beta_k - sum_j beta_j f_j(x).
  double score(int k, double x) const;

 private:
  std::vector<double> alphas_;
  std::vector<double> betas_;
};

// Link defined by a K x K table on the integer inputs 1..K:
// table(x - 1, k) = f_k(x). No derivatives, so it cannot be used for solving.
class TabularLinkFamily {
 public:
  explicit TabularLinkFamily(Matrix table);

  // The three-mood confusion table: a rating is reported one category lower
  // with probability 0.2, one higher with 0.2, and exactly with 0.6, with
  // the out-of-range mass folded back onto the end categories.
  static TabularLinkFamily mood(int K);

  int K() const { return static_cast<int>(table_.rows()); }
  const Matrix& table() const { return table_; }

  // x must be one of the integers 1..K.
  Vector probs(double x) const;

 private:
  Matrix table_;
};

using LinkFamily = std::variant<MultinomialLogitFamily, TabularLinkFamily>;

int category_count(const LinkFamily& family);

// (f_1(x), ..., f_K(x)). Throws InvalidInput for non-finite x.
Vector eval_probs(const LinkFamily& family, double x);

// (f_1'(x), ..., f_K'(x)). Throws Unsupported for a tabular family.
Vector eval_derivs(const LinkFamily& family, double x);

// Returns the logit alternative or throws Unsupported.
const MultinomialLogitFamily& require_logit(const LinkFamily& family);

struct SmoothnessReport {
  // sup over k and |x| <= alpha of |f_k'(x)| / f_k(x).
  double L_alpha = 0.0;
  // inf and sup over |x| <= alpha of max_k f_k'(x)^2 / f_k(x).
  double beta_minus = 0.0;
  double beta_plus = 0.0;
  double alpha = 0.0;
  int grid_size = 0;
};

// Relative change allowed between the constants at grid n and grid 2n.
inline constexpr double kSmoothnessRefinementTol = 1e-4;
inline constexpr int kMinSmoothnessGrid = 64;

// max_k f_k'(x)^2 / f_k(x).
double curvature_at(const MultinomialLogitFamily& family, double x);

// Grid search over grid_size evenly spaced points of [-alpha, alpha], both
// endpoints included. Throws DegenerateFamily when beta_minus < 1e-12.
SmoothnessReport smoothness_constants(const MultinomialLogitFamily& family, double alpha,
                                      int grid_size = 4096);

// JSON: {"kind": "logit", "K": .., "alphas": [..], "betas": [..]}
//    or {"kind": "tabular", "K": .., "table": [[..], ..]}
nlohmann::json to_json(const LinkFamily& family);
LinkFamily link_family_from_json(const nlohmann::json& doc);

}  // namespace catmc
