#include "catmc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "catmc/divergence.hpp"
#include "catmc/error.hpp"

namespace catmc {

Prediction predict_categories(const LinkFamily& family, const Matrix& X,
                              const std::vector<double>& labels, std::optional<double> alpha) {
  const int K = category_count(family);
  if (static_cast<int>(labels.size()) != K)
    throw InvalidInput("label count differs from the family's category count");
  if (alpha && !(*alpha > 0.0)) throw InvalidInput("alpha must be positive");
  const bool tabular = std::holds_alternative<TabularLinkFamily>(family);
  Prediction pred;
  pred.labels.resize(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double x = X(i, j);
      double adjusted = x;
      if (tabular) adjusted = std::clamp(std::round(x), 1.0, static_cast<double>(K));
      else if (alpha) adjusted = std::clamp(x, -*alpha, *alpha);
      if (adjusted != x) ++pred.clamped;
      const Vector p = eval_probs(family, adjusted);
      int best = 0;
      bool tie = false;
      for (int k = 1; k < K; ++k) {
        if (p[k] > p[best]) {
          best = k;
          tie = false;
        } else if (p[k] == p[best]) {
          tie = true;
        }
      }
      if (tie) ++pred.ties;
      pred.labels(i, j) = labels[static_cast<std::size_t>(best)];
    }
  }
  return pred;
}

RatingReport rating_report(const ObservationSet& test, const Matrix& predicted_labels) {
  if (test.entries.empty()) throw InvalidInput("empty test set");
  const std::size_t K = test.labels.size();
  RatingReport report;
  report.labels = test.labels;
  report.counts.assign(K, 0);
  std::vector<std::vector<double>> errors(K);
  std::vector<double> all;
  all.reserve(test.entries.size());
  for (const auto& o : test.entries) {
    if (o.i < 0 || o.i >= predicted_labels.rows() || o.j < 0 || o.j >= predicted_labels.cols())
      throw InvalidInput("test cell (" + std::to_string(o.i) + ", " + std::to_string(o.j) +
                         ") lies outside the prediction matrix");
    const double err = std::abs(test.label_of(o) - predicted_labels(o.i, o.j));
    errors[static_cast<std::size_t>(o.k)].push_back(err);
    all.push_back(err);
  }
  report.per_category.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    report.counts[k] = static_cast<long long>(errors[k].size());
    report.per_category[k] = errors[k].empty()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : pairwise_sum(errors[k]) / static_cast<double>(errors[k].size());
  }
  report.overall = pairwise_sum(all) / static_cast<double>(all.size());
  return report;
}

double squared_loss(const ObservationSet& obs, const Matrix& X) {
  if (X.rows() != obs.d1 || X.cols() != obs.d2) throw InvalidInput("dimension mismatch");
  std::vector<double> terms(obs.entries.size());
  for (std::size_t n = 0; n < obs.entries.size(); ++n) {
    const auto& o = obs.entries[n];
    const double r = X(o.i, o.j) - obs.label_of(o);
    terms[n] = r * r;
  }
  return pairwise_sum(terms);
}

Matrix squared_loss_grad(const ObservationSet& obs, const Matrix& X) {
  if (X.rows() != obs.d1 || X.cols() != obs.d2) throw InvalidInput("dimension mismatch");
  Matrix G = Matrix::Zero(X.rows(), X.cols());
  for (const auto& o : obs.entries) G(o.i, o.j) = 2.0 * (X(o.i, o.j) - obs.label_of(o));
  return G;
}

Estimate baseline_real_completion(const ObservationSet& obs, const ConstraintSpec& spec,
                                  const SolverConfig& cfg) {
  obs.validate();
  if (obs.entries.empty()) throw InvalidInput("no observations to fit");
  if (spec.d1 != obs.d1 || spec.d2 != obs.d2)
    throw InvalidInput("constraint spec dimensions disagree with the observations");
  const double extent = std::max(std::abs(obs.labels.front()), std::abs(obs.labels.back()));
  if (spec.alpha < extent) throw InvalidInput("alpha must cover the label range for the baseline");
  // Maximizing the negated loss keeps the ascent engine and its trace semantics.
  Objective objective{[&](const Matrix& X) { return -squared_loss(obs, X); },
                      [&](const Matrix& X) -> Matrix { return -squared_loss_grad(obs, X); }};
  return maximize_over_constraint_set(objective, spec, cfg);
}

Matrix round_to_labels(const Matrix& X, const std::vector<double>& labels) {
  if (labels.empty()) throw InvalidInput("no labels to round to");
  Matrix out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double x = X(i, j);
      double best = labels.front();
      for (double a : labels) {
        // Iterating in increasing order with <= sends exact midpoints up.
        if (std::abs(x - a) <= std::abs(x - best)) best = a;
      }
      out(i, j) = best;
    }
  }
  return out;
}

double mse_per_entry(const Matrix& M, const Matrix& Mhat) {
  if (M.rows() != Mhat.rows() || M.cols() != Mhat.cols()) throw InvalidInput("dimension mismatch");
  if (M.size() == 0) throw InvalidInput("empty matrices");
  return (M - Mhat).squaredNorm() / static_cast<double>(M.size());
}

BoundReport bound_report(const SmoothnessReport& smooth, const ConstraintSpec& spec, double m,
                         int K, const BoundConstants& constants) {
  spec.validate();
  if (!(m > 0.0)) throw InvalidInput("observation count m must be positive");
  if (K < 2) throw InvalidInput("K must be at least 2");
  if (!(smooth.beta_minus > 0.0) || !(smooth.beta_plus > 0.0) || !(smooth.L_alpha > 0.0))
    throw InvalidInput("smoothness constants must be positive");
  BoundReport b;
  b.K = K;
  b.L_alpha = smooth.L_alpha;
  b.beta_minus = smooth.beta_minus;
  b.beta_plus = smooth.beta_plus;
  b.alpha = spec.alpha;
  b.rank = spec.rank;
  b.d1 = spec.d1;
  b.d2 = spec.d2;
  b.m = m;
  b.constants = constants;

  const double d_sum = static_cast<double>(spec.d1) + spec.d2;
  const double d_max = std::max(spec.d1, spec.d2);
  const double log_cells = std::log(static_cast<double>(spec.d1) * spec.d2);
  const double lead = constants.C_prime * spec.alpha * K * smooth.L_alpha / smooth.beta_minus;
  const double rate = std::sqrt(spec.rank * d_sum / m);
  b.upper_full = lead * rate * std::sqrt(1.0 + d_sum * log_cells / m);
  b.upper_simple = std::sqrt(2.0) * lead * rate;
  b.lower_rate = constants.C2 * spec.alpha / std::sqrt(K * smooth.beta_plus) *
                 std::sqrt(spec.rank * d_max / m);
  b.lower = std::min(constants.C1, b.lower_rate);
  b.ratio = b.upper_simple / b.lower_rate;
  b.k_factor = std::pow(static_cast<double>(K), 1.5) * smooth.L_alpha *
               std::sqrt(smooth.beta_plus) / smooth.beta_minus;
  b.simple_form_valid = m >= d_sum * log_cells;
  return b;
}

nlohmann::json to_json(const RatingReport& report) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t k = 0; k < report.labels.size(); ++k) {
    nlohmann::json row = {{"label", report.labels[k]}, {"count", report.counts[k]}};
    if (std::isnan(report.per_category[k])) row["mean_abs_diff"] = nullptr;
    else row["mean_abs_diff"] = report.per_category[k];
    per.push_back(row);
  }
  return {{"per_category", per}, {"overall", report.overall}};
}

nlohmann::json to_json(const BoundReport& b) {
  return {{"upper_full", b.upper_full},
          {"upper_simple", b.upper_simple},
          {"lower", b.lower},
          {"lower_rate", b.lower_rate},
          {"ratio_upper_over_lower", b.ratio},
          {"k_factor", b.k_factor},
          {"simple_form_valid", b.simple_form_valid},
          {"inputs",
           {{"K", b.K},
            {"L_alpha", b.L_alpha},
            {"beta_minus", b.beta_minus},
            {"beta_plus", b.beta_plus},
            {"alpha", b.alpha},
            {"rank", b.rank},
            {"d1", b.d1},
            {"d2", b.d2},
            {"m", b.m},
            {"C_prime", b.constants.C_prime},
            {"C1", b.constants.C1},
            {"C2", b.constants.C2}}}};
}

std::string format_rating_table(const std::vector<std::pair<std::string, RatingReport>>& rows) {
  if (rows.empty()) return {};
  const auto& labels = rows.front().second.labels;
  std::size_t name_width = 15;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width)) << "Original Rating";
  for (double a : labels) {
    std::ostringstream head;
    head << a;
    out << " | " << std::right << std::setw(6) << head.str();
  }
  out << " || " << std::setw(7) << "Overall" << '\n';
  out << std::string(name_width + labels.size() * 9 + 11, '-') << '\n';
  out << std::fixed << std::setprecision(3);
  for (const auto& [name, report] : rows) {
    out << std::left << std::setw(static_cast<int>(name_width)) << name << std::right;
    for (double v : report.per_category) {
      out << " | ";
      if (std::isnan(v)) out << std::setw(6) << "-";
      else out << std::setw(6) << v;
    }
    out << " || " << std::setw(7) << report.overall << '\n';
  }
  out << std::left << std::setw(static_cast<int>(name_width)) << "Test count" << std::right;
  long long total = 0;
  for (long long c : rows.front().second.counts) {
    out << " | " << std::setw(6) << c;
    total += c;
  }
  out << " || " << std::setw(7) << total << '\n';
  return out.str();
}

std::string format_bound_table(const BoundReport& b) {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "K = " << b.K << ", alpha = " << b.alpha << ", r = " << b.rank << ", d1 = " << b.d1
      << ", d2 = " << b.d2 << ", m = " << b.m << '\n';
  out << "L_alpha = " << b.L_alpha << ", beta- = " << b.beta_minus << ", beta+ = " << b.beta_plus
      << '\n';
  out << "upper (full)    " << b.upper_full << '\n';
  out << "upper (simple)  " << b.upper_simple << (b.simple_form_valid ? "" : "  [m below (d1+d2) log(d1 d2)]")
      << '\n';
  out << "lower           " << b.lower << "  (rate " << b.lower_rate << ")\n";
  out << "upper / lower   " << b.ratio << "  (K^1.5 L sqrt(beta+) / beta- = " << b.k_factor << ")\n";
  return out.str();
}

}  // namespace catmc
