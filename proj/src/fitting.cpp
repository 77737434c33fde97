#include "catmc/fitting.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "catmc/divergence.hpp"
#include "catmc/error.hpp"
#include "catmc/matrix_io.hpp"

namespace catmc {

namespace {

// theta = (alpha_1..alpha_{K-1}, beta_1..beta_{K-1}).
MultinomialLogitFamily family_from(const Vector& theta, int K) {
  std::vector<double> alphas(static_cast<std::size_t>(K), 0.0), betas(static_cast<std::size_t>(K), 0.0);
  for (int k = 0; k + 1 < K; ++k) {
    alphas[static_cast<std::size_t>(k)] = theta[k];
    betas[static_cast<std::size_t>(k)] = theta[K - 1 + k];
  }
  return {std::move(alphas), std::move(betas)};
}

struct Evaluation {
  double value = 0.0;
  Vector grad;
  // Negative Hessian of the per-pair objective.
  Matrix info;
};

// Per-pair objective: (sum_n log f_{k_n}(x_n) - reg ||theta||^2) / n.
Evaluation evaluate(const TrainingPairs& data, const Vector& theta, double reg, bool with_info) {
  const int K = data.K;
  const int h = K - 1;
  const auto family = family_from(theta, K);
  const double n = static_cast<double>(data.pairs.size());
  std::vector<double> terms(data.pairs.size());
  Vector grad = Vector::Zero(theta.size());
  Matrix info = Matrix::Zero(with_info ? theta.size() : 0, with_info ? theta.size() : 0);
  for (std::size_t idx = 0; idx < data.pairs.size(); ++idx) {
    const auto& pr = data.pairs[idx];
    const Vector p = family.probs(pr.x);
    terms[idx] = family.log_prob(pr.k, pr.x);
    for (int k = 0; k < h; ++k) {
      const double resid = (pr.k == k ? 1.0 : 0.0) - p[k];
      grad[k] += resid;
      grad[h + k] += resid * pr.x;
    }
    if (!with_info) continue;
    // Covariance of the category indicators, times (1, x)(1, x)^T.
    for (int a = 0; a < h; ++a)
      for (int b = 0; b < h; ++b) {
        const double w = (a == b ? p[a] : 0.0) - p[a] * p[b];
        info(a, b) += w;
        info(a, h + b) += w * pr.x;
        info(h + a, b) += w * pr.x;
        info(h + a, h + b) += w * pr.x * pr.x;
      }
  }
  Evaluation ev;
  ev.value = (pairwise_sum(terms) - reg * theta.squaredNorm()) / n;
  ev.grad = (grad - 2.0 * reg * theta) / n;
  if (with_info) {
    info.diagonal().array() += 2.0 * reg;
    ev.info = info / n;
  }
  return ev;
}

}  // namespace

void TrainingPairs::validate() const {
  if (K < 2) throw InvalidInput("training pairs need K >= 2");
  std::set<int> categories;
  std::set<double> inputs;
  for (const auto& pr : pairs) {
    if (pr.k < 0 || pr.k >= K) throw InvalidInput("training pair category out of range");
    if (!std::isfinite(pr.x)) throw InvalidInput("training pair input must be finite");
    categories.insert(pr.k);
    inputs.insert(pr.x);
  }
  if (categories.size() < 2)
    throw DegenerateData("training pairs contain fewer than two distinct categories");
  if (inputs.size() < 2)
    throw DegenerateData("training pairs contain fewer than two distinct inputs");
}

FitResult fit_logit(const TrainingPairs& data, double reg, const FitConfig& cfg) {
  data.validate();
  if (!(reg >= 0.0) || !std::isfinite(reg)) throw InvalidInput("ridge weight must be >= 0");
  const int K = data.K;
  Vector theta = Vector::Zero(2 * (K - 1));
  Evaluation cur = evaluate(data, theta, reg, true);

  FitResult result;
  result.trace.push_back(cur.value);
  // On separated data the gradient fades while the parameters run off, so
  // convergence also asks for a short Newton step.
  auto stationary = [&](const Vector& dir, bool newton) {
    return cur.grad.norm() <= cfg.grad_tol && newton && dir.norm() <= 1e-6 * (1.0 + theta.norm());
  };
  bool newton = false;
  Vector dir;
  auto direction = [&]() {
    // Newton direction when the curvature is usable, plain gradient otherwise.
    dir = cur.grad;
    newton = false;
    const Eigen::LDLT<Matrix> ldlt(cur.info);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      const Vector step = ldlt.solve(cur.grad);
      if (step.allFinite() && step.dot(cur.grad) > 0.0) {
        dir = step;
        newton = true;
      }
    }
  };
  direction();
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    result.iters = iter;
    if (stationary(dir, newton)) {
      result.converged = true;
      break;
    }
    const double slope = dir.dot(cur.grad);
    double step = 1.0;
    bool accepted = false;
    while (step >= 1e-20) {
      const Vector candidate = theta + step * dir;
      const Evaluation next = evaluate(data, candidate, reg, false);
      if (std::isfinite(next.value) && next.value >= cur.value + cfg.armijo_c * step * slope) {
        theta = candidate;
        cur = evaluate(data, theta, reg, true);
        result.trace.push_back(cur.value);
        accepted = true;
        break;
      }
      step *= cfg.backtrack_factor;
    }
    if (theta.cwiseAbs().maxCoeff() > cfg.param_limit) {
      result.diverged = true;
      break;
    }
    direction();
    if (!accepted) {
      // No ascent left at machine precision; accept if nearly stationary.
      result.converged = cur.grad.norm() <= std::sqrt(cfg.grad_tol) && newton &&
                         dir.norm() <= std::sqrt(1e-6) * (1.0 + theta.norm());
      // A long Newton step with no representable gain: the optimum is at infinity.
      result.diverged = !result.converged && dir.norm() > 1e-3 * (1.0 + theta.norm());
      break;
    }
  }
  if (!result.converged && !result.diverged && stationary(dir, newton)) result.converged = true;
  result.family = family_from(theta, K);
  result.objective = cur.value;
  result.grad_norm = cur.grad.norm();
  return result;
}

double loglik_of_fit(const MultinomialLogitFamily& family, const TrainingPairs& data) {
  if (family.K() != data.K) throw InvalidInput("family and data disagree on K");
  if (data.pairs.empty()) throw InvalidInput("no training pairs");
  std::vector<double> terms(data.pairs.size());
  for (std::size_t n = 0; n < data.pairs.size(); ++n)
    terms[n] = family.log_prob(data.pairs[n].k, data.pairs[n].x);
  return pairwise_sum(terms) / static_cast<double>(data.pairs.size());
}

TrainingPairs read_training_pairs(std::istream& in, int K) {
  TrainingPairs data;
  data.K = K;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    double x = 0.0;
    long long k = 0;
    if (!(fields >> x >> k))
      throw InvalidInput("training pair line " + std::to_string(lineno) + " is malformed");
    if (k < 1 || k > K)
      throw InvalidInput("training pair line " + std::to_string(lineno) +
                         ": category must be in 1.." + std::to_string(K));
    data.pairs.push_back({x, static_cast<int>(k - 1)});
  }
  return data;
}

void write_training_pairs(std::ostream& out, const TrainingPairs& data) {
  for (const auto& pr : data.pairs) out << format_real(pr.x) << '\t' << pr.k + 1 << '\n';
}

}  // namespace catmc
