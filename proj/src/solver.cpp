#include "catmc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "catmc/divergence.hpp"
#include "catmc/error.hpp"
#include "catmc/svd.hpp"

namespace catmc {

namespace {

void check_dims(const ObservationSet& obs, const Matrix& X) {
  if (X.rows() != obs.d1 || X.cols() != obs.d2)
    throw InvalidInput("matrix is " + std::to_string(X.rows()) + " x " + std::to_string(X.cols()) +
                       " but the observations are " + std::to_string(obs.d1) + " x " +
                       std::to_string(obs.d2));
}

void check_family(const MultinomialLogitFamily& family, const ObservationSet& obs) {
  if (family.K() != obs.K)
    throw InvalidInput("family has " + std::to_string(family.K()) +
                       " categories but the observations have " + std::to_string(obs.K));
}

double box_residual_of(const Matrix& X, double alpha) {
  return X.size() == 0 ? 0.0 : std::max(0.0, X.cwiseAbs().maxCoeff() - alpha);
}

double nuclear_norm_checked(const Matrix& X) {
  if (X.size() == 0) return 0.0;
  return singular_values(X).sum();
}

}  // namespace

void SolverConfig::validate() const {
  if (max_iters < 1) throw InvalidInput("max_iters must be positive");
  if (!(grad_tol > 0.0)) throw InvalidInput("grad_tol must be positive");
  if (!(step_init > 0.0)) throw InvalidInput("step_init must be positive");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
    throw InvalidInput("backtrack_factor must lie in (0, 1)");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw InvalidInput("armijo_c must lie in (0, 1)");
  if (dykstra_max < 1) throw InvalidInput("dykstra_max must be positive");
  if (!(dykstra_tol > 0.0)) throw InvalidInput("dykstra_tol must be positive");
  if (!(prob_floor > 0.0 && prob_floor < 1.0)) throw InvalidInput("prob_floor must lie in (0, 1)");
}

SolverConfig solver_config_from_json(const nlohmann::json& doc) {
  SolverConfig cfg;
  if (!doc.is_object()) throw InvalidInput("solver config must be a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "max_iters") cfg.max_iters = value.get<int>();
      else if (key == "grad_tol") cfg.grad_tol = value.get<double>();
      else if (key == "step_init") cfg.step_init = value.get<double>();
      else if (key == "backtrack_factor") cfg.backtrack_factor = value.get<double>();
      else if (key == "armijo_c") cfg.armijo_c = value.get<double>();
      else if (key == "dykstra_max") cfg.dykstra_max = value.get<int>();
      else if (key == "dykstra_tol") cfg.dykstra_tol = value.get<double>();
      else if (key == "prob_floor") cfg.prob_floor = value.get<double>();
      else throw InvalidInput("unknown solver config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed solver config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json to_json(const SolverConfig& cfg) {
  return {{"max_iters", cfg.max_iters},         {"grad_tol", cfg.grad_tol},
          {"step_init", cfg.step_init},         {"backtrack_factor", cfg.backtrack_factor},
          {"armijo_c", cfg.armijo_c},           {"dykstra_max", cfg.dykstra_max},
          {"dykstra_tol", cfg.dykstra_tol},     {"prob_floor", cfg.prob_floor}};
}

double log_likelihood(const MultinomialLogitFamily& family, const ObservationSet& obs,
                      const Matrix& X, double prob_floor) {
  check_dims(obs, X);
  check_family(family, obs);
  const double log_floor = std::log(prob_floor);
  std::vector<double> terms(obs.entries.size());
  for (std::size_t n = 0; n < obs.entries.size(); ++n) {
    const auto& o = obs.entries[n];
    terms[n] = std::max(family.log_prob(o.k, X(o.i, o.j)), log_floor);
  }
  return pairwise_sum(terms);
}

Matrix log_likelihood_grad(const MultinomialLogitFamily& family, const ObservationSet& obs,
                           const Matrix& X, double prob_floor) {
  check_dims(obs, X);
  check_family(family, obs);
  const double log_floor = std::log(prob_floor);
  Matrix G = Matrix::Zero(X.rows(), X.cols());
  for (const auto& o : obs.entries) {
    const double x = X(o.i, o.j);
    if (family.log_prob(o.k, x) < log_floor) continue;
    G(o.i, o.j) = family.score(o.k, x);
  }
  return G;
}

Matrix project_box(const Matrix& X, double alpha) {
  if (!(alpha > 0.0)) throw InvalidInput("box half-width must be positive");
  return X.cwiseMax(-alpha).cwiseMin(alpha);
}

Vector project_capped_simplex(const Vector& v, double radius) {
  if (!(radius > 0.0)) throw InvalidInput("l1 radius must be positive");
  Vector w = v.cwiseMax(0.0);
  if (w.sum() <= radius) return w;
  // Sort-based threshold search for sum max(w - theta, 0) = radius.
  std::vector<double> u(w.data(), w.data() + w.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) theta = candidate;
  }
  return (w.array() - theta).cwiseMax(0.0);
}

namespace {

Matrix shrink_to_ball(const ThinSvd& svd, double radius) {
  const Vector shrunk = project_capped_simplex(svd.s, radius);
  return svd.U * shrunk.asDiagonal() * svd.V.transpose();
}

}  // namespace

Matrix project_nuclear_ball(const Matrix& X, double radius) {
  if (!(radius > 0.0)) throw InvalidInput("nuclear-norm radius must be positive");
  if (X.size() == 0) return X;
  const ThinSvd svd = thin_svd(X);
  if (svd.s.sum() <= radius) return X;
  return shrink_to_ball(svd, radius);
}

ProjectionResult project_constraint_set(const Matrix& X, const ConstraintSpec& spec,
                                        const SolverConfig& cfg, DykstraWarmStart* warm) {
  spec.validate();
  if (X.rows() != spec.d1 || X.cols() != spec.d2)
    throw InvalidInput("matrix dimensions disagree with the constraint spec");
  const double radius = spec.nuclear_radius();
  ProjectionResult result;

  const Matrix boxed = project_box(X, spec.alpha);
  if (boxed == X) {
    // X is in the box: one SVD settles both the membership test and the
    // ball projection.
    const ThinSvd svd = thin_svd(X);
    if (svd.s.sum() <= radius) {
      result.X = X;
      return result;
    }
    Matrix balled = shrink_to_ball(svd, radius);
    if (balled.cwiseAbs().maxCoeff() <= spec.alpha) {
      // The shrunk spectrum sums to the radius, so the residual is rounding only.
      result.X = std::move(balled);
      return result;
    }
  } else {
    if (nuclear_norm_checked(boxed) <= radius) {
      result.X = boxed;
      return result;
    }
    Matrix balled = project_nuclear_ball(X, radius);
    if (balled.cwiseAbs().maxCoeff() <= spec.alpha) {
      // The shrunk spectrum sums to the radius, so the residual is rounding only.
      result.X = std::move(balled);
      return result;
    }
  }

  // Dykstra: alternate ball and box steps carrying one correction per set.
  // The iterates keep x + p + q = X.
  Matrix p = Matrix::Zero(X.rows(), X.cols());
  Matrix q = Matrix::Zero(X.rows(), X.cols());
  if (warm && warm->ball_correction.rows() == X.rows() && warm->ball_correction.cols() == X.cols() &&
      warm->box_correction.rows() == X.rows() && warm->box_correction.cols() == X.cols()) {
    p = warm->ball_correction;
    q = warm->box_correction;
  }
  Matrix x = X - p - q;
  result.converged = false;
  for (int sweep = 1; sweep <= cfg.dykstra_max; ++sweep) {
    const Matrix y = project_nuclear_ball(x + p, radius);
    p += x - y;
    Matrix next = project_box(y + q, spec.alpha);
    q += y - next;
    const double change = (next - x).norm();
    x = std::move(next);
    result.sweeps = sweep;
    if (change < cfg.dykstra_tol) {
      result.converged = true;
      break;
    }
  }
  if (warm) {
    warm->ball_correction = p;
    warm->box_correction = q;
  }
  // The box step is exact; pull any leftover nuclear excess in by scaling,
  // which stays inside the box.
  double nuclear = nuclear_norm_checked(x);
  if (nuclear > radius) {
    x *= radius / nuclear;
    nuclear = nuclear_norm_checked(x);
  }
  result.X = std::move(x);
  result.nuclear_residual = std::max(0.0, nuclear - radius);
  result.box_residual = box_residual_of(result.X, spec.alpha);
  return result;
}

Estimate maximize_over_constraint_set(const Objective& objective, const ConstraintSpec& spec,
                                      const SolverConfig& cfg, const Matrix& X0) {
  spec.validate();
  cfg.validate();
  Estimate est;
  Matrix X = X0.size() == 0 ? Matrix::Zero(spec.d1, spec.d2) : X0;
  if (X.rows() != spec.d1 || X.cols() != spec.d2)
    throw InvalidInput("starting point dimensions disagree with the constraint spec");
  DykstraWarmStart warm;
  if (X0.size() != 0) {
    auto start = project_constraint_set(X, spec, cfg, &warm);
    est.projection_warning |= !start.converged;
    X = std::move(start.X);
  }
  double value = objective.value(X);
  if (!std::isfinite(value)) throw NumericError("objective is not finite at the starting point");
  est.trace.push_back(value);

  double step = cfg.step_init;
  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    const Matrix G = objective.gradient(X);
    bool accepted = false;
    bool first_try = true;
    while (true) {
      auto trial = project_constraint_set(X + step * G, spec, cfg, &warm);
      est.projection_warning |= !trial.converged;
      const Matrix D = trial.X - X;
      const double step_norm = D.norm();
      const double stationarity = step_norm / step;
      const double trial_value = objective.value(trial.X);
      const double predicted = G.cwiseProduct(D).sum();
      const bool sufficient =
          std::isfinite(trial_value) && trial_value >= value + cfg.armijo_c * predicted &&
          trial_value >= value;
      if (sufficient) {
        X = std::move(trial.X);
        value = trial_value;
        est.trace.push_back(value);
        est.final_step_norm = stationarity;
        accepted = true;
      }
      if (stationarity <= cfg.grad_tol) {
        est.converged = true;
        if (!accepted) est.final_step_norm = stationarity;
        break;
      }
      if (accepted) break;
      first_try = false;
      step *= cfg.backtrack_factor;
      // Near the optimum rounding can hide every increase; stop rather than
      // shrink forever.
      if (step < cfg.step_init * 1e-15) {
        est.stalled = true;
        break;
      }
    }
    est.iters = iter;
    if (est.converged || est.stalled) break;
    if (first_try) step = std::min(cfg.step_init, step / cfg.backtrack_factor);
  }

  est.X = std::move(X);
  est.final_ll = value;
  est.nuclear_residual = std::max(0.0, nuclear_norm_checked(est.X) - spec.nuclear_radius());
  est.box_residual = box_residual_of(est.X, spec.alpha);
  return est;
}

Estimate solve(const LinkFamily& family, const ObservationSet& obs, const ConstraintSpec& spec,
               const SolverConfig& cfg) {
  const auto& logit = require_logit(family);
  obs.validate();
  if (obs.entries.empty()) throw InvalidInput("no observations to fit");
  check_family(logit, obs);
  if (spec.d1 != obs.d1 || spec.d2 != obs.d2)
    throw InvalidInput("constraint spec dimensions disagree with the observations");
  const double floor = cfg.prob_floor;
  Objective objective{
      [&](const Matrix& X) { return log_likelihood(logit, obs, X, floor); },
      [&](const Matrix& X) { return log_likelihood_grad(logit, obs, X, floor); }};
  return maximize_over_constraint_set(objective, spec, cfg);
}

}  // namespace catmc
