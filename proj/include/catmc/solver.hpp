#pragma once

#include <functional>
#include <json.hpp>
#include <vector>

#include "catmc/links.hpp"
#include "catmc/sampling.hpp"
#include "catmc/types.hpp"

namespace catmc {

struct SolverConfig {
  int max_iters = 500;
  // Stop once ||X+ - X||_F / t falls below this.
  double grad_tol = 1e-5;
  double step_init = 1.0;
  double backtrack_factor = 0.5;
  double armijo_c = 1e-4;
  int dykstra_max = 200;
  double dykstra_tol = 1e-9;
  // Probabilities are clamped below at this value before taking logs.
  double prob_floor = 1e-12;

  void validate() const;
};

// Every field is optional; missing ones keep the defaults above.
SolverConfig solver_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SolverConfig& cfg);

struct Estimate {
  Matrix X;
  int iters = 0;
  double final_ll = 0.0;
  // max(0, ||X||_* - alpha sqrt(r d1 d2)) and max(0, ||X||_inf - alpha).
  double nuclear_residual = 0.0;
  double box_residual = 0.0;
  bool converged = false;
  // Set when some intersection projection hit dykstra_max sweeps.
  bool projection_warning = false;
  // The line search shrank the step to nothing without an acceptable point.
  bool stalled = false;
  // Objective at X0 followed by the objective after every accepted step.
  std::vector<double> trace;
  double final_step_norm = 0.0;
};

// Tolerances every Estimate must meet.
inline constexpr double kNuclearResidualRelTol = 1e-6;
inline constexpr double kBoxResidualTol = 1e-9;

// sum over observed cells of log max(f_k(X_ij), prob_floor).
double log_likelihood(const MultinomialLogitFamily& family, const ObservationSet& obs,
                      const Matrix& X, double prob_floor = 1e-12);

// Gradient of log_likelihood: f_k'(X_ij) / f_k(X_ij) on observed cells, zero
// elsewhere and zero where the floor is active.
Matrix log_likelihood_grad(const MultinomialLogitFamily& family, const ObservationSet& obs,
                           const Matrix& X, double prob_floor = 1e-12);

// Entrywise clamp to [-alpha, alpha].
Matrix project_box(const Matrix& X, double alpha);

// Euclidean projection of v onto {w >= 0, sum w <= radius}.
Vector project_capped_simplex(const Vector& v, double radius);

// Euclidean projection onto {||X||_* <= radius} through a full SVD.
Matrix project_nuclear_ball(const Matrix& X, double radius);

struct ProjectionResult {
  Matrix X;
  int sweeps = 0;
  bool converged = true;
  double nuclear_residual = 0.0;
  double box_residual = 0.0;
};

// Dykstra correction terms for the ball and the box. Dykstra converges to the
// projection from any corrections, so passing the ones left by a nearby
// input saves sweeps.
struct DykstraWarmStart {
  Matrix ball_correction;
  Matrix box_correction;
};

// Projection onto the intersection of the nuclear ball and the box by
// Dykstra's algorithm. When one elementary projection already lands in the
// other set it is the answer and no sweeps run. A non-null warm start seeds
// the corrections and receives the final ones.
ProjectionResult project_constraint_set(const Matrix& X, const ConstraintSpec& spec,
                                        const SolverConfig& cfg, DykstraWarmStart* warm = nullptr);

struct Objective {
  std::function<double(const Matrix&)> value;
  std::function<Matrix(const Matrix&)> gradient;
};

// Projected gradient ascent with Armijo backtracking over the constraint set,
// starting from X0 (zero when empty).
Estimate maximize_over_constraint_set(const Objective& objective, const ConstraintSpec& spec,
                                      const SolverConfig& cfg, const Matrix& X0 = Matrix());

// Maximum-likelihood estimate over the constraint set.
Estimate solve(const LinkFamily& family, const ObservationSet& obs, const ConstraintSpec& spec,
               const SolverConfig& cfg = {});

}  // namespace catmc
