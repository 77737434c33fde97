#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "catmc/evaluation.hpp"
#include "catmc/fitting.hpp"
#include "catmc/sampling.hpp"
#include "catmc/solver.hpp"

namespace catmc::cli {

// Rating-prediction protocol on a MovieLens-style ratings list: per split,
// disjoint random subsets are used to fit the link, to solve, and to test.
struct MovieLensConfig {
  int splits = 5;
  int fit_count = 5000;
  int test_count = 5000;
  // 0 means every rating left after the fit and test subsets.
  int solve_count = 90000;
  int rank = 3;
  double alpha = 5.0;
  double reg = 1e-6;
  std::uint64_t seed = 0;
  SolverConfig solver;
  SolverConfig baseline_solver;
};

struct MovieLensSplit {
  int index = 0;
  FitResult fit;
  Estimate categorical;
  Estimate baseline;
  RatingReport categorical_report;
  RatingReport baseline_report;
  long long ties = 0;
};

struct MovieLensResult {
  int d1 = 0;
  int d2 = 0;
  std::vector<double> labels;
  std::vector<MovieLensSplit> splits;
};

// Link covariate for a cell: global mean plus user and item offsets estimated
// from the solve subset, clamped to the label range.
class BiasModel {
 public:
  BiasModel(const ObservationSet& solve_set);
  double predict(int user, int item) const;

 private:
  double mean_ = 0.0;
  double low_ = 0.0;
  double high_ = 0.0;
  std::vector<double> user_offset_;
  std::vector<double> item_offset_;
};

// Progress lines go to log when it is non-null.
MovieLensResult run_movielens_protocol(const std::vector<RatingRecord>& records,
                                       const MovieLensConfig& cfg, std::ostream* log = nullptr);

}  // namespace catmc::cli
