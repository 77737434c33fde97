#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "catmc/links.hpp"
#include "catmc/types.hpp"

namespace catmc {

// Feasible set {X : ||X||_* <= alpha sqrt(r d1 d2), |X_ij| <= alpha}.
struct ConstraintSpec {
  double alpha = 1.0;
  int rank = 1;
  int d1 = 0;
  int d2 = 0;

  double nuclear_radius() const;
  void validate() const;
};

struct Cell {
  int i = 0;
  int j = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

// Row-major list of distinct cells.
using Mask = std::vector<Cell>;

struct Observation {
  int i = 0;
  int j = 0;
  int k = 0;  // 0-based category index
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct ObservationSet {
  int d1 = 0;
  int d2 = 0;
  int K = 0;
  std::vector<double> labels;  // a_1 < ... < a_K
  std::vector<Observation> entries;

  double label_of(const Observation& o) const { return labels[static_cast<std::size_t>(o.k)]; }

  // Throws InvalidInput on out-of-range indices, duplicate cells or
  // non-increasing labels.
  void validate() const;
};

struct GroundTruth {
  Matrix M;
  ConstraintSpec spec;

  // Box within 1e-9, nuclear ball within 1e-6 relative.
  void validate() const;
};

// Labels 1, 2, ..., K.
std::vector<double> default_labels(int K);

// Index of the label equal to value (within 1e-9), or InvalidInput.
int label_index(const std::vector<double>& labels, double value);

// Each cell included independently with probability m / (d1 d2).
Mask sample_mask(int d1, int d2, double m, std::uint64_t seed);

// One categorical draw per masked cell with probabilities f(M_ij).
ObservationSet sample_observations(const LinkFamily& family, const GroundTruth& truth,
                                   const Mask& mask, const std::vector<double>& labels,
                                   std::uint64_t seed);

// A B^T with standard normal factors, rescaled so that max |M_ij| = 0.95 alpha.
GroundTruth synth_low_rank(int d1, int d2, int r, double alpha, std::uint64_t seed);

double nuclear_norm(const Matrix& X);

// "i<TAB>j<TAB>label" with 0-based indices.
void write_observations_tsv(std::ostream& out, const ObservationSet& obs);
ObservationSet read_observations_tsv(std::istream& in, int d1, int d2,
                                     const std::vector<double>& labels);

// MovieLens "user<TAB>item<TAB>rating<TAB>timestamp" with 1-based ids.
void write_observations_udata(std::ostream& out, const ObservationSet& obs);

struct RatingRecord {
  int user = 0;  // 0-based
  int item = 0;  // 0-based
  double rating = 0.0;
};

std::vector<RatingRecord> read_udata(std::istream& in);

// Dimensions are one past the largest ids present. Throws on a label outside
// the list or a repeated (user, item) pair.
ObservationSet observations_from_ratings(const std::vector<RatingRecord>& records,
                                         const std::vector<double>& labels, int d1 = 0,
                                         int d2 = 0);

}  // namespace catmc
