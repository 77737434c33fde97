#include "catmc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "catmc/error.hpp"
#include "catmc/matrix_io.hpp"
#include "catmc/svd.hpp"
#include "catmc/rng.hpp"

namespace catmc {

namespace {

std::uint64_t cell_key(int i, int j) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) << 32) |
         static_cast<std::uint32_t>(j);
}

}  // namespace

double ConstraintSpec::nuclear_radius() const {
  return alpha * std::sqrt(static_cast<double>(rank) * d1 * d2);
}

void ConstraintSpec::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be positive");
  if (d1 < 1 || d2 < 1) throw InvalidInput("matrix dimensions must be positive");
  if (rank < 1 || rank > std::min(d1, d2))
    throw InvalidInput("rank must satisfy 1 <= r <= min(d1, d2) (r = " + std::to_string(rank) +
                       ", min(d1, d2) = " + std::to_string(std::min(d1, d2)) + ")");
}

void ObservationSet::validate() const {
  if (d1 < 1 || d2 < 1) throw InvalidInput("observation set dimensions must be positive");
  if (K < 2 || static_cast<int>(labels.size()) != K)
    throw InvalidInput("observation set needs K >= 2 labels");
  for (std::size_t k = 1; k < labels.size(); ++k)
    if (!(labels[k] > labels[k - 1])) throw InvalidInput("labels must be strictly increasing");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(entries.size());
  for (const auto& o : entries) {
    if (o.i < 0 || o.i >= d1 || o.j < 0 || o.j >= d2)
      throw InvalidInput("observation (" + std::to_string(o.i) + ", " + std::to_string(o.j) +
                         ") outside the " + std::to_string(d1) + " x " + std::to_string(d2) +
                         " matrix");
    if (o.k < 0 || o.k >= K) throw InvalidInput("observation category out of range");
    if (!seen.insert(cell_key(o.i, o.j)).second)
      throw InvalidInput("duplicate observation of cell (" + std::to_string(o.i) + ", " +
                         std::to_string(o.j) + ")");
  }
}

double nuclear_norm(const Matrix& X) {
  if (X.size() == 0) return 0.0;
  return singular_values(X).sum();
}

void GroundTruth::validate() const {
  spec.validate();
  if (M.rows() != spec.d1 || M.cols() != spec.d2)
    throw InvalidInput("ground truth dimensions disagree with its constraint spec");
  if (M.cwiseAbs().maxCoeff() > spec.alpha + 1e-9)
    throw InvalidInput("ground truth violates the entry bound");
  if (nuclear_norm(M) > spec.nuclear_radius() * (1.0 + 1e-6))
    throw InvalidInput("ground truth violates the nuclear-norm bound");
}

std::vector<double> default_labels(int K) {
  std::vector<double> labels(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) labels[static_cast<std::size_t>(k)] = k + 1;
  return labels;
}

int label_index(const std::vector<double>& labels, double value) {
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (std::abs(labels[k] - value) <= 1e-9) return static_cast<int>(k);
  std::ostringstream msg;
  msg << "value " << value << " is not one of the category labels";
  throw InvalidInput(msg.str());
}

Mask sample_mask(int d1, int d2, double m, std::uint64_t seed) {
  if (d1 < 1 || d2 < 1) throw InvalidInput("mask dimensions must be positive");
  const double cells = static_cast<double>(d1) * d2;
  if (!(m > 0.0) || m > cells)
    throw InvalidInput("expected observation count m must satisfy 0 < m <= d1 d2");
  const double p = m / cells;
  Rng rng(seed);
  Mask mask;
  mask.reserve(static_cast<std::size_t>(m * 1.1) + 16);
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < d2; ++j)
      if (rng.uniform() < p) mask.push_back({i, j});
  return mask;
}

ObservationSet sample_observations(const LinkFamily& family, const GroundTruth& truth,
                                   const Mask& mask, const std::vector<double>& labels,
                                   std::uint64_t seed) {
  const int K = category_count(family);
  if (static_cast<int>(labels.size()) != K)
    throw InvalidInput("label count differs from the family's category count");
  ObservationSet obs;
  obs.d1 = static_cast<int>(truth.M.rows());
  obs.d2 = static_cast<int>(truth.M.cols());
  obs.K = K;
  obs.labels = labels;
  obs.entries.reserve(mask.size());
  Rng rng(seed);
  for (const auto& c : mask) {
    if (c.i < 0 || c.i >= obs.d1 || c.j < 0 || c.j >= obs.d2)
      throw InvalidInput("mask cell outside the ground-truth matrix");
    const Vector p = eval_probs(family, truth.M(c.i, c.j));
    obs.entries.push_back({c.i, c.j, rng.categorical(p)});
  }
  obs.validate();
  return obs;
}

GroundTruth synth_low_rank(int d1, int d2, int r, double alpha, std::uint64_t seed) {
  GroundTruth truth;
  truth.spec = {alpha, r, d1, d2};
  truth.spec.validate();
  Rng rng(seed);
  Matrix A(d1, r), B(d2, r);
  // Row-major fill so the stream order is independent of Eigen's storage.
  for (int i = 0; i < d1; ++i)
    for (int c = 0; c < r; ++c) A(i, c) = rng.normal();
  for (int j = 0; j < d2; ++j)
    for (int c = 0; c < r; ++c) B(j, c) = rng.normal();
  Matrix M = A * B.transpose();
  const double peak = M.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw NumericError("degenerate low-rank draw");
  M *= 0.95 * alpha / peak;
  truth.M = std::move(M);
  return truth;
}

void write_observations_tsv(std::ostream& out, const ObservationSet& obs) {
  for (const auto& o : obs.entries)
    out << o.i << '\t' << o.j << '\t' << format_real(obs.label_of(o)) << '\n';
}

ObservationSet read_observations_tsv(std::istream& in, int d1, int d2,
                                     const std::vector<double>& labels) {
  ObservationSet obs;
  obs.d1 = d1;
  obs.d2 = d2;
  obs.K = static_cast<int>(labels.size());
  obs.labels = labels;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    long long i = 0, j = 0;
    double label = 0.0;
    if (!(fields >> i >> j >> label))
      throw InvalidInput("observation line " + std::to_string(lineno) + " is malformed");
    obs.entries.push_back({static_cast<int>(i), static_cast<int>(j), label_index(labels, label)});
  }
  obs.validate();
  return obs;
}

void write_observations_udata(std::ostream& out, const ObservationSet& obs) {
  for (const auto& o : obs.entries)
    out << o.i + 1 << '\t' << o.j + 1 << '\t' << format_real(obs.label_of(o)) << "\t0\n";
}

std::vector<RatingRecord> read_udata(std::istream& in) {
  std::vector<RatingRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long user = 0, item = 0;
    double rating = 0.0;
    if (!(fields >> user >> item >> rating))
      throw InvalidInput("u.data line " + std::to_string(lineno) + " is malformed");
    if (user < 1 || item < 1)
      throw InvalidInput("u.data line " + std::to_string(lineno) + ": ids are 1-based");
    records.push_back({static_cast<int>(user - 1), static_cast<int>(item - 1), rating});
  }
  return records;
}

ObservationSet observations_from_ratings(const std::vector<RatingRecord>& records,
                                         const std::vector<double>& labels, int d1, int d2) {
  ObservationSet obs;
  obs.K = static_cast<int>(labels.size());
  obs.labels = labels;
  obs.d1 = d1;
  obs.d2 = d2;
  for (const auto& r : records) {
    obs.d1 = std::max(obs.d1, r.user + 1);
    obs.d2 = std::max(obs.d2, r.item + 1);
    obs.entries.push_back({r.user, r.item, label_index(labels, r.rating)});
  }
  obs.validate();
  return obs;
}

}  // namespace catmc
