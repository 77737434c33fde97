#include "catmc/cli/movielens.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <string>

#include "catmc/error.hpp"
#include "catmc/rng.hpp"

namespace catmc::cli {

namespace {

// Fisher-Yates with the library generator so splits reproduce everywhere.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

ObservationSet subset(const ObservationSet& all, const std::vector<std::size_t>& order,
                      std::size_t begin, std::size_t end) {
  ObservationSet out;
  out.d1 = all.d1;
  out.d2 = all.d2;
  out.K = all.K;
  out.labels = all.labels;
  out.entries.reserve(end - begin);
  for (std::size_t n = begin; n < end; ++n) out.entries.push_back(all.entries[order[n]]);
  // Row-major order makes downstream sums independent of the shuffle.
  std::sort(out.entries.begin(), out.entries.end(), [](const Observation& a, const Observation& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return out;
}

}  // namespace

BiasModel::BiasModel(const ObservationSet& solve_set)
    : low_(solve_set.labels.front()), high_(solve_set.labels.back()) {
  if (solve_set.entries.empty()) throw InvalidInput("bias model needs ratings");
  double total = 0.0;
  for (const auto& o : solve_set.entries) total += solve_set.label_of(o);
  mean_ = total / static_cast<double>(solve_set.entries.size());

  std::vector<double> user_sum(static_cast<std::size_t>(solve_set.d1), 0.0);
  std::vector<double> item_sum(static_cast<std::size_t>(solve_set.d2), 0.0);
  std::vector<int> user_count(user_sum.size(), 0), item_count(item_sum.size(), 0);
  for (const auto& o : solve_set.entries) {
    user_sum[static_cast<std::size_t>(o.i)] += solve_set.label_of(o) - mean_;
    ++user_count[static_cast<std::size_t>(o.i)];
  }
  user_offset_.assign(user_sum.size(), 0.0);
  for (std::size_t u = 0; u < user_sum.size(); ++u)
    if (user_count[u] > 0) user_offset_[u] = user_sum[u] / user_count[u];
  for (const auto& o : solve_set.entries) {
    item_sum[static_cast<std::size_t>(o.j)] +=
        solve_set.label_of(o) - mean_ - user_offset_[static_cast<std::size_t>(o.i)];
    ++item_count[static_cast<std::size_t>(o.j)];
  }
  item_offset_.assign(item_sum.size(), 0.0);
  for (std::size_t v = 0; v < item_sum.size(); ++v)
    if (item_count[v] > 0) item_offset_[v] = item_sum[v] / item_count[v];
}

double BiasModel::predict(int user, int item) const {
  double x = mean_;
  if (user >= 0 && user < static_cast<int>(user_offset_.size()))
    x += user_offset_[static_cast<std::size_t>(user)];
  if (item >= 0 && item < static_cast<int>(item_offset_.size()))
    x += item_offset_[static_cast<std::size_t>(item)];
  return std::clamp(x, low_, high_);
}

MovieLensResult run_movielens_protocol(const std::vector<RatingRecord>& records,
                                       const MovieLensConfig& cfg, std::ostream* log) {
  if (cfg.splits < 1) throw InvalidInput("need at least one split");
  if (cfg.fit_count < 1 || cfg.test_count < 1 || cfg.solve_count < 0)
    throw InvalidInput("split sizes must be positive");
  MovieLensResult result;
  result.labels = default_labels(5);
  const ObservationSet all = observations_from_ratings(records, result.labels);
  result.d1 = all.d1;
  result.d2 = all.d2;

  const std::size_t n = all.entries.size();
  const std::size_t fit_n = static_cast<std::size_t>(cfg.fit_count);
  const std::size_t test_n = static_cast<std::size_t>(cfg.test_count);
  if (fit_n + test_n >= n)
    throw InvalidInput("dataset has " + std::to_string(n) + " ratings, too few for the split sizes");
  const std::size_t solve_n =
      cfg.solve_count == 0 ? n - fit_n - test_n
                           : std::min(static_cast<std::size_t>(cfg.solve_count), n - fit_n - test_n);
  const ConstraintSpec spec{cfg.alpha, cfg.rank, all.d1, all.d2};
  spec.validate();

  for (int s = 0; s < cfg.splits; ++s) {
    const auto order = shuffled_indices(n, derive_seed(cfg.seed ^ static_cast<std::uint64_t>(s), 7));
    const ObservationSet fit_set = subset(all, order, 0, fit_n);
    const ObservationSet test_set = subset(all, order, fit_n, fit_n + test_n);
    const ObservationSet solve_set = subset(all, order, fit_n + test_n, fit_n + test_n + solve_n);

    MovieLensSplit split;
    split.index = s;
    const BiasModel bias(solve_set);
    TrainingPairs pairs;
    pairs.K = all.K;
    for (const auto& o : fit_set.entries) pairs.pairs.push_back({bias.predict(o.i, o.j), o.k});
    split.fit = fit_logit(pairs, cfg.reg);
    if (log)
      *log << "split " << s << ": link fit " << (split.fit.converged ? "converged" : "did not converge")
           << " after " << split.fit.iters << " iterations\n";

    const LinkFamily family = split.fit.family;
    split.categorical = solve(family, solve_set, spec, cfg.solver);
    const Prediction pred = predict_categories(family, split.categorical.X, result.labels, cfg.alpha);
    split.ties = pred.ties;
    split.categorical_report = rating_report(test_set, pred.labels);
    split.categorical.X.resize(0, 0);
    if (log)
      *log << "split " << s << ": categorical solve " << split.categorical.iters
           << " iterations, overall " << split.categorical_report.overall << '\n';

    split.baseline = baseline_real_completion(solve_set, spec, cfg.baseline_solver);
    split.baseline_report = rating_report(test_set, round_to_labels(split.baseline.X, result.labels));
    split.baseline.X.resize(0, 0);
    if (log)
      *log << "split " << s << ": baseline solve " << split.baseline.iters
           << " iterations, overall " << split.baseline_report.overall << '\n';
    result.splits.push_back(std::move(split));
  }
  return result;
}

}  // namespace catmc::cli
