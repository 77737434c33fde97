#include "catmc/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

#include "catmc/cli/manifest.hpp"
#include "catmc/cli/movielens.hpp"
#include "catmc/error.hpp"
#include "catmc/evaluation.hpp"
#include "catmc/fitting.hpp"
#include "catmc/links.hpp"
#include "catmc/matrix_io.hpp"
#include "catmc/rng.hpp"
#include "catmc/sampling.hpp"
#include "catmc/solver.hpp"

namespace fs = std::filesystem;

namespace catmc::cli {

namespace {

// A usage problem detected after CLI11 parsing.
class UsageError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream field(item);
    T v{};
    if (!(field >> v) || !field.eof())
      throw UsageError(std::string("cannot parse '") + item + "' in " + what);
    values.push_back(v);
  }
  if (values.empty()) throw UsageError(std::string(what) + " is empty");
  return values;
}

LinkFamily load_family(const std::string& spec, int K) {
  if (spec == "default") return MultinomialLogitFamily::evenly_spaced(K);
  if (spec == "mood") return TabularLinkFamily::mood(K);
  std::ifstream in(spec);
  if (!in) throw InvalidInput("cannot open family file " + spec);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("family file " + spec + " is not valid JSON: " + e.what());
  }
  return link_family_from_json(doc);
}

std::vector<double> resolve_labels(const std::string& text, int K) {
  if (text.empty()) return default_labels(K);
  auto labels = parse_list<double>(text, "--labels");
  if (static_cast<int>(labels.size()) != K)
    throw UsageError("--labels has " + std::to_string(labels.size()) + " values but K = " +
                     std::to_string(K));
  return labels;
}

SolverConfig load_solver_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open solver config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("solver config " + path + " is not valid JSON: " + e.what());
  }
  return solver_config_from_json(doc);
}

std::string prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path);
}

template <typename Json>
void write_json(const std::string& path, const Json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

nlohmann::ordered_json estimate_diagnostics(const Estimate& est) {
  nlohmann::ordered_json d;
  d["iters"] = est.iters;
  d["final_ll"] = est.final_ll;
  d["nuclear_residual"] = est.nuclear_residual;
  d["box_residual"] = est.box_residual;
  d["converged"] = est.converged;
  d["projection_warning"] = est.projection_warning;
  d["stalled"] = est.stalled;
  d["final_step_norm"] = est.final_step_norm;
  std::string warning;
  if (est.stalled) warning = "line search stalled before reaching grad_tol";
  else if (!est.converged) warning = "solver stopped at max_iters before reaching grad_tol";
  if (est.projection_warning) {
    if (!warning.empty()) warning += "; ";
    warning += "an intersection projection hit dykstra_max sweeps";
  }
  d["warning"] = warning.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(warning);
  return d;
}

std::string trace_csv(const std::vector<double>& trace, const char* column) {
  std::ostringstream out;
  out << "iteration," << column << '\n';
  for (std::size_t t = 0; t < trace.size(); ++t) out << t << ',' << format_real(trace[t]) << '\n';
  return out.str();
}

ObservationSet read_observation_file(const std::string& path, const std::string& format,
                                     std::optional<int> d1, std::optional<int> d2,
                                     const std::vector<double>& labels) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open observation file " + path);
  if (format == "udata")
    return observations_from_ratings(read_udata(in), labels, d1.value_or(0), d2.value_or(0));
  if (d1 && d2) return read_observations_tsv(in, *d1, *d2, labels);
  // Dimensions default to one past the largest index seen.
  std::vector<RatingRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    long long i = 0, j = 0;
    double label = 0.0;
    if (!(fields >> i >> j >> label) || i < 0 || j < 0)
      throw InvalidInput("observation line " + std::to_string(lineno) + " is malformed");
    records.push_back({static_cast<int>(i), static_cast<int>(j), label});
  }
  if (records.empty()) throw InvalidInput("observation file " + path + " has no observations");
  return observations_from_ratings(records, labels, d1.value_or(0), d2.value_or(0));
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  int d1 = 0, d2 = 0, rank = 1, K = 5;
  double alpha = 1.0, m = 0.0;
  std::string family = "default", labels, out;
  std::uint64_t seed = 0;
};

void run_generate(const GenerateArgs& a, std::ostream& out) {
  Stopwatch clock;
  const LinkFamily family = load_family(a.family, a.K);
  const int K = category_count(family);
  const auto labels = resolve_labels(a.labels, K);
  const GroundTruth truth = synth_low_rank(a.d1, a.d2, a.rank, a.alpha, derive_seed(a.seed, 1));
  const Mask mask = sample_mask(a.d1, a.d2, a.m, derive_seed(a.seed, 2));
  const ObservationSet obs = sample_observations(family, truth, mask, labels, derive_seed(a.seed, 3));

  const auto dir = prepare_out_dir(a.out);
  write_matrix_file(join(dir, "truth.txt"), truth.M);
  {
    std::ofstream f(join(dir, "observations.tsv"));
    if (!f) throw Error("cannot write observations.tsv");
    write_observations_tsv(f, obs);
  }
  write_json(join(dir, "family.json"), to_json(family));

  RunManifest manifest;
  manifest.command = "generate";
  manifest.seed = a.seed;
  manifest.config = {{"d1", a.d1}, {"d2", a.d2}, {"rank", a.rank}, {"alpha", a.alpha},
                     {"m", a.m},   {"K", K},     {"labels", labels}};
  manifest.inputs = {{"family", a.family}};
  manifest.outputs = {{"truth", "truth.txt"},
                      {"observations", "observations.tsv"},
                      {"family", "family.json"},
                      {"observed_count", obs.entries.size()}};
  manifest.duration_seconds = clock.seconds();
  write_manifest(join(dir, "manifest.json"), manifest);
  out << "generated " << obs.entries.size() << " observations of a " << a.d1 << " x " << a.d2
      << " rank-" << a.rank << " matrix in " << dir << '\n';
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string pairs, out;
  int K = 5;
  double reg = 1e-6;
  int max_iters = FitConfig{}.max_iters;
};

int run_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  std::ifstream in(a.pairs);
  if (!in) throw InvalidInput("cannot open training pairs " + a.pairs);
  const TrainingPairs data = read_training_pairs(in, a.K);
  FitConfig cfg;
  cfg.max_iters = a.max_iters;
  const FitResult fit = fit_logit(data, a.reg, cfg);

  const auto dir = prepare_out_dir(a.out);
  write_json(join(dir, "family.json"), to_json(LinkFamily(fit.family)));
  nlohmann::ordered_json diag;
  diag["converged"] = fit.converged;
  diag["diverged"] = fit.diverged;
  diag["iters"] = fit.iters;
  diag["objective"] = fit.objective;
  diag["grad_norm"] = fit.grad_norm;
  diag["mean_loglik"] = loglik_of_fit(fit.family, data);
  diag["warning"] = fit.converged ? nlohmann::ordered_json(nullptr)
                                  : nlohmann::ordered_json(fit.diverged
                                                               ? "parameters diverged (separated data?)"
                                                               : "max_iters reached before grad_tol");
  write_json(join(dir, "fit.json"), diag);

  RunManifest manifest;
  manifest.command = "fit";
  manifest.config = {{"K", a.K}, {"reg", a.reg}, {"max_iters", a.max_iters}};
  manifest.inputs = {{"pairs", a.pairs}};
  manifest.outputs = {{"family", "family.json"}, {"diagnostics", "fit.json"}};
  manifest.duration_seconds = clock.seconds();
  write_manifest(join(dir, "manifest.json"), manifest);
  if (!fit.converged)
    err << "warning: link fit did not converge (gradient norm " << fit.grad_norm << ")\n";
  out << "fitted " << a.K << "-category logit link from " << data.pairs.size() << " pairs\n";
  return kExitOk;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
  std::string obs, family = "default", labels, config, out, format = "tsv";
  int K = 5, rank = 1;
  double alpha = 1.0;
  std::optional<int> d1, d2;
};

int run_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  const LinkFamily family = load_family(a.family, a.K);
  const int K = category_count(family);
  const auto labels = resolve_labels(a.labels, K);
  const SolverConfig cfg = load_solver_config(a.config);
  const ObservationSet obs = read_observation_file(a.obs, a.format, a.d1, a.d2, labels);
  if (obs.entries.empty()) throw InvalidInput("observation file " + a.obs + " has no observations");
  const ConstraintSpec spec{a.alpha, a.rank, obs.d1, obs.d2};
  spec.validate();
  const Estimate est = solve(family, obs, spec, cfg);

  const auto dir = prepare_out_dir(a.out);
  write_matrix_file(join(dir, "estimate.txt"), est.X);
  write_json(join(dir, "diagnostics.json"), estimate_diagnostics(est));
  write_text(join(dir, "trace.csv"), trace_csv(est.trace, "log_likelihood"));

  RunManifest manifest;
  manifest.command = "solve";
  manifest.config = {{"alpha", a.alpha}, {"rank", a.rank},       {"d1", obs.d1},
                     {"d2", obs.d2},     {"K", K},                {"labels", labels},
                     {"format", a.format}, {"solver", to_json(cfg)}};
  manifest.inputs = {{"observations", a.obs}, {"family", a.family}, {"config", a.config}};
  manifest.outputs = {{"estimate", "estimate.txt"},
                      {"diagnostics", "diagnostics.json"},
                      {"trace", "trace.csv"}};
  manifest.duration_seconds = clock.seconds();
  write_manifest(join(dir, "manifest.json"), manifest);
  if (!est.converged || est.projection_warning)
    err << "warning: " << estimate_diagnostics(est)["warning"].get<std::string>() << '\n';
  out << "solved in " << est.iters << " iterations, log-likelihood " << est.final_ll << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string test, pred, estimate, family, labels, movielens, config, baseline_config, out;
  int K = 5;
  std::optional<double> alpha;
  bool round = false;
  MovieLensConfig ml;
};

nlohmann::ordered_json split_json(const MovieLensSplit& s) {
  nlohmann::ordered_json j;
  j["split"] = s.index;
  j["link_fit"] = {{"converged", s.fit.converged},
                   {"iters", s.fit.iters},
                   {"alphas", s.fit.family.alphas()},
                   {"betas", s.fit.family.betas()}};
  j["categorical"] = to_json(s.categorical_report);
  j["categorical_solver"] = estimate_diagnostics(s.categorical);
  j["categorical_ties"] = s.ties;
  j["baseline"] = to_json(s.baseline_report);
  j["baseline_solver"] = estimate_diagnostics(s.baseline);
  return j;
}

void run_eval_movielens(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  std::ifstream in(a.movielens);
  if (!in) throw InvalidInput("cannot open " + a.movielens);
  const auto records = read_udata(in);
  MovieLensConfig cfg = a.ml;
  if (!a.config.empty()) cfg.solver = load_solver_config(a.config);
  if (!a.baseline_config.empty()) cfg.baseline_solver = load_solver_config(a.baseline_config);
  const MovieLensResult res = run_movielens_protocol(records, cfg, &err);

  const auto dir = prepare_out_dir(a.out);
  nlohmann::ordered_json report;
  report["d1"] = res.d1;
  report["d2"] = res.d2;
  report["splits"] = nlohmann::ordered_json::array();
  std::string tables;
  for (const auto& s : res.splits) {
    report["splits"].push_back(split_json(s));
    tables += "split " + std::to_string(s.index) + "\n" +
              format_rating_table({{"Categorical", s.categorical_report},
                                   {"Real-valued", s.baseline_report}}) +
              "\n";
  }
  write_json(join(dir, "report.json"), report);
  write_text(join(dir, "report.txt"), tables);

  RunManifest manifest;
  manifest.command = "eval";
  manifest.seed = cfg.seed;
  manifest.config = {{"mode", "movielens"},        {"splits", cfg.splits},
                     {"fit_count", cfg.fit_count}, {"test_count", cfg.test_count},
                     {"solve_count", cfg.solve_count}, {"rank", cfg.rank},
                     {"alpha", cfg.alpha},         {"reg", cfg.reg},
                     {"solver", to_json(cfg.solver)}, {"baseline_solver", to_json(cfg.baseline_solver)}};
  manifest.inputs = {{"movielens", a.movielens}};
  manifest.outputs = {{"report", "report.json"}, {"table", "report.txt"}};
  manifest.duration_seconds = clock.seconds();
  write_manifest(join(dir, "manifest.json"), manifest);
  out << tables;
}

void run_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.movielens.empty()) {
    run_eval_movielens(a, out, err);
    return;
  }
  Stopwatch clock;
  if (a.test.empty()) throw UsageError("eval needs --test (or --movielens)");
  if (a.pred.empty() == a.estimate.empty())
    throw UsageError("eval needs exactly one of --pred or --estimate");

  Matrix predicted;
  std::vector<double> labels;
  long long ties = 0;
  if (!a.pred.empty()) {
    predicted = read_matrix_file(a.pred);
    labels = resolve_labels(a.labels, a.K);
  } else {
    const Matrix X = read_matrix_file(a.estimate);
    if (a.round) {
      labels = resolve_labels(a.labels, a.K);
      predicted = round_to_labels(X, labels);
    } else {
      if (a.family.empty()) throw UsageError("--estimate needs --family (or --round)");
      const LinkFamily family = load_family(a.family, a.K);
      labels = resolve_labels(a.labels, category_count(family));
      const Prediction p = predict_categories(family, X, labels, a.alpha);
      predicted = p.labels;
      ties = p.ties;
      if (p.clamped > 0) err << "warning: " << p.clamped << " entries clamped before prediction\n";
    }
  }
  std::ifstream in(a.test);
  if (!in) throw InvalidInput("cannot open test file " + a.test);
  const ObservationSet test = read_observations_tsv(
      in, static_cast<int>(predicted.rows()), static_cast<int>(predicted.cols()), labels);
  const RatingReport report = rating_report(test, predicted);

  const auto dir = prepare_out_dir(a.out);
  auto doc = to_json(report);
  doc["ties"] = ties;
  write_json(join(dir, "report.json"), doc);
  const std::string table = format_rating_table({{"Prediction", report}});
  write_text(join(dir, "report.txt"), table);

  RunManifest manifest;
  manifest.command = "eval";
  manifest.config = {{"mode", a.pred.empty() ? (a.round ? "round" : "argmax") : "labels"},
                     {"labels", labels}};
  if (a.alpha) manifest.config["alpha"] = *a.alpha;
  manifest.inputs = {{"test", a.test}, {"pred", a.pred}, {"estimate", a.estimate}, {"family", a.family}};
  manifest.outputs = {{"report", "report.json"}, {"table", "report.txt"}};
  manifest.duration_seconds = clock.seconds();
  write_manifest(join(dir, "manifest.json"), manifest);
  out << table;
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string family = "default", out;
  int K = 5, rank = 1, d1 = 0, d2 = 0, grid = 4096;
  double alpha = 1.0, m = 0.0;
  BoundConstants constants;
};

void run_bounds(const BoundsArgs& a, std::ostream& out) {
  Stopwatch clock;
  const LinkFamily family = load_family(a.family, a.K);
  const auto& logit = require_logit(family);
  const ConstraintSpec spec{a.alpha, a.rank, a.d1, a.d2};
  spec.validate();
  const SmoothnessReport smooth = smoothness_constants(logit, a.alpha, a.grid);
  const BoundReport b = bound_report(smooth, spec, a.m, logit.K(), a.constants);

  const auto dir = prepare_out_dir(a.out);
  write_json(join(dir, "bounds.json"), to_json(b));
  write_text(join(dir, "bounds.txt"), format_bound_table(b));
  RunManifest manifest;
  manifest.command = "bounds";
  manifest.config = {{"K", logit.K()},  {"alpha", a.alpha},  {"rank", a.rank},
                     {"d1", a.d1},      {"d2", a.d2},        {"m", a.m},
                     {"grid", a.grid},  {"C_prime", a.constants.C_prime},
                     {"C1", a.constants.C1}, {"C2", a.constants.C2}};
  manifest.inputs = {{"family", a.family}};
  manifest.outputs = {{"report", "bounds.json"}, {"table", "bounds.txt"}};
  manifest.duration_seconds = clock.seconds();
  write_manifest(join(dir, "manifest.json"), manifest);
  out << format_bound_table(b);
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  int d1 = 100, d2 = 100, replicates = 5, grid = 4096;
  double alpha = 1.0;
  std::string ranks = "3", Ks = "5", ms, family = "default", config, out;
  std::uint64_t seed = 0;
};

struct SweepRow {
  int K = 0, rank = 0;
  double m = 0.0;
  int replicate = 0;
  double mse = 0.0, bound_upper = 0.0, bound_lower = 0.0;
  int iters = 0;
  bool converged = false;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void run_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  Stopwatch clock;
  if (a.replicates < 3) throw UsageError("sweep needs --replicates >= 3");
  const auto ms = parse_list<double>(a.ms, "--m");
  const auto ranks = parse_list<int>(a.ranks, "--rank");
  const auto Ks = parse_list<int>(a.Ks, "--K");
  if (a.family != "default" && Ks.size() > 1)
    throw UsageError("a family file fixes K; use a single --K with --family");
  for (double m : ms)
    if (!(m > 0.0) || m > static_cast<double>(a.d1) * a.d2)
      throw UsageError("--m value " + format_real(m) + " must satisfy 0 < m <= d1 d2 = " +
                       std::to_string(static_cast<long long>(a.d1) * a.d2));
  const SolverConfig cfg = load_solver_config(a.config);

  std::vector<SweepRow> rows;
  for (int K : Ks) {
    const LinkFamily family = load_family(a.family, K);
    const auto& logit = require_logit(family);
    const auto labels = default_labels(logit.K());
    const SmoothnessReport smooth = smoothness_constants(logit, a.alpha, a.grid);
    for (int r : ranks) {
      const ConstraintSpec spec{a.alpha, r, a.d1, a.d2};
      spec.validate();
      for (int rep = 0; rep < a.replicates; ++rep) {
        const std::uint64_t base = a.seed ^ static_cast<std::uint64_t>(rep);
        const GroundTruth truth = synth_low_rank(a.d1, a.d2, r, a.alpha, derive_seed(base, 1));
        for (std::size_t mi = 0; mi < ms.size(); ++mi) {
          const Mask mask = sample_mask(a.d1, a.d2, ms[mi], derive_seed(base, 100 + mi));
          const ObservationSet obs =
              sample_observations(family, truth, mask, labels, derive_seed(base, 200 + mi));
          const Estimate est = solve(family, obs, spec, cfg);
          const BoundReport b = bound_report(smooth, spec, ms[mi], logit.K());
          rows.push_back({logit.K(), r, ms[mi], rep, mse_per_entry(truth.M, est.X), b.upper_simple,
                          b.lower, est.iters, est.converged});
          err << "K=" << logit.K() << " r=" << r << " m=" << ms[mi] << " rep=" << rep
              << " mse=" << rows.back().mse << " iters=" << est.iters << '\n';
        }
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const SweepRow& x, const SweepRow& y) {
    return std::tie(x.K, x.rank, x.m, x.replicate) < std::tie(y.K, y.rank, y.m, y.replicate);
  });

  std::ostringstream csv;
  csv << "m,replicate,mse,bound_upper,bound_lower,K,rank,iters,converged\n";
  for (const auto& row : rows)
    csv << format_real(row.m) << ',' << row.replicate << ',' << format_real(row.mse) << ','
        << format_real(row.bound_upper) << ',' << format_real(row.bound_lower) << ',' << row.K << ','
        << row.rank << ',' << row.iters << ',' << (row.converged ? 1 : 0) << '\n';

  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  std::map<std::pair<int, int>, std::map<double, std::vector<double>>> groups;
  for (const auto& row : rows) groups[{row.K, row.rank}][row.m].push_back(row.mse);
  std::ostringstream text;
  for (const auto& [key, by_m] : groups) {
    std::vector<double> xs, meds;
    nlohmann::ordered_json per_m = nlohmann::ordered_json::array();
    for (const auto& [m, values] : by_m) {
      xs.push_back(m);
      meds.push_back(median(values));
      per_m.push_back({{"m", m}, {"median_mse", meds.back()}});
    }
    const double slope = xs.size() >= 2 ? log_log_slope(xs, meds) : std::nan("");
    summary.push_back({{"K", key.first}, {"rank", key.second}, {"slope", slope}, {"medians", per_m}});
    text << "K=" << key.first << " rank=" << key.second << " log-log slope of median MSE vs m: "
         << slope << '\n';
  }

  const auto dir = prepare_out_dir(a.out);
  write_text(join(dir, "sweep.csv"), csv.str());
  write_json(join(dir, "summary.json"), summary);
  RunManifest manifest;
  manifest.command = "sweep";
  manifest.seed = a.seed;
  manifest.config = {{"d1", a.d1},      {"d2", a.d2},       {"alpha", a.alpha},
                     {"K", Ks},         {"rank", ranks},    {"m", ms},
                     {"replicates", a.replicates}, {"grid", a.grid}, {"solver", to_json(cfg)}};
  manifest.inputs = {{"family", a.family}, {"config", a.config}};
  manifest.outputs = {{"rows", "sweep.csv"}, {"summary", "summary.json"}};
  manifest.duration_seconds = clock.seconds();
  write_manifest(join(dir, "manifest.json"), manifest);
  out << text.str();
}

int status_for(const std::exception& e) {
  if (dynamic_cast<const InvalidInput*>(&e) || dynamic_cast<const Unsupported*>(&e) ||
      dynamic_cast<const DegenerateFamily*>(&e) || dynamic_cast<const DegenerateData*>(&e))
    return kExitUsage;
  return kExitFailure;
}

}  // namespace

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("slope needs two or more points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidInput("log-log slope needs positive values");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Categorical matrix completion by nuclear-norm constrained maximum likelihood",
               "catmc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", artifact_version());

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "synthesize a low-rank truth and categorical observations");
  generate->add_option("--d1", gen.d1, "rows")->required()->check(CLI::PositiveNumber);
  generate->add_option("--d2", gen.d2, "columns")->required()->check(CLI::PositiveNumber);
  generate->add_option("--rank", gen.rank, "rank of the truth")->required();
  generate->add_option("--alpha", gen.alpha, "entry bound")->capture_default_str();
  generate->add_option("--m", gen.m, "expected number of observations")->required();
  generate->add_option("--K", gen.K, "categories for the default family")->capture_default_str();
  generate->add_option("--family", gen.family, "family JSON path, 'default' or 'mood'")->capture_default_str();
  generate->add_option("--labels", gen.labels, "comma-separated category labels (default 1..K)");
  generate->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  generate->add_option("--out", gen.out, "output directory")->required();

  FitArgs fit;
  auto* fitcmd = app.add_subcommand("fit", "fit a multinomial logit link from x<TAB>k pairs");
  fitcmd->add_option("--pairs", fit.pairs, "training pairs file")->required();
  fitcmd->add_option("--K", fit.K, "category count")->capture_default_str();
  fitcmd->add_option("--reg", fit.reg, "ridge weight")->capture_default_str();
  fitcmd->add_option("--max-iters", fit.max_iters, "iteration cap")->capture_default_str();
  fitcmd->add_option("--out", fit.out, "output directory")->required();

  SolveArgs sol;
  int sol_d1 = 0, sol_d2 = 0;
  auto* solvecmd = app.add_subcommand("solve", "recover the latent matrix from categorical observations");
  solvecmd->add_option("--obs", sol.obs, "observations (i<TAB>j<TAB>label, or u.data)")->required();
  solvecmd->add_option("--format", sol.format, "tsv or udata")
      ->check(CLI::IsMember({"tsv", "udata"}))
      ->capture_default_str();
  auto* sol_d1_opt = solvecmd->add_option("--d1", sol_d1, "rows (default: inferred)");
  auto* sol_d2_opt = solvecmd->add_option("--d2", sol_d2, "columns (default: inferred)");
  solvecmd->add_option("--family", sol.family, "family JSON path or 'default'")->capture_default_str();
  solvecmd->add_option("--K", sol.K, "categories for the default family")->capture_default_str();
  solvecmd->add_option("--labels", sol.labels, "comma-separated category labels (default 1..K)");
  solvecmd->add_option("--alpha", sol.alpha, "entry bound")->required();
  solvecmd->add_option("--rank", sol.rank, "rank parameter of the nuclear-norm bound")->required();
  solvecmd->add_option("--config", sol.config, "solver config JSON");
  solvecmd->add_option("--out", sol.out, "output directory")->required();

  EvalArgs ev;
  double ev_alpha = 0.0;
  auto* evalcmd = app.add_subcommand("eval", "score predictions against held-out ratings");
  evalcmd->add_option("--test", ev.test, "test observations (i<TAB>j<TAB>label)");
  evalcmd->add_option("--pred", ev.pred, "matrix of predicted labels");
  evalcmd->add_option("--estimate", ev.estimate, "recovered matrix to turn into predictions");
  evalcmd->add_option("--family", ev.family, "family for argmax prediction");
  evalcmd->add_flag("--round", ev.round, "round the estimate to the nearest label instead");
  evalcmd->add_option("--K", ev.K, "category count")->capture_default_str();
  evalcmd->add_option("--labels", ev.labels, "comma-separated category labels (default 1..K)");
  auto* ev_alpha_opt = evalcmd->add_option("--alpha", ev_alpha, "clamp estimates to [-alpha, alpha]");
  evalcmd->add_option("--movielens", ev.movielens, "run the full protocol on a u.data file");
  evalcmd->add_option("--splits", ev.ml.splits, "protocol: random splits")->capture_default_str();
  evalcmd->add_option("--fit-count", ev.ml.fit_count, "protocol: ratings for the link fit")->capture_default_str();
  evalcmd->add_option("--test-count", ev.ml.test_count, "protocol: held-out ratings")->capture_default_str();
  evalcmd->add_option("--solve-count", ev.ml.solve_count, "protocol: ratings to solve on (0 = rest)")
      ->capture_default_str();
  evalcmd->add_option("--rank", ev.ml.rank, "protocol: rank parameter")->capture_default_str();
  evalcmd->add_option("--protocol-alpha", ev.ml.alpha, "protocol: entry bound")->capture_default_str();
  evalcmd->add_option("--reg", ev.ml.reg, "protocol: ridge weight of the link fit")->capture_default_str();
  evalcmd->add_option("--seed", ev.ml.seed, "protocol: split seed")->capture_default_str();
  evalcmd->add_option("--config", ev.config, "protocol: solver config JSON");
  evalcmd->add_option("--baseline-config", ev.baseline_config, "protocol: baseline solver config JSON");
  evalcmd->add_option("--out", ev.out, "output directory")->required();

  BoundsArgs bd;
  auto* boundscmd = app.add_subcommand("bounds", "evaluate the upper and lower error bounds");
  boundscmd->add_option("--family", bd.family, "family JSON path or 'default'")->capture_default_str();
  boundscmd->add_option("--K", bd.K, "categories for the default family")->capture_default_str();
  boundscmd->add_option("--alpha", bd.alpha, "entry bound")->required();
  boundscmd->add_option("--rank", bd.rank, "rank parameter")->required();
  boundscmd->add_option("--d1", bd.d1, "rows")->required();
  boundscmd->add_option("--d2", bd.d2, "columns")->required();
  boundscmd->add_option("--m", bd.m, "number of observations")->required();
  boundscmd->add_option("--grid", bd.grid, "smoothness grid size")->capture_default_str();
  boundscmd->add_option("--C-prime", bd.constants.C_prime, "upper-bound constant")->capture_default_str();
  boundscmd->add_option("--C1", bd.constants.C1, "lower-bound cap")->capture_default_str();
  boundscmd->add_option("--C2", bd.constants.C2, "lower-bound constant")->capture_default_str();
  boundscmd->add_option("--out", bd.out, "output directory")->required();

  SweepArgs sw;
  auto* sweepcmd = app.add_subcommand("sweep", "Monte-Carlo error decay over a grid of m");
  sweepcmd->add_option("--d1", sw.d1, "rows")->capture_default_str();
  sweepcmd->add_option("--d2", sw.d2, "columns")->capture_default_str();
  sweepcmd->add_option("--rank", sw.ranks, "rank or comma-separated ranks")->capture_default_str();
  sweepcmd->add_option("--K", sw.Ks, "K or comma-separated K values")->capture_default_str();
  sweepcmd->add_option("--alpha", sw.alpha, "entry bound")->capture_default_str();
  sweepcmd->add_option("--m", sw.ms, "comma-separated observation counts")->required();
  sweepcmd->add_option("--replicates", sw.replicates, "replicates per grid point (>= 3)")->capture_default_str();
  sweepcmd->add_option("--family", sw.family, "family JSON path or 'default'")->capture_default_str();
  sweepcmd->add_option("--grid", sw.grid, "smoothness grid size")->capture_default_str();
  sweepcmd->add_option("--seed", sw.seed, "base seed")->capture_default_str();
  sweepcmd->add_option("--config", sw.config, "solver config JSON");
  sweepcmd->add_option("--out", sw.out, "output directory")->required();

  std::vector<std::string> argv_store;
  argv_store.reserve(args.size() + 1);
  argv_store.push_back("catmc");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << artifact_version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    for (const auto* sub : app.get_subcommands()) err << sub->help();
    return kExitUsage;
  }

  try {
    if (*generate) {
      run_generate(gen, out);
    } else if (*fitcmd) {
      return run_fit(fit, out, err);
    } else if (*solvecmd) {
      if (*sol_d1_opt) sol.d1 = sol_d1;
      if (*sol_d2_opt) sol.d2 = sol_d2;
      return run_solve(sol, out, err);
    } else if (*evalcmd) {
      if (*ev_alpha_opt) ev.alpha = ev_alpha;
      run_eval(ev, out, err);
    } else if (*boundscmd) {
      run_bounds(bd, out);
    } else if (*sweepcmd) {
      run_sweep(sw, out, err);
    }
  } catch (const std::exception& e) {
    const int status = status_for(e);
    err << (status == kExitUsage ? "error: " : "failure: ") << e.what() << '\n';
    return status;
  }
  return kExitOk;
}

}  // namespace catmc::cli
