#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>
#include <sys/wait.h>

#include "catmc/cli/commands.hpp"
#include "catmc/matrix_io.hpp"
#include "catmc/sampling.hpp"
#include "catmc/solver.hpp"

namespace fs = std::filesystem;
using catmc::cli::run;

namespace {

struct Outcome {
  int status = 0;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = run(args, out, err);
  return {status, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("catmc_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int count_lines(const std::string& text) {
  int n = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') ++n;
  return n;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("generate writes a full 4 x 4 observation set") {
  const auto dir = scratch("gen");
  const auto r = call({"generate", "--d1", "4", "--d2", "4", "--rank", "1", "--m", "16", "--seed", "7",
                       "--out", (dir / "a").string()});
  REQUIRE(r.status == 0);
  CHECK(count_lines(slurp(dir / "a" / "observations.tsv")) == 16);
  const catmc::Matrix truth = catmc::read_matrix_file((dir / "a" / "truth.txt").string());
  CHECK(truth.rows() == 4);
  CHECK(truth.array().abs().maxCoeff() <= 1.0);
  const auto manifest = read_json(dir / "a" / "manifest.json");
  CHECK(manifest["command"] == "generate");
  CHECK(manifest["seed"] == 7);

  SUBCASE("same seed, same files") {
    REQUIRE(call({"generate", "--d1", "4", "--d2", "4", "--rank", "1", "--m", "16", "--seed", "7", "--out",
                  (dir / "b").string()})
                .status == 0);
    CHECK(slurp(dir / "a" / "observations.tsv") == slurp(dir / "b" / "observations.tsv"));
    CHECK(slurp(dir / "a" / "truth.txt") == slurp(dir / "b" / "truth.txt"));
  }
  SUBCASE("rank above the dimensions is a usage error") {
    const auto bad = call({"generate", "--d1", "4", "--d2", "4", "--rank", "10", "--m", "16", "--out",
                           (dir / "c").string()});
    CHECK(bad.status == 2);
    CHECK_FALSE(bad.err.empty());
  }
  SUBCASE("missing required option") {
    CHECK(call({"generate", "--d1", "4", "--out", (dir / "d").string()}).status == 2);
  }
}

TEST_CASE("solve on generated data") {
  const auto dir = scratch("solve");
  REQUIRE(call({"generate", "--d1", "12", "--d2", "10", "--rank", "2", "--m", "80", "--seed", "3", "--out",
                (dir / "gen").string()})
              .status == 0);
  const auto r = call({"solve", "--obs", (dir / "gen" / "observations.tsv").string(), "--d1", "12", "--d2",
                       "10", "--alpha", "1", "--rank", "2", "--out", (dir / "fit").string()});
  REQUIRE(r.status == 0);

  std::istringstream trace(slurp(dir / "fit" / "trace.csv"));
  std::string line;
  std::getline(trace, line);
  CHECK(line == "iteration,log_likelihood");
  std::vector<double> ll;
  while (std::getline(trace, line)) ll.push_back(std::stod(line.substr(line.find(',') + 1)));
  REQUIRE(ll.size() >= 2);
  for (std::size_t n = 1; n < ll.size(); ++n) CHECK(ll[n] >= ll[n - 1] - 1e-12);

  const catmc::Matrix X = catmc::read_matrix_file((dir / "fit" / "estimate.txt").string());
  CHECK(X.rows() == 12);
  CHECK(X.cols() == 10);
  CHECK(X.array().abs().maxCoeff() <= 1.0 + catmc::kBoxResidualTol);
  const auto diag = read_json(dir / "fit" / "diagnostics.json");
  CHECK(diag.contains("converged"));
  CHECK(diag["final_ll"].get<double>() == doctest::Approx(ll.back()).epsilon(1e-12));
}

TEST_CASE("solve rejects an empty observation file") {
  const auto dir = scratch("empty");
  std::ofstream(dir / "obs.tsv") << "# nothing here\n";
  const auto r = call({"solve", "--obs", (dir / "obs.tsv").string(), "--d1", "3", "--d2", "3", "--alpha", "1",
                       "--rank", "1", "--out", (dir / "out").string()});
  CHECK(r.status == 2);
  CHECK(r.err.find("no observations") != std::string::npos);
}

TEST_CASE("bounds scale as one over root m") {
  const auto dir = scratch("bounds");
  auto bounds_at = [&](const std::string& m) {
    const auto out = dir / ("m" + m);
    REQUIRE(call({"bounds", "--alpha", "1", "--rank", "3", "--d1", "100", "--d2", "100", "--m", m, "--out",
                  out.string()})
                .status == 0);
    return read_json(out / "bounds.json");
  };
  const auto a = bounds_at("2000");
  const auto b = bounds_at("8000");
  CHECK(a["upper_simple"].get<double>() / b["upper_simple"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(a["lower_rate"].get<double>() / b["lower_rate"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(call({"bounds", "--alpha", "1", "--rank", "3", "--d1", "100", "--d2", "100", "--m", "0", "--out",
              (dir / "zero").string()})
            .status == 2);
}

TEST_CASE("eval of exact predictions") {
  const auto dir = scratch("eval");
  std::ofstream(dir / "test.tsv") << "0\t0\t5\n0\t1\t3\n1\t1\t1\n";
  std::ofstream(dir / "pred.txt") << "5 3\n2 1\n";
  const auto r = call({"eval", "--test", (dir / "test.tsv").string(), "--pred", (dir / "pred.txt").string(),
                       "--out", (dir / "out").string()});
  REQUIRE(r.status == 0);
  CHECK(read_json(dir / "out" / "report.json")["overall"].get<double>() == 0.0);
  CHECK(r.out.find("Overall") != std::string::npos);

  SUBCASE("needs exactly one prediction source") {
    CHECK(call({"eval", "--test", (dir / "test.tsv").string(), "--out", (dir / "x").string()}).status == 2);
  }
}

TEST_CASE("sweep argument checks") {
  const auto dir = scratch("sweep");
  CHECK(call({"sweep", "--m", "10,20", "--replicates", "2", "--out", dir.string()}).status == 2);
  CHECK(call({"sweep", "--d1", "10", "--d2", "10", "--m", "50,200", "--out", dir.string()}).status == 2);
}

TEST_CASE("small sweep writes rows and a slope") {
  const auto dir = scratch("sweep_small");
  const auto r = call({"sweep", "--d1", "20", "--d2", "20", "--rank", "1", "--K", "3", "--m", "100,200,400",
                       "--replicates", "3", "--seed", "5", "--out", dir.string()});
  REQUIRE(r.status == 0);
  CHECK(count_lines(slurp(dir / "sweep.csv")) == 1 + 9);
  const auto summary = read_json(dir / "summary.json");
  REQUIRE(summary.size() == 1);
  CHECK(std::isfinite(summary[0]["slope"].get<double>()));
}

TEST_CASE("log-log slope") {
  CHECK(catmc::cli::log_log_slope({1, 10, 100}, {5, 0.5, 0.05}) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(catmc::cli::log_log_slope({2, 8}, {3, 1.5}) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("version, help and exit codes of the installed tool") {
  CHECK(call({"--version"}).status == 0);
  CHECK(call({"--help"}).status == 0);
  CHECK(call({}).status == 2);
  CHECK(call({"frobnicate"}).status == 2);
#ifdef CATMC_TOOL_PATH
  const std::string tool = CATMC_TOOL_PATH;
  auto exit_of = [](const std::string& cmd) {
    const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(exit_of(tool + " --version") == 0);
  CHECK(exit_of(tool + " solve --obs /nonexistent --alpha 1 --rank 1 --out /tmp/catmc_cli_none") == 2);
  CHECK(exit_of(tool) == 2);
#endif
}

TEST_CASE("rating protocol end to end on a synthetic u.data file") {
  const auto dir = scratch("movielens");
  const catmc::LinkFamily fam = catmc::MultinomialLogitFamily::evenly_spaced(5);
  const catmc::GroundTruth truth = catmc::synth_low_rank(40, 30, 2, 3.0, 11);
  const auto obs = catmc::sample_observations(fam, truth, catmc::sample_mask(40, 30, 900, 12),
                                              catmc::default_labels(5), 13);
  {
    std::ofstream f(dir / "u.data");
    catmc::write_observations_udata(f, obs);
  }
  const auto r = call({"eval", "--movielens", (dir / "u.data").string(), "--splits", "2", "--fit-count", "150",
                       "--test-count", "150", "--solve-count", "0", "--rank", "2", "--seed", "4", "--out",
                       (dir / "out").string()});
  REQUIRE(r.status == 0);
  const auto report = read_json(dir / "out" / "report.json");
  REQUIRE(report["splits"].size() == 2);
  for (const auto& s : report["splits"]) {
    const double cat = s["categorical"]["overall"].get<double>();
    const double base = s["baseline"]["overall"].get<double>();
    CHECK(cat >= 0.0);
    CHECK(cat <= 4.0);
    CHECK(base >= 0.0);
    CHECK(base <= 4.0);
  }
  CHECK(r.out.find("Real-valued") != std::string::npos);

  SUBCASE("more ratings requested than exist") {
    CHECK(call({"eval", "--movielens", (dir / "u.data").string(), "--fit-count", "5000", "--out",
                (dir / "big").string()})
              .status == 2);
  }
}
