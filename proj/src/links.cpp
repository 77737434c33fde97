#include "catmc/links.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catmc/error.hpp"

namespace catmc {

namespace {

void require_finite(double x) {
  if (!std::isfinite(x)) throw InvalidInput("link input must be finite");
}

}  // namespace

MultinomialLogitFamily::MultinomialLogitFamily(std::vector<double> alphas,
                                               std::vector<double> betas)
    : alphas_(std::move(alphas)), betas_(std::move(betas)) {
  if (alphas_.size() < 2) throw InvalidInput("logit family needs K >= 2 categories");
  if (alphas_.size() != betas_.size())
    throw InvalidInput("logit family: alphas and betas differ in length");
  for (std::size_t k = 0; k < alphas_.size(); ++k) {
    if (!std::isfinite(alphas_[k]) || !std::isfinite(betas_[k]))
      throw InvalidInput("logit family parameters must be finite");
  }
  const double a_ref = alphas_.back();
  const double b_ref = betas_.back();
  for (auto& a : alphas_) a -= a_ref;
  for (auto& b : betas_) b -= b_ref;
}

MultinomialLogitFamily MultinomialLogitFamily::uniform(int K) {
  if (K < 2) throw InvalidInput("logit family needs K >= 2 categories");
  return {std::vector<double>(K, 0.0), std::vector<double>(K, 0.0)};
}

MultinomialLogitFamily MultinomialLogitFamily::evenly_spaced(int K) {
  if (K < 2) throw InvalidInput("logit family needs K >= 2 categories");
  std::vector<double> betas(K);
  for (int k = 0; k < K; ++k) betas[k] = -1.0 + 2.0 * k / (K - 1);
  return {std::vector<double>(K, 0.0), std::move(betas)};
}

bool MultinomialLogitFamily::is_constant() const {
  return std::all_of(betas_.begin(), betas_.end(), [&](double b) { return b == betas_.front(); });
}

Vector MultinomialLogitFamily::probs(double x) const {
  require_finite(x);
  const int n = K();
  Vector eta(n);
  for (int k = 0; k < n; ++k) eta[k] = alphas_[k] + betas_[k] * x;
  eta.array() -= eta.maxCoeff();
  Vector p = eta.array().exp();
  p /= p.sum();
  return p;
}

Vector MultinomialLogitFamily::derivs(double x) const {
  const Vector p = probs(x);
  const Eigen::Map<const Vector> beta(betas_.data(), K());
  const double mean_beta = p.dot(beta);
  return p.array() * (beta.array() - mean_beta);
}

double MultinomialLogitFamily::log_prob(int k, double x) const {
  require_finite(x);
  const int n = K();
  double eta_max = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) eta_max = std::max(eta_max, alphas_[j] + betas_[j] * x);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) sum += std::exp(alphas_[j] + betas_[j] * x - eta_max);
  return alphas_[k] + betas_[k] * x - eta_max - std::log(sum);
}

double MultinomialLogitFamily::score(int k, double x) const {
  const Vector p = probs(x);
  const Eigen::Map<const Vector> beta(betas_.data(), K());
  return betas_[k] - p.dot(beta);
}

TabularLinkFamily::TabularLinkFamily(Matrix table) : table_(std::move(table)) {
  if (table_.rows() < 2 || table_.rows() != table_.cols())
    throw InvalidInput("tabular family needs a square K x K table with K >= 2");
  for (Eigen::Index x = 0; x < table_.rows(); ++x) {
    const auto row = table_.row(x);
    if (!row.allFinite() || row.minCoeff() < 0.0 || row.maxCoeff() > 1.0)
      throw InvalidInput("tabular family entries must lie in [0, 1]");
    if (std::abs(row.sum() - 1.0) > 1e-12)
      throw InvalidInput("tabular family row " + std::to_string(x + 1) + " does not sum to 1");
  }
}

TabularLinkFamily TabularLinkFamily::mood(int K) {
  if (K < 2) throw InvalidInput("mood family needs K >= 2");
  Matrix t = Matrix::Zero(K, K);
  for (int x = 0; x < K; ++x) {
    t(x, x) += 0.6;
    t(x, std::max(x - 1, 0)) += 0.2;
    t(x, std::min(x + 1, K - 1)) += 0.2;
  }
  return TabularLinkFamily(std::move(t));
}

Vector TabularLinkFamily::probs(double x) const {
  require_finite(x);
  const double r = std::round(x);
  if (r != x || r < 1.0 || r > K())
    throw InvalidInput("tabular family is defined only on the integers 1.." + std::to_string(K()));
  return table_.row(static_cast<Eigen::Index>(r) - 1).transpose();
}

int category_count(const LinkFamily& family) {
  return std::visit([](const auto& f) { return f.K(); }, family);
}

Vector eval_probs(const LinkFamily& family, double x) {
  return std::visit([x](const auto& f) { return f.probs(x); }, family);
}

const MultinomialLogitFamily& require_logit(const LinkFamily& family) {
  if (const auto* logit = std::get_if<MultinomialLogitFamily>(&family)) return *logit;
  throw Unsupported("tabular link family has no derivatives");
}

Vector eval_derivs(const LinkFamily& family, double x) { return require_logit(family).derivs(x); }

namespace {

// Fills scores with f_k'(x) / f_k(x) and returns max_k f_k'(x)^2 / f_k(x),
// written as f_k * score_k^2 so that an underflowed f_k contributes 0.
double curvature_and_scores(const MultinomialLogitFamily& family, double x, Vector& scores) {
  const Vector p = family.probs(x);
  const Eigen::Map<const Vector> beta(family.betas().data(), family.K());
  scores = beta.array() - p.dot(beta);
  return (p.array() * scores.array().square()).maxCoeff();
}

}  // namespace

double curvature_at(const MultinomialLogitFamily& family, double x) {
  Vector scores;
  return curvature_and_scores(family, x, scores);
}

SmoothnessReport smoothness_constants(const MultinomialLogitFamily& family, double alpha,
                                      int grid_size) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("alpha must be positive");
  if (grid_size < kMinSmoothnessGrid)
    throw InvalidInput("smoothness grid needs at least " + std::to_string(kMinSmoothnessGrid) +
                       " points");
  SmoothnessReport report;
  report.alpha = alpha;
  report.grid_size = grid_size;
  report.beta_minus = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_size; ++i) {
    const double x = (i == grid_size - 1) ? alpha : -alpha + 2.0 * alpha * i / (grid_size - 1);
    Vector scores;
    const double curvature = curvature_and_scores(family, x, scores);
    report.L_alpha = std::max(report.L_alpha, scores.cwiseAbs().maxCoeff());
    report.beta_minus = std::min(report.beta_minus, curvature);
    report.beta_plus = std::max(report.beta_plus, curvature);
  }
  if (report.beta_minus < 1e-12)
    throw DegenerateFamily("link family is flat somewhere on [-alpha, alpha] (beta_minus = " +
                           std::to_string(report.beta_minus) + ")");
  return report;
}

nlohmann::json to_json(const LinkFamily& family) {
  nlohmann::json doc;
  if (const auto* logit = std::get_if<MultinomialLogitFamily>(&family)) {
    doc["kind"] = "logit";
    doc["K"] = logit->K();
    doc["alphas"] = logit->alphas();
    doc["betas"] = logit->betas();
  } else {
    const auto& tab = std::get<TabularLinkFamily>(family);
    doc["kind"] = "tabular";
    doc["K"] = tab.K();
    auto rows = nlohmann::json::array();
    for (Eigen::Index x = 0; x < tab.table().rows(); ++x) {
      std::vector<double> row(tab.table().cols());
      for (Eigen::Index k = 0; k < tab.table().cols(); ++k) row[k] = tab.table()(x, k);
      rows.push_back(row);
    }
    doc["table"] = rows;
  }
  return doc;
}

LinkFamily link_family_from_json(const nlohmann::json& doc) {
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    const int K = doc.at("K").get<int>();
    if (kind == "logit") {
      auto alphas = doc.at("alphas").get<std::vector<double>>();
      auto betas = doc.at("betas").get<std::vector<double>>();
      if (static_cast<int>(alphas.size()) != K || static_cast<int>(betas.size()) != K)
        throw InvalidInput("logit family JSON: K does not match parameter lengths");
      return MultinomialLogitFamily(std::move(alphas), std::move(betas));
    }
    if (kind == "tabular") {
      const auto rows = doc.at("table").get<std::vector<std::vector<double>>>();
      if (static_cast<int>(rows.size()) != K)
        throw InvalidInput("tabular family JSON: K does not match table size");
      Matrix t(K, K);
      for (int x = 0; x < K; ++x) {
        if (static_cast<int>(rows[x].size()) != K)
          throw InvalidInput("tabular family JSON: table is not K x K");
        for (int k = 0; k < K; ++k) t(x, k) = rows[x][k];
      }
      return TabularLinkFamily(std::move(t));
    }
    throw InvalidInput("unknown link family kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed link family JSON: ") + e.what());
  }
}

}  // namespace catmc
