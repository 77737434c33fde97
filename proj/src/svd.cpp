#include "catmc/svd.hpp"

#include <string>

#include "catmc/error.hpp"

namespace catmc {

namespace {

Eigen::BDCSVD<Matrix> checked_svd(const Matrix& X, unsigned int options) {
  if (!X.allFinite()) throw NumericError("SVD input has non-finite entries");
  Eigen::BDCSVD<Matrix> svd(X, options);
  if (svd.info() != Eigen::Success)
    throw NumericError("SVD of a " + std::to_string(X.rows()) + " x " + std::to_string(X.cols()) +
                       " matrix failed");
  return svd;
}

}  // namespace

ThinSvd thin_svd(const Matrix& X) {
  if (X.size() == 0) return {};
  const auto svd = checked_svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

Vector singular_values(const Matrix& X) {
  if (X.size() == 0) return {};
  return checked_svd(X, 0).singularValues();
}

}  // namespace catmc
