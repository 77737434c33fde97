#pragma once

#include "catmc/types.hpp"

namespace catmc {

// X = U diag(s) V^T with U d1 x n, V d2 x n, n = min(d1, d2), s descending.
struct ThinSvd {
  Matrix U;
  Vector s;
  Matrix V;
};

// Divide-and-conquer SVD. Throws NumericError on non-finite input or failure.
ThinSvd thin_svd(const Matrix& X);
Vector singular_values(const Matrix& X);

}  // namespace catmc
