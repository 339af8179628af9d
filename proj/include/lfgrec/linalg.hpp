// Copyright 2026 The lfgrec Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LFGREC_LINALG_HPP_
#define LFGREC_LINALG_HPP_

#include <cstdint>

#include "lfgrec/dataset.hpp"
#include "lfgrec/types.hpp"

namespace lfgrec {

// Dense products with explicit dimension checks (ShapeError on mismatch).
Matrix MatMul(const Matrix& a, const Matrix& b);
Matrix Transpose(const Matrix& a);
// y += alpha * x
void Axpy(double alpha, const Matrix& x, Matrix& y);

// Dense m x n matrix holding H - mu at observed positions and 0 elsewhere.
Matrix FillAndCenter(const RatingMatrix& ratings, double mu);

// Rank-k decomposition A ~= U diag(S) Vt with S sorted descending.
struct TruncatedSvd {
  Matrix u;   // m x k, orthonormal columns
  Vector s;   // k
  Matrix vt;  // k x n, orthonormal rows
  int rank() const { return static_cast<int>(s.size()); }
};

struct SvdOptions {
  int oversample = 10;
  int power_iterations = 2;
};

// Randomized range finder (Gaussian sketch + power iterations with
// re-orthonormalization) followed by an exact SVD of the small projected
// matrix. Exact whenever k + oversample >= min(m, n).
// Throws RangeError unless 0 <= k <= min(m, n).
TruncatedSvd ComputeTruncatedSvd(const Matrix& a, int k, std::uint64_t seed,
                                 const SvdOptions& options = {});

// Frobenius norm of A - U diag(S) Vt.
double Residual(const Matrix& a, const TruncatedSvd& svd);

// User factors P = U diag(sqrt S) and item factors Q = diag(sqrt S) Vt.
struct FactorSplit {
  Matrix user_factors;  // m x k
  Matrix item_factors;  // k x n
};

FactorSplit SplitFactors(const TruncatedSvd& svd);

}  // namespace lfgrec

#endif  // LFGREC_LINALG_HPP_
