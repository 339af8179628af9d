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

#include "lfgrec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

namespace lfgrec {
namespace {

// Orthonormal basis of the column space of y (thin Householder Q).
Matrix OrthonormalColumns(const Matrix& y) {
  Eigen::HouseholderQR<Matrix> qr(y);
  return qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
}

}  // namespace

Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError(fmt::format("matmul: {}x{} times {}x{}", a.rows(), a.cols(), b.rows(),
                                 b.cols()));
  }
  return a * b;
}

Matrix Transpose(const Matrix& a) { return a.transpose(); }

void Axpy(double alpha, const Matrix& x, Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw ShapeError(fmt::format("axpy: {}x{} vs {}x{}", x.rows(), x.cols(), y.rows(),
                                 y.cols()));
  }
  y.noalias() += alpha * x;
}

Matrix FillAndCenter(const RatingMatrix& ratings, double mu) {
  Matrix dense = Matrix::Zero(ratings.num_users(), ratings.num_items());
  for (const RatingEntry& e : ratings.entries()) dense(e.user, e.item) = e.rating - mu;
  return dense;
}

TruncatedSvd ComputeTruncatedSvd(const Matrix& a, int k, std::uint64_t seed,
                                 const SvdOptions& options) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  const Eigen::Index max_rank = std::min(m, n);
  if (k < 0 || k > max_rank) {
    throw RangeError(fmt::format("svd rank {} outside [0, {}]", k, max_rank));
  }
  TruncatedSvd out;
  if (k == 0) {
    out.u = Matrix::Zero(m, 0);
    out.s = Vector::Zero(0);
    out.vt = Matrix::Zero(0, n);
    return out;
  }
  const Eigen::Index sketch = std::min<Eigen::Index>(k + options.oversample, max_rank);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix omega(n, sketch);
  for (Eigen::Index i = 0; i < omega.size(); ++i) omega.data()[i] = normal(rng);

  Matrix q = OrthonormalColumns(a * omega);
  for (int it = 0; it < options.power_iterations; ++it) {
    const Matrix z = OrthonormalColumns(a.transpose() * q);
    q = OrthonormalColumns(a * z);
  }

  // B = Q^T A is sketch x n; its SVD lifts back through Q.
  const Matrix b = q.transpose() * a;
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.s = svd.singularValues().head(k);
  out.u = q * svd.matrixU().leftCols(k);
  out.vt = svd.matrixV().leftCols(k).transpose();

  // Fix the sign of each singular pair so the largest |U| entry is positive.
  for (int c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    out.u.col(c).cwiseAbs().maxCoeff(&arg);
    if (out.u(arg, c) < 0.0) {
      out.u.col(c) *= -1.0;
      out.vt.row(c) *= -1.0;
    }
  }
  return out;
}

double Residual(const Matrix& a, const TruncatedSvd& svd) {
  return (a - svd.u * svd.s.asDiagonal() * svd.vt).norm();
}

FactorSplit SplitFactors(const TruncatedSvd& svd) {
  if ((svd.s.array() < 0.0).any()) throw RangeError("negative singular value");
  const Vector root = svd.s.cwiseSqrt();
  return {svd.u * root.asDiagonal(), root.asDiagonal() * svd.vt};
}

}  // namespace lfgrec
