// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Small dense complex linear algebra shared by every module.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "ncmac/errors.hpp"

namespace ncmac {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// I + x xᴴ for a T×m matrix x.
inline CMatrix covariance_of(const CMatrix &x) {
  CMatrix a = x * x.adjoint();
  a.diagonal().array() += 1.0;
  return a;
}

/// Cholesky factor of a Hermitian positive-definite matrix.
inline Eigen::LLT<CMatrix> hpd_factor(const CMatrix &a) {
  Eigen::LLT<CMatrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw LinAlgError("matrix is not Hermitian positive definite");
  return llt;
}

/// log det of the matrix whose Cholesky factorization is given.
inline double log_det(const Eigen::LLT<CMatrix> &llt) {
  const auto &l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    s += std::log(l(i, i).real());
  return 2.0 * s;
}

/// ‖L⁻¹ b‖²_F = tr(bᴴ A⁻¹ b) with A = L Lᴴ.
inline double resolvent_quadratic(const Eigen::LLT<CMatrix> &llt,
                                  const CMatrix &b) {
  CMatrix w = llt.matrixL().solve(b);
  return w.squaredNorm();
}

inline CMatrix hermitian_part(const CMatrix &a) {
  return 0.5 * (a + a.adjoint());
}

/// A^p for Hermitian positive-definite A, by eigendecomposition.
inline CMatrix hermitian_power(const CMatrix &a, double p) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(a));
  if (es.info() != Eigen::Success)
    throw LinAlgError("eigendecomposition failed");
  const RVector &ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw LinAlgError("matrix is not positive definite");
  RVector scaled = ev.array().pow(p);
  return es.eigenvectors() * scaled.asDiagonal() *
         es.eigenvectors().adjoint();
}

/// Orthonormal basis of span(a) with the R-diagonal made real positive, so the
/// result is a deterministic function of `a`.
inline CMatrix orthonormal_factor(const CMatrix &a) {
  Eigen::HouseholderQR<CMatrix> qr(a);
  CMatrix q = qr.householderQ() * CMatrix::Identity(a.rows(), a.cols());
  const CMatrix &r = qr.matrixQR();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const cd d = r(j, j);
    const double mag = std::abs(d);
    if (mag == 0.0)
      throw LinAlgError("rank-deficient matrix in orthonormalization");
    q.col(j) *= d / mag;
  }
  return q;
}

/// i.i.d. circularly-symmetric CN(0, 1) matrix.
template <class Rng>
CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, Rng &rng) {
  std::normal_distribution<double> n01(0.0, std::numbers::sqrt2 / 2.0);
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double re = n01(rng);
      const double im = n01(rng);
      m(i, j) = cd(re, im);
    }
  return m;
}

} // namespace ncmac
