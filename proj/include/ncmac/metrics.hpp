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

/**
 * @file metrics.hpp
 * @brief Closed-form detection metrics for non-coherent joint constellations.
 *
 * Under hypothesis x the received block Y (T×N) has i.i.d. columns
 * CN(0, I + x xᴴ). The pairwise log-likelihood ratio L(x→x') is a shifted
 * weighted sum of Gamma(N, 1) variables whose weights are the eigenvalues of
 *
 *   Λ = (I + x xᴴ)^{1/2} (I + x' x'ᴴ)^{-1} (I + x xᴴ)^{1/2} − I,
 *
 * giving E[L] = N(tr Λ − log det(I + Λ)) and Var[L] = N tr Λ². The high-SNR
 * dominant term of E[L] is d(x→x') = tr((I + x' x'ᴴ)^{-1} x xᴴ).
 *
 * All resolvents go through a Cholesky factorization of I + x xᴴ.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncmac/constellation.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"

namespace ncmac {

/// Per-pair detection statistics. mean/var in nats.
struct PairStats {
  double mean_pllr = 0.0;
  double var_pllr = 0.0;
  double d_value = 0.0;
  double cantelli = 1.0;
  std::vector<double> lambda_eigs;
};

/// Worst-case design metrics of a joint codebook.
struct MetricReport {
  double d_min = 0.0;
  double d12 = 0.0;
  double d21 = 0.0;
  /// (1/N)·min E[L]; the normalized quantity does not depend on N.
  double min_mean_pllr = 0.0;
  /// max{intra-1, intra-2, cross} of ‖x'ᴴx‖²_F / (PT)².
  double max_cross_corr = 0.0;
  std::pair<std::size_t, std::size_t> worst_pair{0, 0};
};

inline void to_json(nlohmann::json &j, const MetricReport &r) {
  j = nlohmann::json{{"d_min", r.d_min},
                     {"d12", r.d12},
                     {"d21", r.d21},
                     {"min_mean_pllr", r.min_mean_pllr},
                     {"max_cross_corr", r.max_cross_corr},
                     {"worst_pair", {r.worst_pair.first, r.worst_pair.second}}};
}

/// Cantelli (one-sided Chebyshev) bound on P(L ≤ 0); 1 when the mean is 0.
inline double cantelli_bound(double mean, double var) {
  if (mean <= 0.0)
    return 1.0;
  return var / (var + mean * mean);
}

/// log p(Y | x) for the block-fading Rayleigh channel.
inline double log_likelihood(const CMatrix &Y, const CMatrix &x) {
  if (Y.rows() != x.rows())
    throw DimensionError("Y and x must have the same number of rows");
  const double T = static_cast<double>(Y.rows());
  const double N = static_cast<double>(Y.cols());
  const auto llt = hpd_factor(covariance_of(x));
  return -resolvent_quadratic(llt, Y) - N * log_det(llt) -
         N * T * std::log(std::numbers::pi);
}

/// L(x→x') = N log(det A'/det A) − tr((A⁻¹ − A'⁻¹) Y Yᴴ).
inline double pllr(const CMatrix &Y, const CMatrix &x, const CMatrix &xp) {
  if (Y.rows() != x.rows() || x.rows() != xp.rows())
    throw DimensionError("Y, x and x' must have the same number of rows");
  const double N = static_cast<double>(Y.cols());
  const auto a = hpd_factor(covariance_of(x));
  const auto ap = hpd_factor(covariance_of(xp));
  return N * (log_det(ap) - log_det(a)) - resolvent_quadratic(a, Y) +
         resolvent_quadratic(ap, Y);
}

/// E[L(x→x')] from determinants and traces, without Λ.
inline double mean_pllr_direct(const CMatrix &x, const CMatrix &xp, int N) {
  const auto a = hpd_factor(covariance_of(x));
  const auto ap = hpd_factor(covariance_of(xp));
  const auto T = x.rows();
  const double tr_inv =
      resolvent_quadratic(ap, CMatrix::Identity(T, T));
  const double d = resolvent_quadratic(ap, x);
  return N * (log_det(ap) - log_det(a) - static_cast<double>(T) + tr_inv + d);
}

/// Var[L(x→x')] = N‖L'⁻¹ A L'⁻ᴴ − I‖²_F, a congruence of Λ.
inline double var_pllr_direct(const CMatrix &x, const CMatrix &xp, int N) {
  const auto ap = hpd_factor(covariance_of(xp));
  CMatrix lam = ap.matrixL().solve(covariance_of(x));
  lam = ap.matrixL().solve(lam.adjoint().eval()).adjoint();
  lam.diagonal().array() -= 1.0;
  return N * lam.squaredNorm();
}

/// Closed-form PLLR statistics of the ordered pair (x, x').
inline PairStats pair_stats(const CMatrix &x, const CMatrix &xp, int N) {
  if (x.rows() != xp.rows())
    throw DimensionError("x and x' must have the same number of rows");
  if (N < 1)
    throw DomainError("N must be at least 1");
  const auto T = x.rows();
  PairStats s;
  const auto ap = hpd_factor(covariance_of(xp));
  s.d_value = resolvent_quadratic(ap, x);
  if (x == xp) {
    s.lambda_eigs.assign(static_cast<std::size_t>(T), 0.0);
    return s;
  }
  const CMatrix root = hermitian_power(covariance_of(x), 0.5);
  CMatrix lam = root * ap.solve(root);
  lam = hermitian_part(lam);
  lam.diagonal().array() -= 1.0;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(lam, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success)
    throw LinAlgError("eigendecomposition of Λ failed");
  double m = 0.0;
  double v = 0.0;
  for (Eigen::Index i = 0; i < T; ++i) {
    const double l = es.eigenvalues()(i);
    s.lambda_eigs.push_back(l);
    // each term t − log(1+t) is non-negative
    m += std::max(0.0, l - std::log1p(l));
    v += l * l;
  }
  s.mean_pllr = N * m;
  s.var_pllr = N * v;
  s.cantelli = cantelli_bound(s.mean_pllr, s.var_pllr);
  return s;
}

/// Lower and upper union bounds on the joint error probability from a
/// matrix of pairwise error probabilities.
inline std::pair<double, double> union_bounds(const Eigen::MatrixXd &pep) {
  if (pep.rows() == 0 || pep.rows() != pep.cols())
    throw SizeError("pep must be a non-empty square matrix");
  const auto n = pep.rows();
  double worst = 0.0;
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      if (a == b)
        continue;
      const double p = pep(a, b);
      if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("pairwise error probabilities must lie in [0, 1]");
      worst = std::max(worst, p);
    }
  const double size = static_cast<double>(n);
  return {worst / size, std::min(1.0, (size - 1.0) * worst)};
}

namespace detail {

/// Cholesky factors and scalar invariants of I + x xᴴ for every joint symbol.
struct ResolventTable {
  std::vector<Eigen::LLT<CMatrix>> llt;
  std::vector<double> logdet;
  std::vector<double> trace_inv;

  explicit ResolventTable(const std::vector<CMatrix> &xs) {
    llt.reserve(xs.size());
    for (const auto &x : xs) {
      llt.push_back(hpd_factor(covariance_of(x)));
      logdet.push_back(log_det(llt.back()));
      const auto T = x.rows();
      trace_inv.push_back(
          resolvent_quadratic(llt.back(), CMatrix::Identity(T, T)));
    }
  }
};

inline double d_value(const ResolventTable &tab, std::size_t to,
                      const CMatrix &x) {
  return resolvent_quadratic(tab.llt[to], x);
}

} // namespace detail

/// Minimum d-value over ordered pairs of distinct joint symbols.
struct DminResult {
  double value = std::numeric_limits<double>::infinity();
  std::pair<std::size_t, std::size_t> worst_pair{0, 0};
};

inline DminResult d_min(const JointCodebook &joint) {
  if (joint.size() < 2)
    throw SizeError("d_min needs at least two joint symbols");
  const auto &xs = joint.symbols();
  const detail::ResolventTable tab(xs);
  DminResult r;
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t b = 0; b < xs.size(); ++b) {
      if (a == b)
        continue;
      const double d = detail::d_value(tab, b, xs[a]);
      if (d < r.value) {
        r.value = d;
        r.worst_pair = {a, b};
      }
    }
  return r;
}

/// (1/N)·min over ordered pairs of E[L(x→x')].
inline double min_mean_pllr(const JointCodebook &joint) {
  if (joint.size() < 2)
    throw SizeError("min_mean_pllr needs at least two joint symbols");
  const auto &xs = joint.symbols();
  const detail::ResolventTable tab(xs);
  const double T = joint.T();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t b = 0; b < xs.size(); ++b) {
      if (a == b)
        continue;
      const double m = tab.logdet[b] - tab.logdet[a] - T + tab.trace_inv[b] +
                       detail::d_value(tab, b, xs[a]);
      best = std::min(best, m);
    }
  return best;
}

/// Largest Cantelli bound over ordered pairs of distinct joint symbols.
inline double worst_cantelli(const JointCodebook &joint, int N) {
  if (joint.size() < 2)
    throw SizeError("worst_cantelli needs at least two joint symbols");
  const auto &xs = joint.symbols();
  const detail::ResolventTable tab(xs);
  const auto T = joint.T();
  std::vector<CMatrix> inv_gram;
  for (std::size_t b = 0; b < xs.size(); ++b) {
    CMatrix li = tab.llt[b].matrixL().solve(CMatrix::Identity(T, T));
    inv_gram.emplace_back(li * li.adjoint());
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t b = 0; b < xs.size(); ++b) {
      if (a == b)
        continue;
      const CMatrix e = tab.llt[b].matrixL().solve(xs[a]);
      CMatrix lam = inv_gram[b] + e * e.adjoint();
      lam.diagonal().array() -= 1.0;
      const double mean =
          N * std::max(0.0, tab.logdet[b] - tab.logdet[a] -
                                static_cast<double>(T) + tab.trace_inv[b] +
                                e.squaredNorm());
      const double var = N * lam.squaredNorm();
      worst = std::max(worst, cantelli_bound(mean, var));
    }
  return worst;
}

namespace detail {

// min over (i ≠ j in `own`, l in `other`) of tr(x_iᴴ (I + x_j x_jᴴ + y_l y_lᴴ)⁻¹ x_i)
inline double one_sided_min(const Codebook &own, const Codebook &other) {
  if (own.size() < 2)
    throw SizeError("one-sided d-metric needs at least two symbols");
  const auto T = own.T();
  double best = std::numeric_limits<double>::infinity();
  CMatrix xp(T, own.M() + other.M());
  for (std::size_t j = 0; j < own.size(); ++j)
    for (std::size_t l = 0; l < other.size(); ++l) {
      xp << own[j], other[l];
      const auto llt = hpd_factor(covariance_of(xp));
      for (std::size_t i = 0; i < own.size(); ++i) {
        if (i == j)
          continue;
        best = std::min(best, resolvent_quadratic(llt, own[i]));
      }
    }
  return best;
}

} // namespace detail

/// min over x1 ≠ x1' ∈ X1, x2 ∈ X2 of tr(x1ᴴ(I + x1'x1'ᴴ + x2x2ᴴ)⁻¹x1).
inline double d12(const JointCodebook &joint) {
  return detail::one_sided_min(joint.user1(), joint.user2());
}

/// min over x2 ≠ x2' ∈ X2, x1 ∈ X1 of tr(x2ᴴ(I + x1x1ᴴ + x2'x2'ᴴ)⁻¹x2).
inline double d21(const JointCodebook &joint) {
  return detail::one_sided_min(joint.user2(), joint.user1());
}

/// Largest squared cross-correlation ‖x'ᴴx‖²_F over intra-user-1,
/// intra-user-2 and cross-user pairs, normalized by (PT)².
inline double chordal_objective(const JointCodebook &joint) {
  const auto &u1 = joint.user1();
  const auto &u2 = joint.user2();
  const double P = std::max(u1.power(), u2.power());
  const double pt = P * joint.T();
  double worst = 0.0;
  auto scan = [&worst](const Codebook &a, const Codebook &b, bool same) {
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = same ? i + 1 : 0; j < b.size(); ++j)
        worst = std::max(worst, (b[j].adjoint() * a[i]).squaredNorm());
  };
  scan(u1, u1, true);
  scan(u2, u2, true);
  scan(u1, u2, false);
  return worst / (pt * pt);
}

/// Guaranteed lower bound on min{d12, d21} when every pair of the joint
/// Grassmannian codebook has normalized cross-correlation at most c.
inline double sufficient_bound(double c, double P, int T, int M) {
  if (M < 1 || T < 1 || !(P > 0.0))
    throw DomainError("sufficient_bound requires P > 0, T ≥ 1, M ≥ 1");
  const double cmax = 1.0 / M;
  if (!(c >= 0.0 && c <= cmax))
    throw DomainError("c must lie in [0, 1/M]");
  const double pt = P * T;
  return pt * (1.0 - 2.0 * c / (1.0 / pt + 1.0 / M - std::sqrt(c)));
}

/// Largest c for which the sufficient bound still grows linearly in P.
inline double c_limit(double P, int T, int M) {
  if (M < 1 || T < 1 || !(P > 0.0))
    throw DomainError("c_limit requires P > 0, T ≥ 1, M ≥ 1");
  const double r = std::sqrt(1.0 / (2.0 * P * T) + 1.0 / (2.0 * M) + 1.0 / 16.0) - 0.25;
  return r * r;
}

/// α_{P,T,M} = (1/(PT) + 1/M)⁻¹.
inline double alpha_ptm(double P, int T, int M) {
  return 1.0 / (1.0 / (P * T) + 1.0 / M);
}

/// d(x→x') for single-user Grassmannian symbols, via the cross-correlation.
inline double single_user_d(const CMatrix &x, const CMatrix &xp, double P,
                            int T, int M) {
  if (x.rows() != T || xp.rows() != T || x.cols() != M || xp.cols() != M)
    throw DimensionError("symbols must be T×M");
  if (grassmann_defect(x, P) > kGrassmannValidateTol ||
      grassmann_defect(xp, P) > kGrassmannValidateTol)
    throw InvariantError("single_user_d requires Grassmannian symbols");
  const double pt = P * T;
  const double corr = (xp.adjoint() * x).squaredNorm();
  return pt * (1.0 - alpha_ptm(P, T, M) * corr / (pt * pt));
}

/// Full worst-case report of a joint codebook.
inline MetricReport metric_report(const JointCodebook &joint) {
  MetricReport r;
  const auto dm = d_min(joint);
  r.d_min = dm.value;
  r.worst_pair = dm.worst_pair;
  r.d12 = joint.user1().size() >= 2 ? d12(joint)
                                    : std::numeric_limits<double>::infinity();
  r.d21 = joint.user2().size() >= 2 ? d21(joint)
                                    : std::numeric_limits<double>::infinity();
  r.min_mean_pllr = min_mean_pllr(joint);
  r.max_cross_corr = chordal_objective(joint);
  return r;
}

} // namespace ncmac
