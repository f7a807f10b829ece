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
 * @file optimizer.hpp
 * @brief Riemannian gradient descent for joint constellation design.
 *
 * The variable is a T×K matrix C whose symbol blocks (one per constellation
 * point, M_k columns each) are orthonormal; with M = 1 this is the oblique
 * manifold of unit-norm columns. A symbol of user k is √(P_k T / M_k)·U.
 *
 * Every criterion is a max-min problem max_C min_{pairs} f. It is replaced by
 * the log-sum-exp surrogate
 *
 *   g(C) = ε log Σ_pairs exp(−f / ε),   −min f ≤ g ≤ −min f + ε log #pairs,
 *
 * which is minimized by Armijo-backtracking gradient descent with
 * column-wise projection and renormalizing retraction.
 *
 * Pair terms are evaluated from the Gram matrix G = XᴴX of the scaled
 * columns. With x, x' the two joint symbols, S = xᴴx, S' = x'ᴴx',
 * W = x'ᴴx and K = (I + S')⁻¹W, the Woodbury identity gives
 *
 *   d(x→x') = tr S − tr(Wᴴ K),
 *   ∂d/∂x*  = x − x'K,          ∂d/∂x'* = −x Kᴴ + x' K Kᴴ,
 *
 * so every pair term and its gradient only involve (M1+M2)-sized blocks.
 * Gradients returned to callers are real gradients ∂/∂Re + i·∂/∂Im, i.e.
 * twice the conjugate Wirtinger derivative.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ncmac/constellation.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"

namespace ncmac {

enum class Criterion { MeanPllr, Dmin, AltD12, AltD21, Chordal };

inline Criterion parse_criterion(std::string_view s) {
  if (s == "mean-pllr")
    return Criterion::MeanPllr;
  if (s == "dmin")
    return Criterion::Dmin;
  if (s == "alt-d12")
    return Criterion::AltD12;
  if (s == "alt-d21")
    return Criterion::AltD21;
  if (s == "chordal")
    return Criterion::Chordal;
  throw ConfigError("unknown criterion: " + std::string(s));
}

inline std::string_view to_string(Criterion c) {
  switch (c) {
  case Criterion::MeanPllr:
    return "mean-pllr";
  case Criterion::Dmin:
    return "dmin";
  case Criterion::AltD12:
    return "alt-d12";
  case Criterion::AltD21:
    return "alt-d21";
  case Criterion::Chordal:
    return "chordal";
  }
  return "?";
}

struct OptimizerConfig {
  Criterion criterion = Criterion::Dmin;
  /// Log-sum-exp smoothing, in units of the criterion's pair metric.
  double epsilon = 0.1;
  /// Linear SNR used for both users while designing; ≤ 0 keeps the
  /// SystemConfig powers.
  double design_snr = 1000.0;
  int max_iters = 500;
  /// Length of the first trial step along the normalized descent direction.
  double step_init = 1e-2;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double grad_tol = 1e-10;
  std::uint64_t seed = 0;
  /// Halve ε every max_iters/4 iterations.
  bool anneal = false;

  void validate() const {
    if (!(epsilon > 0.0))
      throw ConfigError("epsilon must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0))
      throw ConfigError("armijo_c must lie in (0, 1)");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0))
      throw ConfigError("armijo_shrink must lie in (0, 1)");
    if (max_iters < 0)
      throw ConfigError("max_iters must be non-negative");
    if (!(step_init > 0.0))
      throw ConfigError("step_init must be positive");
  }
};

/// Tolerance on block orthonormality of an ObliquePoint.
inline constexpr double kObliqueTol = 1e-12;

/// Optimization variable: K1 symbols of user 1 then K2 symbols of user 2,
/// each an orthonormal T×M_k block of columns.
class ObliquePoint {
public:
  ObliquePoint(CMatrix C, int K1, int K2, int M1 = 1, int M2 = 1)
      : C_(std::move(C)), K1_(K1), K2_(K2), M1_(M1), M2_(M2) {
    if (K1 < 0 || K2 < 0 || K1 + K2 < 1 || M1 < 1 || M2 < 1)
      throw DimensionError("invalid oblique split");
    if (C_.cols() != K1 * M1 + K2 * M2)
      throw DimensionError("column count must equal K1·M1 + K2·M2");
    if (C_.rows() < std::max(M1, M2))
      throw DimensionError("T must be at least the block width");
    for (int s = 0; s < symbols(); ++s) {
      CMatrix g = block(s).adjoint() * block(s);
      g.diagonal().array() -= 1.0;
      if (g.norm() > kObliqueTol)
        throw InvariantError("symbol block is not orthonormal");
    }
  }

  /// i.i.d. Gaussian draws, orthonormalized per block.
  static ObliquePoint random(int T, int K1, int K2, std::uint64_t seed,
                             int M1 = 1, int M2 = 1) {
    std::mt19937_64 rng(seed);
    CMatrix C(T, K1 * M1 + K2 * M2);
    for (int s = 0; s < K1 + K2; ++s) {
      const int m = s < K1 ? M1 : M2;
      const int first = s < K1 ? s * M1 : K1 * M1 + (s - K1) * M2;
      C.middleCols(first, m) = orthonormal_factor(complex_gaussian(T, m, rng));
    }
    return {std::move(C), K1, K2, M1, M2};
  }

  /// Directions of a joint codebook (each symbol orthonormalized).
  static ObliquePoint from_joint(const JointCodebook &joint) {
    const auto &u1 = joint.user1();
    const auto &u2 = joint.user2();
    const int K1 = static_cast<int>(u1.size());
    const int K2 = static_cast<int>(u2.size());
    CMatrix C(joint.T(), K1 * u1.M() + K2 * u2.M());
    for (int i = 0; i < K1; ++i)
      C.middleCols(i * u1.M(), u1.M()) = orthonormal_factor(u1[i]);
    for (int l = 0; l < K2; ++l)
      C.middleCols(K1 * u1.M() + l * u2.M(), u2.M()) = orthonormal_factor(u2[l]);
    return {std::move(C), K1, K2, u1.M(), u2.M()};
  }

  static ObliquePoint from_codebook(const Codebook &cb) {
    const int K = static_cast<int>(cb.size());
    CMatrix C(cb.T(), K * cb.M());
    for (int i = 0; i < K; ++i)
      C.middleCols(i * cb.M(), cb.M()) = orthonormal_factor(cb[i]);
    return {std::move(C), K, 0, cb.M(), 1};
  }

  [[nodiscard]] const CMatrix &matrix() const { return C_; }
  [[nodiscard]] int T() const { return static_cast<int>(C_.rows()); }
  [[nodiscard]] int K1() const { return K1_; }
  [[nodiscard]] int K2() const { return K2_; }
  [[nodiscard]] int M1() const { return M1_; }
  [[nodiscard]] int M2() const { return M2_; }
  [[nodiscard]] int symbols() const { return K1_ + K2_; }
  [[nodiscard]] int width(int s) const { return s < K1_ ? M1_ : M2_; }
  [[nodiscard]] int first_column(int s) const {
    return s < K1_ ? s * M1_ : K1_ * M1_ + (s - K1_) * M2_;
  }
  [[nodiscard]] CMatrix::ConstColsBlockXpr block(int s) const {
    return C_.middleCols(first_column(s), width(s));
  }

  /// Codebook of user k (1 or 2) scaled to power P.
  [[nodiscard]] Codebook user_codebook(int k, double P) const {
    const int K = k == 1 ? K1_ : K2_;
    const int off = k == 1 ? 0 : K1_;
    const int M = k == 1 ? M1_ : M2_;
    const double scale = std::sqrt(P * T() / M);
    std::vector<CMatrix> syms;
    syms.reserve(static_cast<std::size_t>(K));
    for (int s = 0; s < K; ++s)
      syms.emplace_back(scale * block(off + s));
    return {std::move(syms), P, true};
  }

  [[nodiscard]] JointCodebook to_joint(double P1, double P2) const {
    return {user_codebook(1, P1), user_codebook(2, P2)};
  }

private:
  CMatrix C_;
  int K1_;
  int K2_;
  int M1_;
  int M2_;
};

namespace detail {

inline constexpr int kMaxBlock = 16;
/// Softmax weights below this (they sum to one) are dropped from the
/// gradient pass; their total contribution is below double resolution.
inline constexpr double kNegligibleWeight = 1e-22;

template <int R, int C>
using Small =
    Eigen::Matrix<cd, R, C, (R == 1 && C != 1) ? Eigen::RowMajor : Eigen::ColMajor,
                  R == Eigen::Dynamic ? kMaxBlock : R,
                  C == Eigen::Dynamic ? kMaxBlock : C>;

struct ColumnList {
  std::array<int, kMaxBlock> idx{};
  int n = 0;
  void append(int first, int width) {
    if (n + width > kMaxBlock)
      throw DimensionError("joint symbol wider than supported block size");
    for (int c = 0; c < width; ++c)
      idx[static_cast<std::size_t>(n++)] = first + c;
  }
};

template <int R, int C>
Small<R, C> gather(const CMatrix &g, const ColumnList &rows,
                   const ColumnList &cols) {
  Small<R, C> out;
  out.resize(rows.n, cols.n);
  for (int b = 0; b < cols.n; ++b)
    for (int a = 0; a < rows.n; ++a)
      out(a, b) = g(rows.idx[static_cast<std::size_t>(a)],
                    cols.idx[static_cast<std::size_t>(b)]);
  return out;
}

template <class Mat>
void scatter_add(CMatrix &acc, const ColumnList &rows, const ColumnList &cols,
                 double w, const Mat &m) {
  for (int b = 0; b < cols.n; ++b)
    for (int a = 0; a < rows.n; ++a)
      acc(rows.idx[static_cast<std::size_t>(a)],
          cols.idx[static_cast<std::size_t>(b)]) += w * m(a, b);
}

template <class Llt> double small_log_det(const Llt &llt) {
  double s = 0.0;
  const auto &l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    s += std::log(l(i, i).real());
  return 2.0 * s;
}

// d(x→x') and, for `mean`, (1/N)E[L(x→x') ] from Gram blocks. When `acc` is
// set, adds w·∂f/∂X* in coefficient form: ∂f/∂X* = X·acc.
template <int MX, int MP>
double trace_pair(const CMatrix &G, const ColumnList &xc, const ColumnList &pc,
                  bool mean, double w, CMatrix *acc) {
  constexpr bool fixed = MX != Eigen::Dynamic && MP != Eigen::Dynamic;
  const auto S = gather<MX, MX>(G, xc, xc);
  auto Ap = gather<MP, MP>(G, pc, pc);
  const auto W = gather<MP, MX>(G, pc, xc);
  Ap.diagonal().array() += 1.0;

  // Ap has eigenvalues ≥ 1, so the closed-form small inverse is safe.
  Small<MP, MP> ap_inv;
  double logdet_p = 0.0;
  if constexpr (fixed) {
    ap_inv = Ap.inverse();
    if (mean)
      logdet_p = std::log(Ap.determinant().real());
  } else {
    const Eigen::LLT<Small<MP, MP>> lp(Ap);
    Small<MP, MP> eye;
    eye.setIdentity(pc.n, pc.n);
    ap_inv = lp.solve(eye);
    if (mean)
      logdet_p = small_log_det(lp);
  }
  const Small<MP, MX> K = ap_inv * W;
  double f = S.trace().real() - (W.adjoint() * K).trace().real();

  Small<MX, MX> a_inv;
  if (mean) {
    Small<MX, MX> A = S;
    A.diagonal().array() += 1.0;
    double logdet_x = 0.0;
    if constexpr (fixed) {
      a_inv = A.inverse();
      logdet_x = std::log(A.determinant().real());
    } else {
      const Eigen::LLT<Small<MX, MX>> la(A);
      Small<MX, MX> eye;
      eye.setIdentity(xc.n, xc.n);
      a_inv = la.solve(eye);
      logdet_x = small_log_det(la);
    }
    f += logdet_p - logdet_x - static_cast<double>(pc.n) + ap_inv.trace().real();
  }
  if (acc != nullptr) {
    Small<MX, MX> alpha;
    alpha.setIdentity(xc.n, xc.n);
    const Small<MX, MP> gamma = -K.adjoint();
    Small<MP, MP> delta = K * K.adjoint();
    if (mean) {
      alpha -= a_inv;
      delta += ap_inv - ap_inv * ap_inv;
    }
    scatter_add(*acc, xc, xc, w, alpha);
    scatter_add(*acc, pc, xc, -w, K);
    scatter_add(*acc, xc, pc, w, gamma);
    scatter_add(*acc, pc, pc, w, delta);
  }
  return f;
}

// −‖U_bᴴU_a‖²_F / (M_a M_b) on unit-scale Gram blocks.
template <int MA, int MB>
double chordal_pair(const CMatrix &G, const ColumnList &ac, const ColumnList &bc,
                    double w, CMatrix *acc) {
  const auto W = gather<MB, MA>(G, bc, ac);
  const double norm = 1.0 / (static_cast<double>(ac.n) * bc.n);
  const double f = -W.squaredNorm() * norm;
  if (acc != nullptr) {
    scatter_add(*acc, bc, ac, -w * norm, W);
    const Small<MA, MB> wh = W.adjoint();
    scatter_add(*acc, ac, bc, -w * norm, wh);
  }
  return f;
}

} // namespace detail

/// Smoothed max-min objective g(C) of one criterion at fixed powers.
///
/// Works on raw T×K matrices (no unit-norm check) so that finite-difference
/// oracles can probe it off the manifold.
class SmoothObjective {
public:
  struct Value {
    double g = 0.0;
    /// Hard minimum of the pair metric f (the unsmoothed criterion).
    double fmin = 0.0;
    std::size_t pairs = 0;
  };

  SmoothObjective(Criterion criterion, double epsilon, int T, int K1, int K2,
                  int M1, int M2, double P1, double P2)
      : criterion_(criterion), epsilon_(epsilon), T_(T), K1_(K1), K2_(K2),
        M1_(M1), M2_(M2) {
    if (!(epsilon > 0.0))
      throw ConfigError("epsilon must be positive");
    if (!(P1 > 0.0) || !(P2 > 0.0))
      throw DomainError("design powers must be positive");
    const bool joint = criterion == Criterion::Dmin ||
                       criterion == Criterion::MeanPllr;
    if (joint && (K1 < 1 || K2 < 1 || K1 * K2 < 2))
      throw SizeError("joint criteria need at least two joint symbols");
    if (criterion == Criterion::AltD12 && (K1 < 2 || K2 < 1))
      throw SizeError("alt-d12 needs |X1| ≥ 2 and |X2| ≥ 1");
    if (criterion == Criterion::AltD21 && (K2 < 2 || K1 < 1))
      throw SizeError("alt-d21 needs |X2| ≥ 2 and |X1| ≥ 1");
    if (criterion == Criterion::Chordal && K1 + K2 < 2)
      throw SizeError("chordal criterion needs at least two symbols");
    if (M1 + M2 > detail::kMaxBlock)
      throw DimensionError("M1 + M2 exceeds the supported block size");
    const int cols = K1 * M1 + K2 * M2;
    scale_ = RVector(cols);
    const bool unit = criterion == Criterion::Chordal;
    for (int c = 0; c < cols; ++c)
      scale_(c) = unit ? 1.0
                       : std::sqrt(c < K1 * M1 ? P1 * T / M1 : P2 * T / M2);
  }

  [[nodiscard]] Criterion criterion() const { return criterion_; }
  [[nodiscard]] double epsilon() const { return epsilon_; }
  void set_epsilon(double e) {
    if (!(e > 0.0))
      throw ConfigError("epsilon must be positive");
    epsilon_ = e;
  }

  [[nodiscard]] std::size_t pair_count() const {
    const auto k1 = static_cast<std::size_t>(K1_);
    const auto k2 = static_cast<std::size_t>(K2_);
    switch (criterion_) {
    case Criterion::Dmin:
    case Criterion::MeanPllr:
      return k1 * k2 * (k1 * k2 - 1);
    case Criterion::AltD12:
      return k1 * (k1 - 1) * k2;
    case Criterion::AltD21:
      return k2 * (k2 - 1) * k1;
    case Criterion::Chordal:
      return (k1 + k2) * (k1 + k2 - 1) / 2;
    }
    return 0;
  }

  /// Pair metric f for every pair, in enumeration order.
  [[nodiscard]] std::vector<double> pair_values(const CMatrix &C) const {
    check_shape(C);
    const CMatrix G = gram(C);
    std::vector<double> f;
    f.reserve(pair_count());
    visit(G, [&f](double v) { f.push_back(v); }, nullptr, {});
    return f;
  }

  [[nodiscard]] Value value(const CMatrix &C) const {
    const auto f = pair_values(C);
    return reduce(f).first;
  }

  /// Value and real Euclidean gradient ∂g/∂Re C + i ∂g/∂Im C.
  [[nodiscard]] Value value_and_gradient(const CMatrix &C, CMatrix &grad) const {
    check_shape(C);
    const CMatrix G = gram(C);
    std::vector<double> f;
    f.reserve(pair_count());
    visit(G, [&f](double v) { f.push_back(v); }, nullptr, {});
    const auto [val, weights] = reduce(f);
    CMatrix acc = CMatrix::Zero(C.cols(), C.cols());
    // ∂g/∂X* = Σ π_p (−∂f_p/∂X*)
    visit(G, [](double) {}, &acc, weights);
    grad = 2.0 * (C * scale_.asDiagonal()) * acc * scale_.asDiagonal();
    return val;
  }

private:
  void check_shape(const CMatrix &C) const {
    if (C.rows() != T_ || C.cols() != scale_.size())
      throw DimensionError("point shape does not match the objective");
  }

  [[nodiscard]] CMatrix gram(const CMatrix &C) const {
    const CMatrix X = C * scale_.asDiagonal();
    return X.adjoint() * X;
  }

  [[nodiscard]] std::pair<Value, std::vector<double>>
  reduce(const std::vector<double> &f) const {
    Value v;
    v.pairs = f.size();
    v.fmin = *std::min_element(f.begin(), f.end());
    std::vector<double> w(f.size());
    double z = 0.0;
    for (std::size_t p = 0; p < f.size(); ++p) {
      w[p] = std::exp(-(f[p] - v.fmin) / epsilon_);
      z += w[p];
    }
    v.g = -v.fmin + epsilon_ * std::log(z);
    for (auto &x : w)
      x = -x / z;
    return {v, std::move(w)};
  }

  [[nodiscard]] detail::ColumnList symbol_columns(int s) const {
    detail::ColumnList l;
    if (s < K1_)
      l.append(s * M1_, M1_);
    else
      l.append(K1_ * M1_ + (s - K1_) * M2_, M2_);
    return l;
  }

  // Calls `sink(f)` per pair in a fixed order; accumulates weighted gradient
  // coefficients into `acc` when given.
  template <class Sink>
  void visit(const CMatrix &G, Sink &&sink, CMatrix *acc,
             const std::vector<double> &w) const {
    const bool unit = M1_ == 1 && M2_ == 1;
    switch (criterion_) {
    case Criterion::Dmin:
    case Criterion::MeanPllr:
      if (unit)
        visit_joint<2, 2>(G, sink, acc, w);
      else
        visit_joint<Eigen::Dynamic, Eigen::Dynamic>(G, sink, acc, w);
      break;
    case Criterion::AltD12:
    case Criterion::AltD21:
      if (unit)
        visit_alt<1, 2>(G, sink, acc, w);
      else
        visit_alt<Eigen::Dynamic, Eigen::Dynamic>(G, sink, acc, w);
      break;
    case Criterion::Chordal:
      if (unit)
        visit_chordal<1, 1>(G, sink, acc, w);
      else
        visit_chordal<Eigen::Dynamic, Eigen::Dynamic>(G, sink, acc, w);
      break;
    }
  }

  template <int MX, int MP, class Sink>
  void visit_joint(const CMatrix &G, Sink &sink, CMatrix *acc,
                   const std::vector<double> &w) const {
    const bool mean = criterion_ == Criterion::MeanPllr;
    const int n = K1_ * K2_;
    std::vector<detail::ColumnList> cols(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
      auto &l = cols[static_cast<std::size_t>(a)];
      l.append((a / K2_) * M1_, M1_);
      l.append(K1_ * M1_ + (a % K2_) * M2_, M2_);
    }
    std::size_t p = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        if (a == b)
          continue;
        const auto &xc = cols[static_cast<std::size_t>(a)];
        const auto &pc = cols[static_cast<std::size_t>(b)];
        if (acc == nullptr) {
          sink(detail::trace_pair<MX, MP>(G, xc, pc, mean, 0.0, nullptr));
        } else if (-w[p] > detail::kNegligibleWeight) {
          detail::trace_pair<MX, MP>(G, xc, pc, mean, w[p], acc);
        }
        ++p;
      }
  }

  template <int MX, int MP, class Sink>
  void visit_alt(const CMatrix &G, Sink &sink, CMatrix *acc,
                 const std::vector<double> &w) const {
    // alt-d12: x = x1_i, x' = [x1_j x2_l]; alt-d21: x = x2_l, x' = [x1_i x2_m]
    const bool first = criterion_ == Criterion::AltD12;
    const int own = first ? K1_ : K2_;
    const int other = first ? K2_ : K1_;
    std::size_t p = 0;
    for (int i = 0; i < own; ++i)
      for (int j = 0; j < own; ++j) {
        if (i == j)
          continue;
        for (int l = 0; l < other; ++l) {
          const int xi = first ? i : K1_ + i;
          detail::ColumnList xc = symbol_columns(xi);
          detail::ColumnList pc;
          if (first) {
            pc.append(j * M1_, M1_);
            pc.append(K1_ * M1_ + l * M2_, M2_);
          } else {
            pc.append(l * M1_, M1_);
            pc.append(K1_ * M1_ + j * M2_, M2_);
          }
          if (acc == nullptr)
            sink(detail::trace_pair<MX, MP>(G, xc, pc, false, 0.0, nullptr));
          else if (-w[p] > detail::kNegligibleWeight)
            detail::trace_pair<MX, MP>(G, xc, pc, false, w[p], acc);
          ++p;
        }
      }
  }

  template <int MA, int MB, class Sink>
  void visit_chordal(const CMatrix &G, Sink &sink, CMatrix *acc,
                     const std::vector<double> &w) const {
    const int n = K1_ + K2_;
    std::size_t p = 0;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const auto ac = symbol_columns(a);
        const auto bc = symbol_columns(b);
        if (acc == nullptr)
          sink(detail::chordal_pair<MA, MB>(G, ac, bc, 0.0, nullptr));
        else if (-w[p] > detail::kNegligibleWeight)
          detail::chordal_pair<MA, MB>(G, ac, bc, w[p], acc);
        ++p;
      }
  }

  Criterion criterion_;
  double epsilon_;
  int T_;
  int K1_;
  int K2_;
  int M1_;
  int M2_;
  RVector scale_;
};

/// Powers used while designing: design_snr for both users when positive.
inline std::pair<double, double> design_powers(const OptimizerConfig &cfg,
                                               const SystemConfig &sys) {
  if (cfg.design_snr > 0.0)
    return {cfg.design_snr, cfg.design_snr};
  return {sys.P1, sys.P2};
}

inline SmoothObjective make_objective(const ObliquePoint &C,
                                      const OptimizerConfig &cfg,
                                      const SystemConfig &sys) {
  const auto [p1, p2] = design_powers(cfg, sys);
  return {cfg.criterion, cfg.epsilon, C.T(), C.K1(), C.K2(),
          C.M1(),        C.M2(),      p1,    p2};
}

/// g(C) = ε log Σ exp(−f/ε) over the criterion's pair set.
inline double smooth_objective(const ObliquePoint &C, const OptimizerConfig &cfg,
                               const SystemConfig &sys) {
  cfg.validate();
  return make_objective(C, cfg, sys).value(C.matrix()).g;
}

/// Real Euclidean gradient of g at C (all columns).
inline CMatrix euclidean_gradient(const ObliquePoint &C,
                                  const OptimizerConfig &cfg,
                                  const SystemConfig &sys) {
  cfg.validate();
  CMatrix grad;
  (void)make_objective(C, cfg, sys).value_and_gradient(C.matrix(), grad);
  return grad;
}

/// Block-wise tangent projection (I − U Uᴴ)·G; for M = 1 this is
/// (I − c cᴴ) g per column.
inline CMatrix riemannian_gradient(const ObliquePoint &C, const CMatrix &egrad) {
  if (egrad.rows() != C.matrix().rows() || egrad.cols() != C.matrix().cols())
    throw DimensionError("gradient shape must match the point");
  CMatrix out = egrad;
  for (int s = 0; s < C.symbols(); ++s) {
    const auto U = C.block(s);
    auto g = out.middleCols(C.first_column(s), C.width(s));
    g -= U * (U.adjoint() * g).eval();
  }
  return out;
}

/// Block-wise retraction: normalize c + step·t (QR for multi-column blocks).
/// Blocks with an exactly zero tangent are left untouched.
inline ObliquePoint retract(const ObliquePoint &C, const CMatrix &tangent,
                            double step) {
  if (tangent.rows() != C.matrix().rows() || tangent.cols() != C.matrix().cols())
    throw DimensionError("tangent shape must match the point");
  CMatrix next = C.matrix();
  for (int s = 0; s < C.symbols(); ++s) {
    const auto first = C.first_column(s);
    const auto m = C.width(s);
    const auto t = tangent.middleCols(first, m);
    if (step == 0.0 || t.isZero(0.0))
      continue;
    CMatrix moved = C.block(s) + step * t;
    if (m == 1) {
      const double n = moved.norm();
      if (!(n > 0.0) || !std::isfinite(n))
        throw StepError("retraction produced a zero column");
      next.middleCols(first, m) = moved / n;
    } else {
      try {
        next.middleCols(first, m) = orthonormal_factor(moved);
      } catch (const LinAlgError &) {
        throw StepError("retraction produced a rank-deficient block");
      }
    }
  }
  return {std::move(next), C.K1(), C.K2(), C.M1(), C.M2()};
}

struct IterationLog {
  int iteration = 0;
  double objective = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  double epsilon = 0.0;
};

struct OptimizeResult {
  /// Iterate with the largest hard criterion value min f.
  ObliquePoint point;
  /// Present when both users have at least one symbol; scaled by the design
  /// powers.
  std::optional<JointCodebook> codebook;
  /// Smoothed objective after every accepted step (first entry: init).
  std::vector<double> trace;
  std::vector<IterationLog> log;
  double best_min_f = -std::numeric_limits<double>::infinity();
  double initial_min_f = -std::numeric_limits<double>::infinity();
};

namespace detail {

// Zeroes the gradient of blocks held fixed by alternating criteria.
inline void mask_fixed(const ObliquePoint &C, Criterion crit, CMatrix &g) {
  if (crit == Criterion::AltD12 && C.K2() > 0)
    g.rightCols(static_cast<Eigen::Index>(C.K2()) * C.M2()).setZero();
  if (crit == Criterion::AltD21 && C.K1() > 0)
    g.leftCols(static_cast<Eigen::Index>(C.K1()) * C.M1()).setZero();
}

} // namespace detail

/// Armijo-backtracking Riemannian gradient descent on g.
///
/// alt-d12 moves user-1 blocks only and alt-d21 user-2 blocks only. The first
/// trial step moves a distance step_init along the normalized descent
/// direction; later iterations start from twice the last accepted step.
inline OptimizeResult
optimize(const ObliquePoint &init, const OptimizerConfig &cfg,
         const SystemConfig &sys,
         const std::function<void(const IterationLog &)> &progress = {}) {
  cfg.validate();
  auto obj = make_objective(init, cfg, sys);
  const auto [p1, p2] = design_powers(cfg, sys);

  ObliquePoint x = init;
  CMatrix egrad;
  auto val = obj.value_and_gradient(x.matrix(), egrad);
  OptimizeResult res{init, std::nullopt, {val.g}, {}, val.fmin, val.fmin};
  const int anneal_every = cfg.anneal ? std::max(1, cfg.max_iters / 4) : 0;

  double last_step = 0.0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    CMatrix rg = riemannian_gradient(x, egrad);
    detail::mask_fixed(x, cfg.criterion, rg);
    const double gn2 = rg.squaredNorm();
    const double gn = std::sqrt(gn2);
    IterationLog entry{it, val.g, gn, 0.0, obj.epsilon()};
    if (!(gn >= cfg.grad_tol)) {
      res.log.push_back(entry);
      if (progress)
        progress(entry);
      break;
    }
    double step = last_step > 0.0 ? 2.0 * last_step : cfg.step_init / gn;
    const CMatrix dir = -rg;
    bool accepted = false;
    ObliquePoint trial = x;
    SmoothObjective::Value tval;
    while (step * gn > 1e-15) {
      trial = retract(x, dir, step);
      tval = obj.value(trial.matrix());
      if (tval.g <= val.g - cfg.armijo_c * step * gn2) {
        accepted = true;
        break;
      }
      step *= cfg.armijo_shrink;
    }
    entry.step = accepted ? step : 0.0;
    res.log.push_back(entry);
    if (progress)
      progress(entry);
    if (!accepted)
      break;
    last_step = step;
    x = std::move(trial);
    val = obj.value_and_gradient(x.matrix(), egrad);
    res.trace.push_back(val.g);
    if (val.fmin > res.best_min_f) {
      res.best_min_f = val.fmin;
      res.point = x;
    }
    if (anneal_every > 0 && (it + 1) % anneal_every == 0 &&
        it + 1 < cfg.max_iters) {
      obj.set_epsilon(obj.epsilon() / 2.0);
      val = obj.value_and_gradient(x.matrix(), egrad);
      last_step = 0.0;
    }
  }
  if (res.point.K1() > 0 && res.point.K2() > 0)
    res.codebook = res.point.to_joint(p1, p2);
  return res;
}

struct AlternatingResult {
  JointCodebook codebook;
  /// Smoothed-objective trace of every half round (alt-d12, alt-d21, ...).
  std::vector<std::vector<double>> half_round_traces;
};

/// Alternately maximizes d12 over user 1 (user 2 fixed) and d21 over user 2
/// (user 1 fixed), `rounds` times.
inline AlternatingResult alternating_optimize(const JointCodebook &init,
                                              const OptimizerConfig &cfg,
                                              const SystemConfig &sys,
                                              int rounds) {
  if (rounds < 0)
    throw ConfigError("rounds must be non-negative");
  AlternatingResult out{init, {}};
  if (rounds == 0)
    return out;
  const auto [p1, p2] = design_powers(cfg, sys);
  ObliquePoint x = ObliquePoint::from_joint(init);
  for (int r = 0; r < rounds; ++r)
    for (const auto crit : {Criterion::AltD12, Criterion::AltD21}) {
      OptimizerConfig half = cfg;
      half.criterion = crit;
      auto res = optimize(x, half, sys);
      out.half_round_traces.push_back(std::move(res.trace));
      x = std::move(res.point);
    }
  out.codebook = x.to_joint(p1, p2);
  return out;
}

} // namespace ncmac
