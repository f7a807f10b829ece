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
 * @file constellation.hpp
 * @brief Single-user and joint constellations for the two-user non-coherent
 * MIMO multiple-access channel.
 *
 * A symbol of user k is a T×M_k complex matrix. Grassmannian symbols satisfy
 * XᴴX = (P·T/M)·I, so information is carried by the column span only. The
 * joint symbol seen by the receiver is the column concatenation [x1 x2].
 */

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"

namespace ncmac {

/// Grassmannian scaling tolerance used when a codebook is loaded or validated.
inline constexpr double kGrassmannValidateTol = 1e-8;
/// Grassmannian scaling tolerance guaranteed by the generators.
inline constexpr double kGrassmannBuildTol = 1e-10;

/// Channel dimensions and per-user SNRs (linear scale).
struct SystemConfig {
  int T = 2;
  int M1 = 1;
  int M2 = 1;
  int N = 1;
  double P1 = 1.0;
  double P2 = 1.0;

  [[nodiscard]] double P() const { return std::max(P1, P2); }

  void validate() const {
    if (T < 2)
      throw DimensionError("T must be at least 2");
    if (M1 < 1 || M2 < 1)
      throw DimensionError("transmit antenna counts must be at least 1");
    if (N < 1)
      throw DimensionError("receive antenna count must be at least 1");
    if (T < M1 + M2)
      throw DimensionError("T must be at least M1 + M2");
    if (!(P1 > 0.0) || !(P2 > 0.0))
      throw DomainError("per-user SNR must be positive");
  }
};

/// Distance of XᴴX from (P·T/M)·I, relative to the scale P·T/M (absolute
/// when that scale is below one).
inline double grassmann_defect(const CMatrix &x, double power) {
  const double T = static_cast<double>(x.rows());
  const double M = static_cast<double>(x.cols());
  const double s = power * T / M;
  CMatrix g = x.adjoint() * x;
  g.diagonal().array() -= s;
  return g.norm() / std::max(1.0, s);
}

/// One user's constellation. Immutable after construction.
class Codebook {
public:
  Codebook() = default;

  /// Validates shapes; when `grassmannian` is set, every symbol must satisfy
  /// the scaling invariant to kGrassmannValidateTol.
  Codebook(std::vector<CMatrix> symbols, double power, bool grassmannian)
      : symbols_(std::move(symbols)), power_(power),
        grassmannian_(grassmannian) {
    if (symbols_.empty())
      throw SizeError("codebook must contain at least one symbol");
    const auto rows = symbols_.front().rows();
    const auto cols = symbols_.front().cols();
    if (rows < 1 || cols < 1 || cols > rows)
      throw DimensionError("symbols must be T×M with T ≥ M ≥ 1");
    for (const auto &s : symbols_)
      if (s.rows() != rows || s.cols() != cols)
        throw DimensionError("all symbols must share one shape");
    if (!(power_ > 0.0))
      throw DomainError("codebook power must be positive");
    if (grassmannian_)
      for (const auto &s : symbols_)
        if (grassmann_defect(s, power_) > kGrassmannValidateTol)
          throw InvariantError("symbol violates XᴴX = (PT/M)·I");
  }

  [[nodiscard]] std::size_t size() const { return symbols_.size(); }
  [[nodiscard]] int T() const { return static_cast<int>(symbols_.front().rows()); }
  [[nodiscard]] int M() const { return static_cast<int>(symbols_.front().cols()); }
  [[nodiscard]] double power() const { return power_; }
  [[nodiscard]] bool grassmannian() const { return grassmannian_; }
  [[nodiscard]] const CMatrix &operator[](std::size_t i) const { return symbols_[i]; }
  [[nodiscard]] const std::vector<CMatrix> &symbols() const { return symbols_; }

  /// Same directions, rescaled to a new power.
  [[nodiscard]] Codebook rescaled(double power) const {
    if (!(power > 0.0))
      throw DomainError("codebook power must be positive");
    const double g = std::sqrt(power / power_);
    std::vector<CMatrix> out;
    out.reserve(symbols_.size());
    for (const auto &s : symbols_)
      out.emplace_back(g * s);
    return {std::move(out), power, grassmannian_};
  }

private:
  std::vector<CMatrix> symbols_;
  double power_ = 1.0;
  bool grassmannian_ = false;
};

/// Cartesian product of two codebooks. Joint index = i·|X2| + l.
class JointCodebook {
public:
  JointCodebook() = default;

  JointCodebook(Codebook user1, Codebook user2)
      : user1_(std::move(user1)), user2_(std::move(user2)),
        cache_(std::make_shared<Cache>()) {
    if (user1_.T() != user2_.T())
      throw DimensionError("users must share the block length T");
  }

  [[nodiscard]] const Codebook &user1() const { return user1_; }
  [[nodiscard]] const Codebook &user2() const { return user2_; }
  [[nodiscard]] std::size_t size() const { return user1_.size() * user2_.size(); }
  [[nodiscard]] int T() const { return user1_.T(); }
  [[nodiscard]] int width() const { return user1_.M() + user2_.M(); }

  [[nodiscard]] std::size_t index(std::size_t i, std::size_t l) const {
    return i * user2_.size() + l;
  }
  [[nodiscard]] std::pair<std::size_t, std::size_t> split(std::size_t joint) const {
    return {joint / user2_.size(), joint % user2_.size()};
  }

  /// [x1 x2] for one joint index, built on the fly.
  [[nodiscard]] CMatrix compose(std::size_t joint) const {
    const auto [i, l] = split(joint);
    CMatrix x(T(), width());
    x << user1_[i], user2_[l];
    return x;
  }

  /// All joint symbols, materialized on first use and shared between copies.
  [[nodiscard]] const std::vector<CMatrix> &symbols() const {
    std::call_once(cache_->once, [this] {
      cache_->symbols.reserve(size());
      for (std::size_t j = 0; j < size(); ++j)
        cache_->symbols.push_back(compose(j));
    });
    return cache_->symbols;
  }

  /// Both users rescaled to a common power.
  [[nodiscard]] JointCodebook rescaled(double power) const {
    return {user1_.rescaled(power), user2_.rescaled(power)};
  }

private:
  struct Cache {
    std::once_flag once;
    std::vector<CMatrix> symbols;
  };
  Codebook user1_;
  Codebook user2_;
  std::shared_ptr<Cache> cache_;
};

/// `count` random Grassmannian symbols: Q-factors of i.i.d. complex Gaussian
/// T×M draws, scaled by √(power·T/M). Deterministic in `seed`.
inline Codebook random_grassmannian(int T, int M, int count, double power,
                                    std::uint64_t seed) {
  if (M < 1 || T < M)
    throw DimensionError("random_grassmannian requires T ≥ M ≥ 1");
  if (count < 1)
    throw SizeError("random_grassmannian requires count ≥ 1");
  if (!(power > 0.0))
    throw DomainError("power must be positive");
  std::mt19937_64 rng(seed);
  const double scale = std::sqrt(power * T / M);
  std::vector<CMatrix> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k)
    out.emplace_back(scale * orthonormal_factor(complex_gaussian(T, M, rng)));
  return {std::move(out), power, true};
}

/// Unordered pairs (a < b) of joint symbols whose x xᴴ differ by at most
/// `tol` in Frobenius norm. Empty means the joint codebook is identifiable.
///
/// Candidates are found by sorting on a fixed unit-norm projection of x xᴴ:
/// a projection never exceeds the Frobenius distance, so a sweep over the
/// sorted keys finds every close pair.
inline std::vector<std::pair<std::size_t, std::size_t>>
check_identifiability(const JointCodebook &joint, double tol) {
  const auto &xs = joint.symbols();
  std::vector<CMatrix> outer;
  outer.reserve(xs.size());
  for (const auto &x : xs) {
    outer.emplace_back(x * x.adjoint());
    if (!outer.back().allFinite())
      throw LinAlgError("symbol Gram matrix is not finite");
  }
  const auto T = joint.T();
  std::mt19937_64 rng(0x5eed);
  CMatrix dir = complex_gaussian(T, T, rng);
  dir /= dir.norm();
  std::vector<std::pair<double, std::size_t>> key;
  key.reserve(outer.size());
  for (std::size_t a = 0; a < outer.size(); ++a)
    key.emplace_back(dir.cwiseProduct(outer[a].conjugate()).sum().real(), a);
  std::sort(key.begin(), key.end());
  std::vector<std::pair<std::size_t, std::size_t>> bad;
  for (std::size_t u = 0; u < key.size(); ++u)
    for (std::size_t v = u + 1; v < key.size() && key[v].first - key[u].first <= tol;
         ++v) {
      const auto a = std::min(key[u].second, key[v].second);
      const auto b = std::max(key[u].second, key[v].second);
      if ((outer[a] - outer[b]).norm() <= tol)
        bad.emplace_back(a, b);
    }
  std::sort(bad.begin(), bad.end());
  return bad;
}

/// Right-multiplies every symbol by R^{-1/2} (correlated-antenna transform).
///
/// The resulting power is the mean per-channel-use energy of the transformed
/// symbols; the Grassmannian flag is re-derived from them. With `renormalize`
/// the symbols are rescaled so the mean energy matches the input power.
inline Codebook correlation_transform(const Codebook &codebook,
                                      const CMatrix &R,
                                      bool renormalize = false) {
  const int M = codebook.M();
  if (R.rows() != M || R.cols() != M)
    throw DimensionError("correlation matrix must be M×M");
  if ((R - R.adjoint()).norm() > 1e-12 * std::max(1.0, R.norm()))
    throw LinAlgError("correlation matrix must be Hermitian");
  if (R.isIdentity(0.0))
    return codebook;
  const CMatrix w = hermitian_power(R, -0.5);
  std::vector<CMatrix> out;
  out.reserve(codebook.size());
  double energy = 0.0;
  for (const auto &x : codebook.symbols()) {
    out.emplace_back(x * w);
    energy += out.back().squaredNorm();
  }
  const double T = codebook.T();
  double power = energy / (static_cast<double>(out.size()) * T);
  if (renormalize) {
    const double g = std::sqrt(codebook.power() / power);
    for (auto &x : out)
      x *= g;
    power = codebook.power();
  }
  bool grass = true;
  for (const auto &x : out)
    grass = grass && grassmann_defect(x, power) <= kGrassmannValidateTol;
  return {std::move(out), power, grass};
}

} // namespace ncmac
