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
 * @file partition.hpp
 * @brief Joint constellations obtained by splitting one single-user
 * constellation into two disjoint halves.
 *
 * The max squared cross-correlation over intra-1, intra-2 and cross pairs
 * covers every pair of the base, so it is the same for every split. The
 * greedy-swap search therefore minimizes the split-dependent quantity
 *
 *   max_a [ max_{b ~ a, b ≠ a} ρ(a,b) + max_{c ≁ a} ρ(c,a) ]
 *
 * with ρ the normalized squared cross-correlation and ~ "same user". This is
 * the correlation sum that controls each one-sided d-value from below.
 */

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ncmac/constellation.hpp"
#include "ncmac/errors.hpp"

namespace ncmac {

enum class PartitionStrategy { Random, GreedySwap };

inline PartitionStrategy parse_partition_strategy(std::string_view s) {
  if (s == "random")
    return PartitionStrategy::Random;
  if (s == "greedy-swap")
    return PartitionStrategy::GreedySwap;
  throw ConfigError("unknown partition strategy: " + std::string(s));
}

/// Maximum number of full first-improvement sweeps in greedy-swap.
inline constexpr int kMaxSwapSweeps = 50;

/// Membership of each base symbol: 0 for user 1, 1 for user 2.
using Assignment = std::vector<int>;

namespace detail {

inline Eigen::MatrixXd correlation_table(const Codebook &base) {
  const auto n = static_cast<Eigen::Index>(base.size());
  const double pt = base.power() * base.T();
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = a + 1; b < n; ++b) {
      const double v =
          (base[static_cast<std::size_t>(b)].adjoint() *
           base[static_cast<std::size_t>(a)])
              .squaredNorm() /
          (pt * pt);
      rho(a, b) = v;
      rho(b, a) = v;
    }
  return rho;
}

// Two largest correlations of each symbol towards each side.
class SwapTables {
public:
  SwapTables(const Eigen::MatrixXd &rho, const Assignment &side)
      : rho_(rho), side_(side) {
    rebuild();
  }

  void rebuild() {
    const auto n = side_.size();
    top_.assign(n, {});
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b)
          continue;
        auto &t = top_[a][static_cast<std::size_t>(side_[b])];
        const double v = rho_(static_cast<Eigen::Index>(a),
                              static_cast<Eigen::Index>(b));
        if (v > t.v1) {
          t.v2 = t.v1;
          t.v1 = v;
          t.i1 = b;
        } else if (v > t.v2) {
          t.v2 = v;
        }
      }
  }

  [[nodiscard]] double objective() const {
    double worst = 0.0;
    for (std::size_t a = 0; a < side_.size(); ++a) {
      const auto s = static_cast<std::size_t>(side_[a]);
      worst = std::max(worst, top_[a][s].v1 + top_[a][1 - s].v1);
    }
    return worst;
  }

  /// Objective after exchanging p (user 1) with q (user 2).
  [[nodiscard]] double objective_after_swap(std::size_t p, std::size_t q) const {
    double worst = 0.0;
    for (std::size_t a = 0; a < side_.size(); ++a) {
      double same = 0.0;
      double other = 0.0;
      if (a == p) {
        same = excluding(a, 1, q);
        other = std::max(top_[a][0].v1, rho(p, q));
      } else if (a == q) {
        same = excluding(a, 0, p);
        other = std::max(top_[a][1].v1, rho(p, q));
      } else if (side_[a] == 0) {
        same = std::max(excluding(a, 0, p), rho(a, q));
        other = std::max(excluding(a, 1, q), rho(a, p));
      } else {
        same = std::max(excluding(a, 1, q), rho(a, p));
        other = std::max(excluding(a, 0, p), rho(a, q));
      }
      worst = std::max(worst, same + other);
    }
    return worst;
  }

private:
  struct Top {
    double v1 = 0.0;
    double v2 = 0.0;
    std::size_t i1 = static_cast<std::size_t>(-1);
  };

  [[nodiscard]] double rho(std::size_t a, std::size_t b) const {
    return rho_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  }
  [[nodiscard]] double excluding(std::size_t a, std::size_t side,
                                 std::size_t removed) const {
    const auto &t = top_[a][side];
    return t.i1 == removed ? t.v2 : t.v1;
  }

  const Eigen::MatrixXd &rho_;
  const Assignment &side_;
  std::vector<std::array<Top, 2>> top_;
};

} // namespace detail

/// Split-dependent objective minimized by greedy-swap (see file comment).
inline double partition_objective(const Codebook &base, const Assignment &side) {
  const auto rho = detail::correlation_table(base);
  return detail::SwapTables(rho, side).objective();
}

/// Membership vector for a split of `base` into ⌈n/2⌉ and ⌊n/2⌋ symbols.
inline Assignment partition_assignment(const Codebook &base,
                                       PartitionStrategy strategy,
                                       std::uint64_t seed) {
  const std::size_t n = base.size();
  if (n < 2)
    throw SizeError("partition needs at least two base symbols");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Assignment side(n, 1);
  for (std::size_t k = 0; k < (n + 1) / 2; ++k)
    side[order[k]] = 0;
  if (strategy == PartitionStrategy::Random)
    return side;

  const auto rho = detail::correlation_table(base);
  detail::SwapTables tables(rho, side);
  double current = tables.objective();
  for (int sweep = 0; sweep < kMaxSwapSweeps; ++sweep) {
    bool improved = false;
    for (std::size_t p = 0; p < n; ++p) {
      if (side[p] != 0)
        continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (side[q] != 1)
          continue;
        const double next = tables.objective_after_swap(p, q);
        if (next < current) {
          side[p] = 1;
          side[q] = 0;
          tables.rebuild();
          current = next;
          improved = true;
          break;
        }
      }
    }
    if (!improved)
      break;
  }
  return side;
}

/// Joint codebook from a membership vector; symbols keep base order.
inline JointCodebook split_codebook(const Codebook &base, const Assignment &side) {
  if (side.size() != base.size())
    throw SizeError("assignment size must match the base codebook");
  std::vector<CMatrix> u1;
  std::vector<CMatrix> u2;
  for (std::size_t k = 0; k < base.size(); ++k)
    (side[k] == 0 ? u1 : u2).push_back(base[k]);
  return {Codebook(std::move(u1), base.power(), base.grassmannian()),
          Codebook(std::move(u2), base.power(), base.grassmannian())};
}

/// Disjoint split of a single-user constellation into two user codebooks.
inline JointCodebook partition(const Codebook &base, PartitionStrategy strategy,
                               std::uint64_t seed) {
  return split_codebook(base, partition_assignment(base, strategy, seed));
}

} // namespace ncmac
