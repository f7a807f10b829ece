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
 * @file simulator.hpp
 * @brief Monte-Carlo block-fading channel and exact joint ML detection.
 *
 * Every block draws its own random stream from (seed, SNR index, block
 * index), so results do not depend on the number of worker threads.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ncmac/constellation.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"
#include "ncmac/metrics.hpp"

namespace ncmac {

enum class Scheme { JointMl, PilotMl, PilotMmse };

inline Scheme parse_scheme(std::string_view s) {
  if (s == "joint-ml")
    return Scheme::JointMl;
  if (s == "pilot-ml")
    return Scheme::PilotMl;
  if (s == "pilot-mmse")
    return Scheme::PilotMmse;
  throw ConfigError("unknown scheme: " + std::string(s));
}

inline std::string_view to_string(Scheme s) {
  switch (s) {
  case Scheme::JointMl:
    return "joint-ml";
  case Scheme::PilotMl:
    return "pilot-ml";
  case Scheme::PilotMmse:
    return "pilot-mmse";
  }
  return "?";
}

struct SimConfig {
  /// Per-user SNR points, linear scale. Both users transmit at each point.
  std::vector<double> snr_grid;
  int num_blocks = 10000;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::JointMl;
  /// 0 picks std::thread::hardware_concurrency().
  int workers = 0;

  void validate() const {
    if (num_blocks < 1)
      throw ConfigError("num_blocks must be at least 1");
    if (snr_grid.empty())
      throw ConfigError("snr grid must not be empty");
    for (double p : snr_grid)
      if (!(p > 0.0) || !std::isfinite(p))
        throw ConfigError("snr grid values must be positive and finite");
    if (workers < 0)
      throw ConfigError("workers must be non-negative");
  }
};

struct SerPoint {
  double snr = 0.0;
  double joint_ser = 0.0;
  double user1_ser = 0.0;
  double user2_ser = 0.0;
  std::optional<double> pep_worst;
  long long blocks = 0;
  /// Binomial standard error of joint_ser.
  double std_err = 0.0;
};

struct SerResult {
  std::vector<SerPoint> points;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t block_seed(std::uint64_t seed, std::size_t point,
                                long long block) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(point));
  return splitmix64(h ^ static_cast<std::uint64_t>(block));
}

struct ErrorCounts {
  long long joint = 0;
  long long user1 = 0;
  long long user2 = 0;
};

// Splits [0, blocks) over workers; `run(first, last)` returns error counts.
template <class Run>
ErrorCounts run_blocks(long long blocks, int workers, const Run &run) {
  int n = workers > 0 ? workers
                      : static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
  n = static_cast<int>(std::min<long long>(n, std::max(1LL, blocks / 64)));
  if (n <= 1)
    return run(0LL, blocks);
  std::vector<ErrorCounts> parts(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  for (int w = 0; w < n; ++w)
    pool.emplace_back([&, w] {
      const long long first = blocks * w / n;
      const long long last = blocks * (w + 1) / n;
      parts[static_cast<std::size_t>(w)] = run(first, last);
    });
  for (auto &t : pool)
    t.join();
  ErrorCounts total;
  for (const auto &p : parts) {
    total.joint += p.joint;
    total.user1 += p.user1;
    total.user2 += p.user2;
  }
  return total;
}

inline SerPoint finish_point(double snr, const ErrorCounts &c, long long blocks) {
  SerPoint p;
  p.snr = snr;
  p.blocks = blocks;
  const double n = static_cast<double>(blocks);
  p.joint_ser = static_cast<double>(c.joint) / n;
  p.user1_ser = static_cast<double>(c.user1) / n;
  p.user2_ser = static_cast<double>(c.user2) / n;
  p.std_err = std::sqrt(p.joint_ser * (1.0 - p.joint_ser) / n);
  return p;
}

} // namespace detail

/// Y = x Hᵀ + Z with H (N×M) and Z (T×N) i.i.d. CN(0, 1).
template <class Rng>
CMatrix sample_block(const CMatrix &x, int N, Rng &rng) {
  if (N < 1)
    throw DomainError("N must be at least 1");
  const CMatrix H = complex_gaussian(N, x.cols(), rng);
  return x * H.transpose() + complex_gaussian(x.rows(), N, rng);
}

/// Exact non-coherent ML detector over a fixed list of symbols.
///
/// With I + xᴴx = L Lᴴ and V = x L⁻ᴴ, the likelihood score up to constants is
/// tr(V Vᴴ Y Yᴴ) − N log det(I + xᴴx). Each V Vᴴ is stored as T² reals so a
/// detection is one matrix-vector product.
class MlDetector {
public:
  MlDetector(const std::vector<CMatrix> &symbols, int N) : N_(N) {
    if (symbols.empty())
      throw SizeError("detector needs at least one symbol");
    if (N < 1)
      throw DomainError("N must be at least 1");
    T_ = static_cast<int>(symbols.front().rows());
    const auto K = static_cast<Eigen::Index>(symbols.size());
    packed_.resize(static_cast<Eigen::Index>(T_) * T_, K);
    offset_.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      const CMatrix &x = symbols[static_cast<std::size_t>(k)];
      if (x.rows() != T_)
        throw DimensionError("all symbols must share T");
      CMatrix a = x.adjoint() * x;
      a.diagonal().array() += 1.0;
      const auto llt = hpd_factor(a);
      const CMatrix v = llt.matrixU().solve<Eigen::OnTheRight>(x);
      const CMatrix q = v * v.adjoint();
      packed_.col(k) = pack(q, true);
      offset_(k) = N_ * log_det(llt);
      if (!packed_.col(k).allFinite() || !std::isfinite(offset_(k)))
        throw LinAlgError("detector statistics are not finite");
    }
  }

  [[nodiscard]] std::size_t size() const {
    return static_cast<std::size_t>(packed_.cols());
  }

  /// Score of every symbol (log-likelihood up to a common constant).
  [[nodiscard]] Eigen::VectorXd scores(const CMatrix &Y) const {
    if (Y.rows() != T_ || Y.cols() != N_)
      throw DimensionError("Y must be T×N");
    const CMatrix r = Y * Y.adjoint();
    return packed_.transpose() * pack(r, false) - offset_;
  }

  /// Index of the largest score; ties go to the lowest index.
  [[nodiscard]] std::size_t detect(const CMatrix &Y) const {
    const Eigen::VectorXd s = scores(Y);
    std::size_t best = 0;
    for (Eigen::Index k = 1; k < s.size(); ++k)
      if (s(k) > s(static_cast<Eigen::Index>(best)))
        best = static_cast<std::size_t>(k);
    return best;
  }

private:
  // Hermitian h ↦ real vector with ⟨pack(q, true), pack(r, false)⟩ = tr(q r).
  [[nodiscard]] Eigen::VectorXd pack(const CMatrix &h, bool doubled) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(T_) * T_);
    const double f = doubled ? 2.0 : 1.0;
    Eigen::Index k = 0;
    for (int i = 0; i < T_; ++i)
      out(k++) = h(i, i).real();
    for (int i = 0; i < T_; ++i)
      for (int j = i + 1; j < T_; ++j) {
        out(k++) = f * h(i, j).real();
        out(k++) = f * h(i, j).imag();
      }
    return out;
  }

  int N_;
  int T_ = 0;
  Eigen::MatrixXd packed_;
  Eigen::VectorXd offset_;
};

/// One-shot ML detection over the joint codebook.
inline std::size_t ml_detect(const CMatrix &Y, const JointCodebook &joint) {
  return MlDetector(joint.symbols(), static_cast<int>(Y.cols())).detect(Y);
}

/// Monte-Carlo estimate of P(L(x→x') ≤ 0 | x sent).
inline double estimate_pep(const CMatrix &x, const CMatrix &xp, int N,
                           long long trials, std::uint64_t seed) {
  if (trials < 1)
    throw ConfigError("trials must be at least 1");
  if (x.rows() != xp.rows())
    throw DimensionError("x and x' must have the same number of rows");
  const auto a = hpd_factor(covariance_of(x));
  const auto ap = hpd_factor(covariance_of(xp));
  const double offset = N * (log_det(ap) - log_det(a));
  std::mt19937_64 rng(seed);
  long long hits = 0;
  for (long long t = 0; t < trials; ++t) {
    const CMatrix Y = sample_block(x, N, rng);
    const double l =
        offset - resolvent_quadratic(a, Y) + resolvent_quadratic(ap, Y);
    hits += l <= 0.0 ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

/// Joint and per-user symbol error rates of ML detection over `joint`.
/// The codebook directions are kept and rescaled to each grid SNR.
inline SerResult simulate_ser(const JointCodebook &joint, const SystemConfig &sys,
                              const SimConfig &sim) {
  sim.validate();
  if (joint.T() != sys.T || joint.user1().M() != sys.M1 ||
      joint.user2().M() != sys.M2)
    throw DimensionError("codebook shape does not match the system");
  const auto K = static_cast<long long>(joint.size());
  SerResult out;
  for (std::size_t k = 0; k < sim.snr_grid.size(); ++k) {
    const double snr = sim.snr_grid[k];
    const JointCodebook scaled = joint.rescaled(snr);
    const MlDetector det(scaled.symbols(), sys.N);
    const auto &xs = scaled.symbols();
    const auto counts = detail::run_blocks(
        sim.num_blocks, sim.workers, [&](long long first, long long last) {
          detail::ErrorCounts c;
          for (long long b = first; b < last; ++b) {
            std::mt19937_64 rng(detail::block_seed(sim.seed, k, b));
            std::uniform_int_distribution<long long> pick(0, K - 1);
            const auto sent = static_cast<std::size_t>(pick(rng));
            const CMatrix Y = sample_block(xs[sent], sys.N, rng);
            const std::size_t got = det.detect(Y);
            if (got != sent) {
              const auto [i, l] = scaled.split(sent);
              const auto [gi, gl] = scaled.split(got);
              ++c.joint;
              c.user1 += gi != i ? 1 : 0;
              c.user2 += gl != l ? 1 : 0;
            }
          }
          return c;
        });
    out.points.push_back(detail::finish_point(snr, counts, sim.num_blocks));
  }
  return out;
}

} // namespace ncmac
