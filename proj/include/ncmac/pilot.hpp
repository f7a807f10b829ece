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
 * @file pilot.hpp
 * @brief Pilot-based baseline: orthogonal training slots followed by QAM.
 *
 * Single transmit antenna per user. Slot 0 carries the user-1 pilot, slot 1
 * the user-2 pilot (each user is silent in the other's pilot slot), and
 * slots 2..T−1 carry one QAM symbol per user. The B-bit message of a user is
 * split over the data slots, earlier slots taking the larger constellations.
 *
 * Each active slot of a user has the same average energy, so a block carries
 * P·T on average. Constant-modulus allocations (BPSK / 4-QAM only) meet P·T
 * exactly on every block.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ncmac/constellation.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/linalg.hpp"
#include "ncmac/simulator.hpp"

namespace ncmac {

/// Largest QAM order per data slot (1024-QAM).
inline constexpr int kMaxSlotBits = 10;
/// Exhaustive ML scan guard on the number of joint pilot blocks.
inline constexpr std::uint64_t kMaxPilotJointSize = 1ULL << 20;

/// Gray-labelled QAM with unit average energy. Label k ↦ points[k].
/// 1 bit: BPSK; even b: square; odd b ≥ 3: 2^⌈b/2⌉ × 2^⌊b/2⌋ rectangle.
inline std::vector<cd> qam_points(int bits) {
  if (bits < 1 || bits > kMaxSlotBits)
    throw ConfigError("QAM bits per slot must lie in [1, 10]");
  if (bits == 1)
    return {cd(-1.0, 0.0), cd(1.0, 0.0)};
  const int bi = (bits + 1) / 2;
  const int bq = bits / 2;
  const int ni = 1 << bi;
  const int nq = 1 << bq;
  // Gray code g ↦ PAM level index
  auto level = [](int g, int n) {
    int b = g;
    for (int s = 1; s < n; s <<= 1)
      b ^= b >> s;
    return 2.0 * b - (n - 1);
  };
  std::vector<cd> pts(static_cast<std::size_t>(ni) * nq);
  double energy = 0.0;
  for (int k = 0; k < ni * nq; ++k) {
    const cd p(level(k >> bq, ni), level(k & (nq - 1), nq));
    pts[static_cast<std::size_t>(k)] = p;
    energy += std::norm(p);
  }
  const double g = 1.0 / std::sqrt(energy / (ni * nq));
  for (auto &p : pts)
    p *= g;
  return pts;
}

/// Slot structure of the pilot scheme for one user.
struct PilotLayout {
  int T = 3;
  int bits = 1;
  /// Bits carried by data slot s (s = 0 .. T−3).
  std::vector<int> slot_bits;
  /// Energy of the pilot slot relative to an active data slot.
  double pilot_ratio = 1.0;

  /// Even split of `bits` over T−2 data slots, larger sizes first.
  static PilotLayout make(int T, int bits, double pilot_ratio = 1.0) {
    if (T < 3)
      throw ConfigError("pilot scheme needs T ≥ 3");
    if (bits < 1)
      throw ConfigError("pilot scheme needs at least one bit per user");
    if (!(pilot_ratio > 0.0))
      throw ConfigError("pilot energy ratio must be positive");
    const int slots = T - 2;
    if (bits > slots * kMaxSlotBits)
      throw ConfigError("bit budget exceeds 1024-QAM on every data slot");
    PilotLayout l{T, bits, std::vector<int>(static_cast<std::size_t>(slots)),
                  pilot_ratio};
    for (int s = 0; s < slots; ++s)
      l.slot_bits[static_cast<std::size_t>(s)] =
          bits / slots + (s < bits % slots ? 1 : 0);
    return l;
  }

  [[nodiscard]] int active_data_slots() const {
    return static_cast<int>(std::count_if(slot_bits.begin(), slot_bits.end(),
                                          [](int b) { return b > 0; }));
  }
  /// Average energy of one active data slot at SNR P.
  [[nodiscard]] double data_energy(double P) const {
    return P * T / (pilot_ratio + active_data_slots());
  }
  [[nodiscard]] double pilot_amplitude(double P) const {
    return std::sqrt(pilot_ratio * data_energy(P));
  }
  [[nodiscard]] std::uint64_t messages() const { return 1ULL << bits; }
};

/// Splits a B-bit message into per-slot labels (first slot = high bits).
inline std::vector<int> slot_labels(const PilotLayout &layout,
                                    std::uint64_t message) {
  std::vector<int> out(layout.slot_bits.size());
  int shift = layout.bits;
  for (std::size_t s = 0; s < out.size(); ++s) {
    const int b = layout.slot_bits[s];
    shift -= b;
    out[s] = static_cast<int>((message >> shift) & ((1ULL << b) - 1));
  }
  return out;
}

inline std::uint64_t join_labels(const PilotLayout &layout,
                                 const std::vector<int> &labels) {
  std::uint64_t m = 0;
  for (std::size_t s = 0; s < labels.size(); ++s)
    m = (m << layout.slot_bits[s]) | static_cast<std::uint64_t>(labels[s]);
  return m;
}

/// T×1 block of user k (1 or 2) for one message at SNR P.
inline CMatrix pilot_user_block(const PilotLayout &layout, int user,
                                std::uint64_t message, double P) {
  if (message >= layout.messages())
    throw DomainError("message exceeds the bit budget");
  CMatrix x = CMatrix::Zero(layout.T, 1);
  x(user == 1 ? 0 : 1, 0) = layout.pilot_amplitude(P);
  const double amp = std::sqrt(layout.data_energy(P));
  const auto labels = slot_labels(layout, message);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    const int b = layout.slot_bits[s];
    if (b == 0)
      continue;
    x(static_cast<Eigen::Index>(s) + 2, 0) =
        amp * qam_points(b)[static_cast<std::size_t>(labels[s])];
  }
  return x;
}

/// Joint T×2 symbol [x1 x2] for messages (m1, m2).
inline CMatrix pilot_encode(std::uint64_t m1, std::uint64_t m2,
                            const PilotLayout &layout, double P) {
  CMatrix x(layout.T, 2);
  x << pilot_user_block(layout, 1, m1, P), pilot_user_block(layout, 2, m2, P);
  return x;
}

/// Every pilot block of both users as a joint codebook (index m1·2^B + m2).
inline JointCodebook pilot_codebook(const PilotLayout &layout, double P) {
  const std::uint64_t n = layout.messages();
  if (n * n > kMaxPilotJointSize)
    throw ConfigError("pilot joint codebook exceeds the exhaustive-scan limit");
  std::vector<CMatrix> u1;
  std::vector<CMatrix> u2;
  for (std::uint64_t m = 0; m < n; ++m) {
    u1.push_back(pilot_user_block(layout, 1, m, P));
    u2.push_back(pilot_user_block(layout, 2, m, P));
  }
  return {Codebook(std::move(u1), P, false), Codebook(std::move(u2), P, false)};
}

/// Non-coherent ML detection over all pilot blocks.
class PilotMlDetector {
public:
  PilotMlDetector(const PilotLayout &layout, double P, int N)
      : codebook_(pilot_codebook(layout, P)), det_(codebook_.symbols(), N) {}

  [[nodiscard]] std::pair<std::uint64_t, std::uint64_t>
  detect(const CMatrix &Y) const {
    const auto [i, l] = codebook_.split(det_.detect(Y));
    return {i, l};
  }

private:
  JointCodebook codebook_;
  MlDetector det_;
};

inline std::pair<std::uint64_t, std::uint64_t>
pilot_ml_detect(const CMatrix &Y, const PilotLayout &layout, double P) {
  return PilotMlDetector(layout, P, static_cast<int>(Y.cols())).detect(Y);
}

/// Coherent receiver: per-antenna scalar MMSE channel estimates from the
/// pilot slots, a two-user linear MMSE equalizer per data slot and
/// nearest-point QAM demapping.
///
/// With `count_estimation_error` the equalizer treats the channel
/// estimation error as extra Gaussian noise. Equalizer outputs are divided
/// by their MMSE bias before demapping.
inline std::pair<std::uint64_t, std::uint64_t>
pilot_mmse_detect(const CMatrix &Y, const PilotLayout &layout, double P,
                  bool count_estimation_error = true) {
  if (Y.rows() != layout.T)
    throw DimensionError("Y must have T rows");
  const auto N = Y.cols();
  const double p = layout.pilot_amplitude(P);
  const double shrink = p / (p * p + 1.0);
  CMatrix H(N, 2);
  H.col(0) = shrink * Y.row(0).transpose();
  H.col(1) = shrink * Y.row(1).transpose();
  const double es = layout.data_energy(P);
  const double err_var = 1.0 / (p * p + 1.0);
  const double noise = 1.0 + (count_estimation_error ? 2.0 * es * err_var : 0.0);

  // q̂ = (Es ĤᴴĤ + σ² I)⁻¹ √Es Ĥᴴ y, then unbiased per user.
  CMatrix gram = es * H.adjoint() * H;
  gram.diagonal().array() += noise;
  const Eigen::LLT<CMatrix> llt(gram);
  const CMatrix eq = llt.solve(std::sqrt(es) * H.adjoint());
  const CMatrix bias = eq * (std::sqrt(es) * H);

  std::vector<int> lab1(layout.slot_bits.size());
  std::vector<int> lab2(layout.slot_bits.size());
  for (std::size_t s = 0; s < layout.slot_bits.size(); ++s) {
    const int b = layout.slot_bits[s];
    if (b == 0)
      continue;
    const auto pts = qam_points(b);
    const Eigen::VectorXcd q =
        eq * Y.row(static_cast<Eigen::Index>(s) + 2).transpose();
    for (int u = 0; u < 2; ++u) {
      const cd g = bias(u, u);
      const cd z = std::abs(g) > 0.0 ? q(u) / g : q(u);
      int best = 0;
      for (std::size_t k = 1; k < pts.size(); ++k)
        if (std::norm(z - pts[k]) < std::norm(z - pts[static_cast<std::size_t>(best)]))
          best = static_cast<int>(k);
      (u == 0 ? lab1 : lab2)[s] = best;
    }
  }
  return {join_labels(layout, lab1), join_labels(layout, lab2)};
}

/// SER of the pilot scheme with the ML or MMSE receiver (sim.scheme).
inline SerResult simulate_pilot_ser(const PilotLayout &layout,
                                    const SystemConfig &sys, const SimConfig &sim,
                                    bool count_estimation_error = true) {
  sim.validate();
  if (sim.scheme == Scheme::JointMl)
    throw ConfigError("simulate_pilot_ser needs a pilot scheme");
  if (sys.M1 != 1 || sys.M2 != 1)
    throw ConfigError("pilot scheme supports one transmit antenna per user");
  if (sys.T != layout.T)
    throw ConfigError("pilot layout and system disagree on T");
  const std::uint64_t n = layout.messages();
  SerResult out;
  for (std::size_t k = 0; k < sim.snr_grid.size(); ++k) {
    const double snr = sim.snr_grid[k];
    std::optional<PilotMlDetector> ml;
    if (sim.scheme == Scheme::PilotMl)
      ml.emplace(layout, snr, sys.N);
    const auto counts = detail::run_blocks(
        sim.num_blocks, sim.workers, [&](long long first, long long last) {
          detail::ErrorCounts c;
          for (long long b = first; b < last; ++b) {
            std::mt19937_64 rng(detail::block_seed(sim.seed, k, b));
            std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
            const std::uint64_t m1 = pick(rng);
            const std::uint64_t m2 = pick(rng);
            const CMatrix Y =
                sample_block(pilot_encode(m1, m2, layout, snr), sys.N, rng);
            const auto [g1, g2] =
                ml ? ml->detect(Y)
                   : pilot_mmse_detect(Y, layout, snr, count_estimation_error);
            c.user1 += g1 != m1 ? 1 : 0;
            c.user2 += g2 != m2 ? 1 : 0;
            c.joint += (g1 != m1 || g2 != m2) ? 1 : 0;
          }
          return c;
        });
    out.points.push_back(detail::finish_point(snr, counts, sim.num_blocks));
  }
  return out;
}

} // namespace ncmac
