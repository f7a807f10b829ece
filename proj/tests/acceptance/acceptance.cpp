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

// Acceptance suite: one PASS/FAIL line per criterion. Every tolerance is a
// named constant below. Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ncmac/metrics.hpp"
#include "ncmac/optimizer.hpp"
#include "ncmac/partition.hpp"
#include "ncmac/pilot.hpp"
#include "ncmac/simulator.hpp"
#include "oracle.hpp"

using namespace ncmac;

namespace {

// 1
constexpr int kGradPoints = 20;
constexpr double kGradFdStep = 1e-6;
constexpr double kGradRelTol = 1e-5;
// Pair values here are O(10^3); at ε = 0.1 the third derivative of the
// soft-min makes O(h²) truncation of a 1e-6 central difference reach 2e-5.
constexpr double kGradEpsilon = 1.0;
// 2
constexpr int kMomentPairs = 1000;
constexpr double kMomentRelTol = 1e-9;
// 3, 4
constexpr int kMcPairs = 50;
constexpr int kMcDraws = 100000;
constexpr double kMcSigmas = 4.0;
constexpr int kMcMinAgree = 48;
constexpr double kPepSigmas = 3.0;
// 5
constexpr int kBoundCodebooks = 100;
constexpr double kRoundoff = 1e-12;
// 7
constexpr double kScalingRatioTol = 0.05;
// 8
constexpr int kSerBlocks = 100000;
constexpr double kSerSnrDb = 10.0;
constexpr double kOptSerLo = 9e-4, kOptSerHi = 4e-3;
constexpr double kPilotMlLo = 2.7e-3, kPilotMlHi = 1.1e-2;
constexpr double kPilotMmseLo = 1.3e-2, kPilotMmseHi = 5.3e-2;
// 9
constexpr double kDesignDminFloor = 90.0;
constexpr double kDesignGapTol = 0.05;
// 10
constexpr int kLargeBlocks = 10000;
// 11
constexpr int kCandidates = 50;
// 12
constexpr int kBlockEigMatrices = 100;
constexpr double kEigTol = 1e-10;

// settings of the dmin design shared by the SER and metric criteria
constexpr int kDesignBits = 5;
constexpr int kDesignIters = 500;
constexpr double kDesignEpsilon = 200.0;
constexpr std::uint64_t kDesignSeed = 1;

double db(double v) { return std::pow(10.0, v / 10.0); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char *name, const std::function<Outcome()> &fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception &e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  failures += o.pass ? 0 : 1;
  std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id,
              name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

template <class... A> std::string fmt(const char *f, A... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Outcome gradient_fidelity() {
  const SystemConfig sys{5, 1, 1, 1, db(30), db(30)};
  double worst = 0.0;
  std::string where;
  for (auto c : {Criterion::MeanPllr, Criterion::Dmin, Criterion::AltD12,
                 Criterion::AltD21, Criterion::Chordal}) {
    OptimizerConfig cfg;
    cfg.criterion = c;
    cfg.design_snr = db(30);
    cfg.epsilon = c == Criterion::Chordal ? 0.01 : kGradEpsilon;
    for (int k = 0; k < kGradPoints; ++k) {
      const auto p = ObliquePoint::random(5, 4, 4, 1000 + k);
      const auto obj = make_objective(p, cfg, sys);
      const CMatrix g = euclidean_gradient(p, cfg, sys);
      const CMatrix fd = oracle::fd_gradient(
          [&](const CMatrix &C) { return obj.value(C).g; }, p.matrix(), kGradFdStep);
      const double e = oracle::max_rel_error(g, fd);
      if (e > worst) {
        worst = e;
        where = std::string(to_string(c));
      }
    }
  }
  return {worst <= kGradRelTol, fmt("max rel err %.2e (%s), tol %.0e", worst,
                                    where.c_str(), kGradRelTol)};
}

Outcome moment_equivalence() {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> logp(0.0, 3.0);
  double worst = 0.0;
  for (int k = 0; k < kMomentPairs; ++k) {
    const int T = k % 2 == 0 ? 2 : 5;
    const double P = std::pow(10.0, logp(rng));
    const JointCodebook j(random_grassmannian(T, 1, 2, P, rng()),
                          random_grassmannian(T, 1, 2, P, rng()));
    const CMatrix &x = j.symbols()[0];
    const CMatrix &xp = j.symbols()[static_cast<std::size_t>(1 + k % 3)];
    const auto s = pair_stats(x, xp, 4);
    worst = std::max(worst, std::abs(s.mean_pllr - mean_pllr_direct(x, xp, 4)) /
                                s.mean_pllr);
    worst = std::max(worst, std::abs(s.var_pllr - var_pllr_direct(x, xp, 4)) /
                                s.var_pllr);
  }
  return {worst <= kMomentRelTol,
          fmt("max rel err %.2e over %d pairs, tol %.0e", worst, kMomentPairs,
              kMomentRelTol)};
}

struct McPair {
  CMatrix x, xp;
  PairStats stats;
  double mean = 0.0, var = 0.0, m4 = 0.0, pep = 0.0;
};

const std::vector<McPair> &mc_pairs() {
  static const std::vector<McPair> pairs = [] {
    std::vector<McPair> out;
    std::mt19937_64 rng(3);
    const int N = 4;
    for (int k = 0; k < kMcPairs; ++k) {
      const int T = 2 + k % 4;
      const double P = db(-5.0 + 2.5 * (k % 5));
      const JointCodebook j(random_grassmannian(T, 1, 2, P, rng()),
                            random_grassmannian(T, 1, 1, P, rng()));
      McPair p{j.symbols()[0], j.symbols()[1], pair_stats(j.symbols()[0], j.symbols()[1], N)};
      std::vector<double> l(static_cast<std::size_t>(kMcDraws));
      std::mt19937_64 draw(100 + static_cast<std::uint64_t>(k));
      for (auto &v : l)
        v = pllr(sample_block(p.x, N, draw), p.x, p.xp);
      double s = 0.0;
      long long hits = 0;
      for (double v : l) {
        s += v;
        hits += v <= 0.0 ? 1 : 0;
      }
      p.mean = s / kMcDraws;
      double s2 = 0.0, s4 = 0.0;
      for (double v : l) {
        const double d = v - p.mean;
        s2 += d * d;
        s4 += d * d * d * d;
      }
      p.var = s2 / (kMcDraws - 1);
      p.m4 = s4 / kMcDraws;
      p.pep = static_cast<double>(hits) / kMcDraws;
      out.push_back(std::move(p));
    }
    return out;
  }();
  return pairs;
}

Outcome mc_moments() {
  int agree = 0;
  for (const auto &p : mc_pairs()) {
    const double se_mean = std::sqrt(p.var / kMcDraws);
    const double se_var = std::sqrt(std::max(0.0, p.m4 - p.var * p.var) / kMcDraws);
    const bool ok = std::abs(p.mean - p.stats.mean_pllr) <= kMcSigmas * se_mean &&
                    std::abs(p.var - p.stats.var_pllr) <= kMcSigmas * se_var;
    agree += ok ? 1 : 0;
  }
  return {agree >= kMcMinAgree,
          fmt("%d/%d pairs within %.0f SE (need %d)", agree, kMcPairs, kMcSigmas,
              kMcMinAgree)};
}

Outcome cantelli_validity() {
  int ok = 0;
  double min_pep = 1.0, max_pep = 0.0;
  for (const auto &p : mc_pairs()) {
    const double se = std::sqrt(p.pep * (1 - p.pep) / kMcDraws);
    ok += p.pep <= p.stats.cantelli + kPepSigmas * se ? 1 : 0;
    min_pep = std::min(min_pep, p.pep);
    max_pep = std::max(max_pep, p.pep);
  }
  return {ok == kMcPairs, fmt("%d/%d pairs below bound + %.0f SE (PEP range %.1e..%.1e)",
                              ok, kMcPairs, kPepSigmas, min_pep, max_pep)};
}

// Half the bases are random lines in C^12, half are chordal packings in C^5;
// both keep c well below the point where the bound turns vacuous.
Codebook bound_base(int k, double P) {
  const auto seed = static_cast<std::uint64_t>(5000 + k);
  const int n = 4 + 2 * (k % 3);
  if (k % 2 == 0)
    return random_grassmannian(12, 1, n, P, seed);
  OptimizerConfig cfg;
  cfg.criterion = Criterion::Chordal;
  cfg.epsilon = 0.01;
  cfg.max_iters = 100;
  const SystemConfig sys{5, 1, 1, 1, P, P};
  return optimize(ObliquePoint::random(5, n, 0, seed), cfg, sys).point.user_codebook(1, P);
}

Outcome partition_bound() {
  int ok = 0, total = 0, informative = 0;
  double tightest = 1e300;
  for (double pdb : {10.0, 30.0}) {
    const double P = db(pdb);
    for (int k = 0; k < kBoundCodebooks; ++k) {
      const int M = 1;
      const auto base = bound_base(k, P);
      const int T = base.T();
      const auto j = partition(base, k % 4 < 2 ? PartitionStrategy::Random
                                               : PartitionStrategy::GreedySwap,
                               static_cast<std::uint64_t>(k));
      const double c = chordal_objective(j);
      if (c > 1.0 / M)
        continue;
      ++total;
      const double bound = sufficient_bound(c, P, T, M);
      const double lhs = std::min(d12(j), d21(j));
      ok += lhs >= bound - kRoundoff * P * T ? 1 : 0;
      informative += bound > 0.0 ? 1 : 0;
      tightest = std::min(tightest, (lhs - bound) / (P * T));
    }
  }
  return {ok == total && total == 2 * kBoundCodebooks,
          fmt("%d/%d hold (%d with positive bound), min slack %.3g·PT", ok, total,
              informative, tightest)};
}

struct SharedDesign {
  JointCodebook codebook;
  double design_min = 0.0;
};

const SharedDesign &shared_design() {
  static const SharedDesign d = [] {
    const SystemConfig sys{5, 1, 1, 4, db(30), db(30)};
    OptimizerConfig cfg;
    cfg.criterion = Criterion::Dmin;
    cfg.design_snr = db(30);
    cfg.epsilon = kDesignEpsilon;
    cfg.anneal = true;
    cfg.max_iters = kDesignIters;
    const int K = 1 << kDesignBits;
    const auto res = optimize(ObliquePoint::random(5, K, K, kDesignSeed), cfg, sys);
    return SharedDesign{*res.codebook, res.best_min_f};
  }();
  return d;
}

Outcome sandwich() {
  std::vector<JointCodebook> corpus;
  for (std::uint64_t s = 0; s < 30; ++s) {
    const int M = 1 + static_cast<int>(s % 2);
    const int T = 2 * M + static_cast<int>(s % 4);
    const double P = db(static_cast<double>(s % 4) * 10.0);
    corpus.emplace_back(random_grassmannian(T, M, 3 + s % 3, P, 2 * s),
                        random_grassmannian(T, M, 2 + s % 4, P, 2 * s + 1));
    corpus.push_back(partition(random_grassmannian(T, M, 6 + s % 5, P, 700 + s),
                               PartitionStrategy::Random, s));
  }
  corpus.push_back(shared_design().codebook.rescaled(db(20)));
  int ok = 0;
  double worst_gap = 0.0;
  for (const auto &j : corpus) {
    const int M = j.user1().M();
    const double lo = std::min(d12(j), d21(j));
    const double dm = d_min(j).value;
    const bool hold = lo <= dm + kRoundoff * std::max(1.0, dm) &&
                      dm <= lo + M + kRoundoff * std::max(1.0, dm);
    ok += hold ? 1 : 0;
    worst_gap = std::max(worst_gap, (dm - lo) / M);
  }
  const int n = static_cast<int>(corpus.size());
  return {ok == n, fmt("%d/%d codebooks, max (d_min − min{d12,d21})/M = %.3f", ok, n,
                       worst_gap)};
}

Outcome dvalue_scaling() {
  std::mt19937_64 rng(7);
  int bounded = 0, stable = 0;
  const int pairs = 50;
  double worst_ratio = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const int T = 4 + k % 3;
    const CMatrix q = orthonormal_factor(complex_gaussian(T, 2, rng));
    const CMatrix u = orthonormal_factor(complex_gaussian(2, 2, rng));
    const CMatrix r = orthonormal_factor(complex_gaussian(T, 2, rng));
    // equal span: x' = x·U, d stays below the rank
    bool b = true;
    for (double P : {1.0, 1e2, 1e4}) {
      const CMatrix x = std::sqrt(P * T / 2) * q;
      b = b && pair_stats(x, x * u, 1).d_value <= 2.0;
    }
    bounded += b ? 1 : 0;
    // distinct spans: d grows linearly in P
    auto ratio = [&](double P) {
      const double s = std::sqrt(P * T / 2);
      return pair_stats(s * q, s * r, 1).d_value / P;
    };
    const double rel = std::abs(ratio(1e5) / ratio(1e4) - 1.0);
    worst_ratio = std::max(worst_ratio, rel);
    stable += rel <= kScalingRatioTol ? 1 : 0;
  }
  return {bounded == pairs && stable == pairs,
          fmt("equal span bounded %d/%d, distinct span d/P stable %d/%d (max change "
              "%.2e)",
              bounded, pairs, stable, pairs, worst_ratio)};
}

struct SerTriple {
  double opt = 0.0, ml = 0.0, mmse = 0.0;
};

Outcome ser_at_design_snr() {
  const SystemConfig sys{5, 1, 1, 4, db(kSerSnrDb), db(kSerSnrDb)};
  SimConfig sim;
  sim.snr_grid = {db(kSerSnrDb)};
  sim.num_blocks = kSerBlocks;
  sim.seed = 11;
  SerTriple n;
  n.opt = simulate_ser(shared_design().codebook, sys, sim).points[0].joint_ser;
  const auto layout = PilotLayout::make(5, kDesignBits);
  sim.scheme = Scheme::PilotMl;
  n.ml = simulate_pilot_ser(layout, sys, sim).points[0].joint_ser;
  sim.scheme = Scheme::PilotMmse;
  n.mmse = simulate_pilot_ser(layout, sys, sim).points[0].joint_ser;
  const bool a = n.opt >= kOptSerLo && n.opt <= kOptSerHi;
  const bool b = n.ml >= kPilotMlLo && n.ml <= kPilotMlHi;
  const bool c = n.mmse >= kPilotMmseLo && n.mmse <= kPilotMmseHi;
  const bool d = n.opt < n.ml && n.ml < n.mmse;
  return {a && b && c && d,
          fmt("SER@10dB optimized %.2e%s, pilot-ML %.2e%s, pilot-MMSE %.2e%s, "
              "ordering %s",
              n.opt, a ? "" : "(out)", n.ml, b ? "" : "(out)", n.mmse,
              c ? "" : "(out)", d ? "ok" : "violated")};
}

Outcome design_metrics() {
  const auto &cb = shared_design().codebook;
  const double d20 = d_min(cb.rescaled(db(20))).value;
  double worst = 0.0;
  for (double s : {20.0, 25.0, 30.0}) {
    const auto j = cb.rescaled(db(s));
    const double dm = d_min(j).value;
    worst = std::max(worst, std::abs(dm - min_mean_pllr(j)) / dm);
  }
  return {d20 >= kDesignDminFloor && worst <= kDesignGapTol,
          fmt("d_min@20dB %.2f (floor %.0f), max |d_min − minE[L]/N|/d_min %.3f "
              "(tol %.2f)",
              d20, kDesignDminFloor, worst, kDesignGapTol)};
}

Outcome partition_vs_pilot() {
  const int bits = 8;
  const int K = 1 << bits;
  const SystemConfig sys{5, 1, 1, 4, 1.0, 1.0};
  OptimizerConfig cfg;
  cfg.criterion = Criterion::Chordal;
  cfg.epsilon = 0.01;
  cfg.anneal = true;
  cfg.max_iters = 200;
  const auto base = optimize(ObliquePoint::random(5, 2 * K, 0, 17), cfg, sys)
                        .point.user_codebook(1, 1.0);
  const auto joint = partition(base, PartitionStrategy::Random, 17);
  SimConfig sim;
  sim.snr_grid = {db(4), db(8)};
  sim.num_blocks = kLargeBlocks;
  sim.seed = 19;
  const auto part = simulate_ser(joint, sys, sim);
  sim.scheme = Scheme::PilotMl;
  const auto pilot = simulate_pilot_ser(PilotLayout::make(5, bits), sys, sim);
  const bool ok = part.points[0].joint_ser <= pilot.points[0].joint_ser &&
                  part.points[1].joint_ser <= pilot.points[1].joint_ser;
  return {ok, fmt("4dB partition %.3f vs pilot-ML %.3f; 8dB partition %.4f vs "
                  "pilot-ML %.4f",
                  part.points[0].joint_ser, pilot.points[0].joint_ser,
                  part.points[1].joint_ser, pilot.points[1].joint_ser)};
}

Outcome single_user_equivalence() {
  int agree = 0;
  const int sets = 4;
  for (int set = 0; set < sets; ++set) {
    const int M = 1 + set % 2;
    const int T = 4 + set / 2;
    const double P = db(10.0 * set);
    std::size_t best_d = 0, best_c = 0;
    double max_min_d = -1e300, min_max_c = 1e300;
    for (int k = 0; k < kCandidates; ++k) {
      const auto cb = random_grassmannian(T, M, 8, P,
                                          static_cast<std::uint64_t>(set * 1000 + k));
      double min_d = 1e300, max_c = 0.0;
      for (std::size_t a = 0; a < cb.size(); ++a)
        for (std::size_t b = 0; b < cb.size(); ++b) {
          if (a == b)
            continue;
          min_d = std::min(min_d, single_user_d(cb[a], cb[b], P, T, M));
          max_c = std::max(max_c, (cb[b].adjoint() * cb[a]).squaredNorm());
        }
      if (min_d > max_min_d) {
        max_min_d = min_d;
        best_d = static_cast<std::size_t>(k);
      }
      if (max_c < min_max_c) {
        min_max_c = max_c;
        best_c = static_cast<std::size_t>(k);
      }
    }
    agree += best_d == best_c ? 1 : 0;
  }
  return {agree == sets, fmt("argmax min d = argmin max corr on %d/%d candidate "
                             "sets of %d codebooks",
                             agree, sets, kCandidates)};
}

Outcome block_eigenvalues() {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> top(0.05, 1.0);
  double worst = 0.0;
  for (int k = 0; k < kBlockEigMatrices; ++k) {
    const int m = dim(rng);
    const int n = dim(rng);
    CMatrix A = complex_gaussian(m, n, rng);
    Eigen::JacobiSVD<CMatrix> svd0(A);
    A *= top(rng) / svd0.singularValues()(0);
    CMatrix Q = CMatrix::Identity(m + n, m + n);
    Q.topRightCorner(m, n) = A;
    Q.bottomLeftCorner(n, m) = A.adjoint();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(Q, Eigen::EigenvaluesOnly);
    std::vector<double> expect;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<CMatrix>(A).singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      expect.push_back(1.0 + sv(i));
      expect.push_back(1.0 - sv(i));
    }
    while (static_cast<int>(expect.size()) < m + n)
      expect.push_back(1.0);
    std::sort(expect.begin(), expect.end());
    for (int i = 0; i < m + n; ++i)
      worst = std::max(worst, std::abs(es.eigenvalues()(i) - expect[static_cast<std::size_t>(i)]));
  }
  return {worst <= kEigTol, fmt("max eigenvalue error %.2e over %d matrices, tol %.0e",
                                worst, kBlockEigMatrices, kEigTol)};
}

} // namespace

int main() {
  report(1, "gradient fidelity", gradient_fidelity);
  report(2, "moment-formula equivalence", moment_equivalence);
  report(3, "Monte-Carlo PLLR moments", mc_moments);
  report(4, "Cantelli validity", cantelli_validity);
  report(5, "partition sufficient bound", partition_bound);
  report(6, "d_min sandwich", sandwich);
  report(7, "d-value scaling statements", dvalue_scaling);
  report(8, "SER at 10 dB, optimized vs pilot", ser_at_design_snr);
  report(9, "designed d_min and mean-PLLR", design_metrics);
  report(10, "partitioning vs pilot-ML", partition_vs_pilot);
  report(11, "single-user criterion equivalence", single_user_equivalence);
  report(12, "block eigenvalue structure", block_eigenvalues);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
