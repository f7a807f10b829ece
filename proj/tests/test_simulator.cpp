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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ncmac/metrics.hpp"
#include "ncmac/simulator.hpp"
#include "oracle.hpp"

using namespace ncmac;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("scheme names and SimConfig", "[simulator]") {
  for (auto s : {Scheme::JointMl, Scheme::PilotMl, Scheme::PilotMmse})
    CHECK(parse_scheme(to_string(s)) == s);
  CHECK_THROWS_AS(parse_scheme("zf"), ConfigError);
  SimConfig c;
  c.snr_grid = {10.0};
  CHECK_NOTHROW(c.validate());
  c.num_blocks = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.num_blocks = 1;
  c.snr_grid = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("sample_block statistics", "[simulator]") {
  std::mt19937_64 a(5);
  std::mt19937_64 b(5);
  const CMatrix x = random_grassmannian(3, 2, 1, 2.0, 1)[0];
  CHECK(sample_block(x, 2, a) == sample_block(x, 2, b));

  // E[Y Yᴴ]/N = I + x xᴴ, elementwise within 3σ (σ from the sample itself)
  const int N = 1;
  const int draws = 100000;
  std::mt19937_64 rng(7);
  const CMatrix cov = oracle::dense_cov(x);
  CMatrix sum = CMatrix::Zero(3, 3);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(3, 3);
  for (int k = 0; k < draws; ++k) {
    const CMatrix Y = sample_block(x, N, rng);
    const CMatrix r = Y * Y.adjoint();
    sum += r;
    sq += (r - cov).cwiseAbs2();
  }
  const CMatrix mean = sum / draws;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt(sq(i, j) / draws / draws);
      CHECK(std::abs(mean(i, j) - cov(i, j)) <= 3.0 * se * std::sqrt(2.0));
    }

  // noise only
  std::mt19937_64 r2(8);
  double e = 0.0;
  for (int k = 0; k < 20000; ++k)
    e += sample_block(CMatrix::Zero(2, 1), 3, r2).squaredNorm();
  CHECK_THAT(e / 20000 / 6, WithinAbs(1.0, 0.02));
}

TEST_CASE("ML detector", "[simulator]") {
  const JointCodebook single(random_grassmannian(4, 1, 1, 10.0, 1),
                             random_grassmannian(4, 1, 1, 10.0, 2));
  std::mt19937_64 rng(1);
  CHECK(ml_detect(complex_gaussian(4, 2, rng), single) == 0);

  const JointCodebook j(random_grassmannian(4, 1, 4, 10.0, 3),
                        random_grassmannian(4, 1, 4, 10.0, 4));
  const MlDetector det(j.symbols(), 2);
  for (int k = 0; k < 100; ++k) {
    const CMatrix Y = complex_gaussian(4, 2, rng) * 3.0;
    std::size_t best = 0;
    double bl = -1e300;
    for (std::size_t a = 0; a < j.size(); ++a) {
      const double l = oracle::log_likelihood(Y, j.symbols()[a]);
      if (l > bl) {
        bl = l;
        best = a;
      }
    }
    CHECK(det.detect(Y) == best);
    const Eigen::VectorXd s = det.scores(Y);
    const double shift = s(0) - oracle::log_likelihood(Y, j.symbols()[0]);
    for (std::size_t a = 1; a < j.size(); ++a)
      CHECK_THAT(s(static_cast<Eigen::Index>(a)) - shift,
                 WithinRel(oracle::log_likelihood(Y, j.symbols()[a]), 1e-9));
  }

  // high SNR: symbol recovered
  const JointCodebook hi = j.rescaled(1e6);
  const MlDetector dh(hi.symbols(), 4);
  int ok = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t sent = static_cast<std::size_t>(k) % hi.size();
    ok += dh.detect(sample_block(hi.symbols()[sent], 4, rng)) == sent ? 1 : 0;
  }
  CHECK(ok >= 999);

  // ties resolve to the lowest index
  const CMatrix x = random_grassmannian(3, 1, 1, 1.0, 9)[0];
  const MlDetector tie({x, x, x}, 1);
  CHECK(tie.detect(complex_gaussian(3, 1, rng)) == 0);
}

TEST_CASE("pairwise error estimate", "[simulator]") {
  const auto cb = random_grassmannian(3, 1, 2, 3.0, 5);
  CHECK(estimate_pep(cb[0], cb[0], 2, 100, 1) == 1.0);
  CHECK_THROWS_AS(estimate_pep(cb[0], cb[1], 2, 0, 1), ConfigError);

  const long long trials = 20000;
  const auto s = pair_stats(cb[0], cb[1], 2);
  const double p = estimate_pep(cb[0], cb[1], 2, trials, 3);
  CHECK(p <= s.cantelli + 3.0 * std::sqrt(s.cantelli * (1 - s.cantelli) / trials));

  // more receive antennas drive the error to zero
  const auto close = random_grassmannian(3, 1, 2, 0.5, 6);
  double prev = 1.0;
  for (int N : {4, 16, 64}) {
    const double q = estimate_pep(close[0], close[1], N, 4000, 7);
    CHECK(q <= prev);
    prev = q;
  }
  CHECK(prev < 0.02);
}

TEST_CASE("simulate_ser", "[simulator]") {
  const SystemConfig sys{4, 1, 1, 2, 1.0, 1.0};
  const JointCodebook j(random_grassmannian(4, 1, 2, 1.0, 1),
                        random_grassmannian(4, 1, 2, 1.0, 2));
  SimConfig sim;
  sim.snr_grid = {1e-6, 10.0, 100.0};
  sim.num_blocks = 4000;
  sim.seed = 3;
  const auto r = simulate_ser(j, sys, sim);
  REQUIRE(r.points.size() == 3);
  for (const auto &p : r.points) {
    CHECK(p.joint_ser >= p.user1_ser);
    CHECK(p.joint_ser >= p.user2_ser);
    CHECK(p.joint_ser <= 1.0);
    CHECK(p.blocks == 4000);
  }
  // no information at vanishing SNR
  CHECK_THAT(r.points[0].joint_ser, WithinAbs(0.75, 4 * std::sqrt(0.75 * 0.25 / 4000)));
  CHECK(r.points[2].joint_ser < r.points[1].joint_ser);

  // determinism, also across worker counts
  const auto again = simulate_ser(j, sys, sim);
  sim.workers = 3;
  const auto threaded = simulate_ser(j, sys, sim);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(again.points[k].joint_ser == r.points[k].joint_ser);
    CHECK(threaded.points[k].joint_ser == r.points[k].joint_ser);
    CHECK(threaded.points[k].user1_ser == r.points[k].user1_ser);
  }

  const JointCodebook one(random_grassmannian(4, 1, 1, 1.0, 1),
                          random_grassmannian(4, 1, 1, 1.0, 2));
  CHECK(simulate_ser(one, sys, sim).points[0].joint_ser == 0.0);
  CHECK_THROWS_AS(simulate_ser(j, SystemConfig{5, 1, 1, 2, 1.0, 1.0}, sim),
                  DimensionError);
}

TEST_CASE("union-bound sandwich on a small codebook", "[simulator][slow]") {
  const SystemConfig sys{3, 1, 1, 2, 3.0, 3.0};
  const JointCodebook j(random_grassmannian(3, 1, 2, 3.0, 11),
                        random_grassmannian(3, 1, 2, 3.0, 12));
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd pep = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      if (a != b)
        pep(a, b) = estimate_pep(j.symbols()[static_cast<std::size_t>(a)],
                                 j.symbols()[static_cast<std::size_t>(b)], 2,
                                 20000, static_cast<std::uint64_t>(a * n + b));
  const auto [lo, hi] = union_bounds(pep);
  SimConfig sim;
  sim.snr_grid = {3.0};
  sim.num_blocks = 20000;
  const double ser = simulate_ser(j, sys, sim).points[0].joint_ser;
  const double se = std::sqrt(ser * (1 - ser) / 20000);
  CHECK(ser >= lo - 3 * se);
  CHECK(ser <= hi + 3 * se);
}
