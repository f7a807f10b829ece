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

// Run specifications and command implementations behind the `ncmac` tool.
//
// A run is one JSON object:
//
//   { "command": "generate" | "design" | "partition" | "evaluate" | "simulate",
//     "seed": 0,
//     "sys": { "T": 5, "M1": 1, "M2": 1, "N": 4, "snr_db": 30 },
//     "codebook": { "size": 64, "M": 1, "K1": 32, "K2": 32, "bits": 5 },
//     "opt": { "criterion": "dmin", "epsilon": 0.1, "design_snr_db": 30,
//              "max_iters": 500, "step_init": 0.01, "armijo_c": 1e-4,
//              "armijo_shrink": 0.5, "grad_tol": 1e-10, "anneal": false,
//              "rounds": 2 },
//     "partition": { "strategy": "random" },
//     "sim": { "scheme": "joint-ml", "snr_db": [2, 6, 10], "blocks": 10000,
//              "workers": 0, "pilot_ratio": 1.0,
//              "count_estimation_error": true },
//     "evaluate": { "snr_db": [10, 20, 30] },
//     "io": { "input": "in.json", "output": "out.json",
//             "trace": "trace.csv", "log": "metrics.json" } }
//
// All SNR values are in dB here and converted to linear power once, in
// parse_run_spec.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncmac/codebook_io.hpp"
#include "ncmac/constellation.hpp"
#include "ncmac/errors.hpp"
#include "ncmac/metrics.hpp"
#include "ncmac/optimizer.hpp"
#include "ncmac/partition.hpp"
#include "ncmac/pilot.hpp"
#include "ncmac/simulator.hpp"

namespace ncmac::cli {

enum class Command { Generate, Design, Partition, Evaluate, Simulate };

inline Command parse_command(std::string_view s) {
  if (s == "generate")
    return Command::Generate;
  if (s == "design")
    return Command::Design;
  if (s == "partition")
    return Command::Partition;
  if (s == "evaluate")
    return Command::Evaluate;
  if (s == "simulate")
    return Command::Simulate;
  throw ConfigError("unknown command: " + std::string(s));
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct IoPaths {
  std::string input;
  std::string output;
  std::string trace;
  std::string log;
};

struct RunSpec {
  Command command = Command::Generate;
  std::uint64_t seed = 0;
  SystemConfig sys;
  std::optional<OptimizerConfig> opt;
  std::optional<SimConfig> sim;
  IoPaths io;

  // generate: codebook size and antenna count
  int size = 0;
  int M = 1;
  // design: per-user sizes
  int K1 = 0;
  int K2 = 0;
  // pilot schemes: bits per user
  int bits = 0;
  int rounds = 2;
  PartitionStrategy strategy = PartitionStrategy::Random;
  double pilot_ratio = 1.0;
  bool count_estimation_error = true;

  /// SNR grid in dB for evaluate / simulate; kept for CSV output.
  std::vector<double> snr_db;

  void validate() const {
    sys.validate();
    if (opt)
      opt->validate();
    if (sim)
      sim->validate();
    auto need_output = [this] {
      if (io.output.empty())
        throw ConfigError("io.output is required");
    };
    auto need_input = [this] {
      if (io.input.empty())
        throw ConfigError("io.input is required");
    };
    switch (command) {
    case Command::Generate:
      need_output();
      if (size < 2)
        throw ConfigError("codebook.size must be at least 2");
      if (M < 1 || M > sys.T)
        throw ConfigError("codebook.M must lie in [1, T]");
      if (!opt)
        throw ConfigError("generate needs an opt section");
      break;
    case Command::Design:
      need_output();
      if (!opt)
        throw ConfigError("design needs an opt section");
      if (K1 < 1 || K2 < 1 || K1 * K2 < 2)
        throw ConfigError("design needs K1, K2 ≥ 1 and at least two joint symbols");
      if (opt->criterion == Criterion::Chordal && K1 != (K1 + K2 + 1) / 2)
        throw ConfigError("chordal design needs K1 = ⌈(K1+K2)/2⌉");
      if ((opt->criterion == Criterion::AltD12 ||
           opt->criterion == Criterion::AltD21) &&
          (K1 < 2 || K2 < 2))
        throw ConfigError("alternating design needs K1, K2 ≥ 2");
      if (rounds < 0)
        throw ConfigError("opt.rounds must be non-negative");
      break;
    case Command::Partition:
      need_input();
      need_output();
      break;
    case Command::Evaluate:
      need_input();
      need_output();
      if (snr_db.empty())
        throw ConfigError("evaluate needs a non-empty snr_db grid");
      break;
    case Command::Simulate:
      need_output();
      if (!sim)
        throw ConfigError("simulate needs a sim section");
      if (sim->scheme == Scheme::JointMl)
        need_input();
      else
        (void)PilotLayout::make(sys.T, bits, pilot_ratio);
      break;
    }
  }
};

namespace detail {

template <class T>
T get_or(const nlohmann::json &j, const char *key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline std::vector<double> db_list(const nlohmann::json &j) {
  if (j.is_number())
    return {j.get<double>()};
  return j.get<std::vector<double>>();
}

} // namespace detail

/// Builds a RunSpec from a JSON object (dB values converted to linear).
inline RunSpec parse_run_spec(const nlohmann::json &j) {
  using detail::get_or;
  try {
    if (!j.is_object())
      throw ConfigError("run spec must be a JSON object");
    RunSpec r;
    r.command = parse_command(j.at("command").get<std::string>());
    r.seed = get_or<std::uint64_t>(j, "seed", 0);

    const auto sys = j.value("sys", nlohmann::json::object());
    r.sys.T = get_or(sys, "T", 2);
    r.sys.M1 = get_or(sys, "M1", 1);
    r.sys.M2 = get_or(sys, "M2", 1);
    r.sys.N = get_or(sys, "N", 1);
    const double snr = get_or(sys, "snr_db", 0.0);
    r.sys.P1 = db_to_linear(get_or(sys, "p1_db", snr));
    r.sys.P2 = db_to_linear(get_or(sys, "p2_db", snr));

    const auto cb = j.value("codebook", nlohmann::json::object());
    r.size = get_or(cb, "size", 0);
    r.M = get_or(cb, "M", r.sys.M1);
    r.bits = get_or(cb, "bits", 0);
    const int per_user = r.bits > 0 && r.bits < 31 ? 1 << r.bits : 0;
    r.K1 = get_or(cb, "K1", per_user);
    r.K2 = get_or(cb, "K2", per_user);

    if (j.contains("opt")) {
      const auto &o = j.at("opt");
      OptimizerConfig c;
      c.criterion = parse_criterion(get_or<std::string>(o, "criterion", "dmin"));
      c.epsilon = get_or(o, "epsilon", c.epsilon);
      if (o.contains("design_snr_db"))
        c.design_snr = db_to_linear(o.at("design_snr_db").get<double>());
      c.max_iters = get_or(o, "max_iters", c.max_iters);
      c.step_init = get_or(o, "step_init", c.step_init);
      c.armijo_c = get_or(o, "armijo_c", c.armijo_c);
      c.armijo_shrink = get_or(o, "armijo_shrink", c.armijo_shrink);
      c.grad_tol = get_or(o, "grad_tol", c.grad_tol);
      c.anneal = get_or(o, "anneal", c.anneal);
      c.seed = get_or(o, "seed", r.seed);
      r.rounds = get_or(o, "rounds", r.rounds);
      r.opt = c;
    }

    if (j.contains("partition"))
      r.strategy = parse_partition_strategy(
          get_or<std::string>(j.at("partition"), "strategy", "random"));

    if (j.contains("sim")) {
      const auto &s = j.at("sim");
      SimConfig c;
      c.scheme = parse_scheme(get_or<std::string>(s, "scheme", "joint-ml"));
      c.num_blocks = get_or(s, "blocks", c.num_blocks);
      c.workers = get_or(s, "workers", c.workers);
      c.seed = get_or(s, "seed", r.seed);
      r.pilot_ratio = get_or(s, "pilot_ratio", r.pilot_ratio);
      r.count_estimation_error =
          get_or(s, "count_estimation_error", r.count_estimation_error);
      if (s.contains("snr_db"))
        r.snr_db = detail::db_list(s.at("snr_db"));
      r.sim = c;
    }
    if (j.contains("evaluate") && j.at("evaluate").contains("snr_db"))
      r.snr_db = detail::db_list(j.at("evaluate").at("snr_db"));
    if (r.sim)
      for (double db : r.snr_db)
        r.sim->snr_grid.push_back(db_to_linear(db));

    const auto io = j.value("io", nlohmann::json::object());
    r.io.input = get_or<std::string>(io, "input", "");
    r.io.output = get_or<std::string>(io, "output", "");
    r.io.trace = get_or<std::string>(io, "trace", "");
    r.io.log = get_or<std::string>(io, "log", "");
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("run spec: ") + e.what());
  }
}

/// Replaces the SNR grid (dB) of a parsed spec.
inline void set_snr_grid(RunSpec &r, const std::vector<double> &db) {
  r.snr_db = db;
  if (r.sim) {
    r.sim->snr_grid.clear();
    for (double v : db)
      r.sim->snr_grid.push_back(db_to_linear(v));
  }
}

/// Seed override applied to every stochastic stage.
inline void set_seed(RunSpec &r, std::uint64_t seed) {
  r.seed = seed;
  if (r.opt)
    r.opt->seed = seed;
  if (r.sim)
    r.sim->seed = seed;
}

namespace detail {

inline std::ofstream open_csv(const std::string &path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

inline void write_trace(const std::string &path,
                        const std::vector<IterationLog> &log) {
  if (path.empty())
    return;
  auto out = open_csv(path);
  out << "iteration,objective,grad_norm,step,epsilon\n";
  for (const auto &e : log)
    out << e.iteration << ',' << e.objective << ',' << e.grad_norm << ','
        << e.step << ',' << e.epsilon << '\n';
}

// Above this many joint symbols the all-pairs metrics are skipped and the
// summary carries only the per-user quantities and the implied d_min bracket.
inline constexpr std::size_t kFullReportLimit = 4096;

inline void write_metrics(const RunSpec &r, const JointCodebook &joint,
                          std::ostream &console) {
  nlohmann::json j;
  if (joint.size() <= kFullReportLimit) {
    j = metric_report(joint);
  } else {
    const double a = d12(joint);
    const double b = d21(joint);
    const double lo = std::min(a, b);
    j = {{"d12", a},
         {"d21", b},
         {"max_cross_corr", chordal_objective(joint)},
         {"d_min_bracket", {lo, lo + joint.user1().M()}}};
  }
  if (r.io.log.empty())
    console << j.dump() << '\n';
  else
    write_json_file(r.io.log, j);
}

} // namespace detail

/// Chordal packing of `size` single-user symbols from a seeded random start.
inline OptimizeResult generate_run(const RunSpec &r) {
  OptimizerConfig cfg = *r.opt;
  cfg.criterion = Criterion::Chordal;
  const auto init = ObliquePoint::random(r.sys.T, r.size, 0, r.seed, r.M);
  return optimize(init, cfg, r.sys);
}

inline void cmd_generate(const RunSpec &r, std::ostream &console) {
  r.validate();
  const auto res = generate_run(r);
  const Codebook cb = res.point.user_codebook(1, r.sys.P1);
  save_codebook(r.io.output, cb);
  detail::write_trace(r.io.trace, res.log);
  console << nlohmann::json{{"size", cb.size()},
                            {"initial_max_cross_corr", -res.initial_min_f},
                            {"max_cross_corr", -res.best_min_f}}
                 .dump()
          << '\n';
}

/// Joint design per opt.criterion: dmin / mean-pllr run the joint optimizer,
/// alt-d12 / alt-d21 run alternating rounds (d12 half first), chordal packs
/// K1+K2 lines and splits them with partition.strategy.
inline JointCodebook design_codebook(const RunSpec &r,
                                     std::vector<IterationLog> *log = nullptr) {
  const OptimizerConfig &cfg = *r.opt;
  const auto [p1, p2] = design_powers(cfg, r.sys);
  switch (cfg.criterion) {
  case Criterion::Dmin:
  case Criterion::MeanPllr: {
    const auto init =
        ObliquePoint::random(r.sys.T, r.K1, r.K2, r.seed, r.sys.M1, r.sys.M2);
    auto res = optimize(init, cfg, r.sys);
    if (log)
      *log = std::move(res.log);
    return *res.codebook;
  }
  case Criterion::AltD12:
  case Criterion::AltD21: {
    const auto init =
        ObliquePoint::random(r.sys.T, r.K1, r.K2, r.seed, r.sys.M1, r.sys.M2);
    return alternating_optimize(init.to_joint(p1, p2), cfg, r.sys, r.rounds)
        .codebook;
  }
  case Criterion::Chordal: {
    if (r.sys.M1 != r.sys.M2)
      throw ConfigError("chordal design needs M1 = M2");
    RunSpec g = r;
    g.size = r.K1 + r.K2;
    g.M = r.sys.M1;
    return partition(generate_run(g).point.user_codebook(1, p1), r.strategy,
                     r.seed);
  }
  }
  throw ConfigError("unsupported criterion");
}

inline void cmd_design(const RunSpec &r, std::ostream &console) {
  r.validate();
  std::vector<IterationLog> log;
  const JointCodebook joint = design_codebook(r, &log);
  save_joint(r.io.output, joint);
  detail::write_trace(r.io.trace, log);
  detail::write_metrics(r, joint, console);
}

inline void cmd_partition(const RunSpec &r, std::ostream &console) {
  r.validate();
  const JointCodebook joint = partition(load_codebook(r.io.input), r.strategy, r.seed);
  save_joint(r.io.output, joint);
  detail::write_metrics(r, joint, console);
}

/// Metrics CSV: one row per SNR with directions fixed and power rescaled.
inline void cmd_evaluate(const RunSpec &r, std::ostream &) {
  r.validate();
  const JointCodebook joint = load_joint(r.io.input);
  auto out = detail::open_csv(r.io.output);
  out << "snr_db,min_mean_pllr,d_min,d12,d21,chordal,cantelli_worst\n";
  for (double db : r.snr_db) {
    const JointCodebook j = joint.rescaled(db_to_linear(db));
    const auto m = metric_report(j);
    out << db << ',' << m.min_mean_pllr << ',' << m.d_min << ',' << m.d12 << ','
        << m.d21 << ',' << m.max_cross_corr << ',' << worst_cantelli(j, r.sys.N)
        << '\n';
  }
}

inline void write_ser_csv(const std::string &path, const std::vector<double> &db,
                          const SerResult &res) {
  auto out = detail::open_csv(path);
  out << "snr_db,joint_ser,user1_ser,user2_ser,blocks,std_err\n";
  for (std::size_t k = 0; k < res.points.size(); ++k) {
    const auto &p = res.points[k];
    out << db[k] << ',' << p.joint_ser << ',' << p.user1_ser << ','
        << p.user2_ser << ',' << p.blocks << ',' << p.std_err << '\n';
  }
}

inline void cmd_simulate(const RunSpec &r, std::ostream &) {
  r.validate();
  SerResult res;
  if (r.sim->scheme == Scheme::JointMl) {
    const JointCodebook joint = load_joint(r.io.input);
    if (!check_identifiability(joint, 1e-9).empty())
      throw ConfigError("joint codebook is not identifiable");
    res = simulate_ser(joint, r.sys, *r.sim);
  } else {
    res = simulate_pilot_ser(PilotLayout::make(r.sys.T, r.bits, r.pilot_ratio),
                             r.sys, *r.sim, r.count_estimation_error);
  }
  write_ser_csv(r.io.output, r.snr_db, res);
}

inline void run(const RunSpec &r, std::ostream &console) {
  switch (r.command) {
  case Command::Generate:
    return cmd_generate(r, console);
  case Command::Design:
    return cmd_design(r, console);
  case Command::Partition:
    return cmd_partition(r, console);
  case Command::Evaluate:
    return cmd_evaluate(r, console);
  case Command::Simulate:
    return cmd_simulate(r, console);
  }
}

} // namespace ncmac::cli
