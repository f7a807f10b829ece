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

// ncmac: constellation design, evaluation and simulation from a JSON run spec.
//
//   ncmac [command] --config run.json [--seed S] [--out PATH] [--snr-db a,b,c]
//         [--blocks N] [--criterion NAME] [--epsilon E] [--input PATH]
//         [--trace PATH] [--iters N]
//
// Exit status: 0 success, 2 configuration error, 3 numerical failure.
// Failures print one line `ncmac: error kind=<config|numerical> msg="..."`.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ncmac/cli.hpp"

namespace {

int fail(const char *kind, const std::string &msg, int code) {
  std::string clean;
  for (char c : msg)
    clean += (c == '\n' || c == '"') ? ' ' : c;
  std::cerr << "ncmac: error kind=" << kind << " msg=\"" << clean << "\"\n";
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Joint constellation design for the two-user non-coherent MIMO MAC"};
  std::string command;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> input;
  std::optional<std::string> trace;
  std::vector<double> snr_db;
  std::optional<int> blocks;
  std::optional<std::string> criterion;
  std::optional<double> epsilon;
  std::optional<int> iters;

  app.add_option("command", command,
                 "generate | design | partition | evaluate | simulate");
  app.add_option("--config", config, "JSON run spec")->required();
  app.add_option("--seed", seed, "seed for every stochastic stage");
  app.add_option("--out", out, "output path");
  app.add_option("--input", input, "input codebook path");
  app.add_option("--trace", trace, "optimizer progress CSV path");
  app.add_option("--snr-db", snr_db, "comma-separated SNR grid in dB")
      ->delimiter(',');
  app.add_option("--blocks", blocks, "Monte-Carlo blocks per SNR point");
  app.add_option("--criterion", criterion, "design criterion");
  app.add_option("--epsilon", epsilon, "log-sum-exp smoothing");
  app.add_option("--iters", iters, "optimizer iterations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return fail("config", e.what(), 2);
  }

  try {
    auto j = ncmac::read_json_file(config);
    if (!command.empty())
      j["command"] = command;
    if (!j.contains("command"))
      throw ncmac::ConfigError("no command given");
    if (criterion || epsilon || iters) {
      auto &o = j["opt"];
      if (criterion)
        o["criterion"] = *criterion;
      if (epsilon)
        o["epsilon"] = *epsilon;
      if (iters)
        o["max_iters"] = *iters;
    }
    if (blocks)
      j["sim"]["blocks"] = *blocks;
    if (out)
      j["io"]["output"] = *out;
    if (input)
      j["io"]["input"] = *input;
    if (trace)
      j["io"]["trace"] = *trace;

    auto spec = ncmac::cli::parse_run_spec(j);
    if (!snr_db.empty())
      ncmac::cli::set_snr_grid(spec, snr_db);
    if (seed)
      ncmac::cli::set_seed(spec, *seed);
    ncmac::cli::run(spec, std::cout);
  } catch (const ncmac::ConfigError &e) {
    return fail("config", e.what(), 2);
  } catch (const ncmac::DimensionError &e) {
    return fail("config", e.what(), 2);
  } catch (const ncmac::SizeError &e) {
    return fail("config", e.what(), 2);
  } catch (const ncmac::DomainError &e) {
    return fail("config", e.what(), 2);
  } catch (const std::exception &e) {
    return fail("numerical", e.what(), 3);
  }
  return 0;
}
