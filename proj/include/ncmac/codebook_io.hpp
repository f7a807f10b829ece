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

// JSON storage of codebooks:
//   { "T": int, "M": int, "power": float,
//     "symbols": [ [ [re, im], ... T·M entries row-major ], ... ] }
// Joint codebooks hold two such objects under "user1" and "user2".

#include <filesystem>
#include <system_error>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncmac/constellation.hpp"
#include "ncmac/errors.hpp"

namespace ncmac {

inline nlohmann::json codebook_to_json(const Codebook &cb) {
  nlohmann::json syms = nlohmann::json::array();
  for (const auto &x : cb.symbols()) {
    nlohmann::json entries = nlohmann::json::array();
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        entries.push_back({x(r, c).real(), x(r, c).imag()});
    syms.push_back(std::move(entries));
  }
  return {{"T", cb.T()}, {"M", cb.M()}, {"power", cb.power()},
          {"symbols", std::move(syms)}};
}

/// Parses one codebook object. The Grassmannian flag is set when every
/// symbol meets the scaling invariant at the validation tolerance.
inline Codebook codebook_from_json(const nlohmann::json &j) {
  try {
    const int T = j.at("T").get<int>();
    const int M = j.at("M").get<int>();
    const double power = j.at("power").get<double>();
    if (T < 1 || M < 1 || M > T)
      throw ConfigError("codebook file: invalid T/M");
    std::vector<CMatrix> symbols;
    for (const auto &entries : j.at("symbols")) {
      if (entries.size() != static_cast<std::size_t>(T * M))
        throw ConfigError("codebook file: symbol must hold T·M entries");
      CMatrix x(T, M);
      std::size_t k = 0;
      for (int r = 0; r < T; ++r)
        for (int c = 0; c < M; ++c, ++k) {
          const auto &e = entries.at(k);
          if (e.size() != 2)
            throw ConfigError("codebook file: entries are [re, im] pairs");
          x(r, c) = cd(e.at(0).get<double>(), e.at(1).get<double>());
        }
      symbols.push_back(std::move(x));
    }
    bool grass = !symbols.empty() && power > 0.0;
    for (const auto &x : symbols)
      grass = grass && grassmann_defect(x, power) <= kGrassmannValidateTol;
    return {std::move(symbols), power, grass};
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("codebook file: ") + e.what());
  } catch (const SizeError &e) {
    throw ConfigError(std::string("codebook file: ") + e.what());
  } catch (const DomainError &e) {
    throw ConfigError(std::string("codebook file: ") + e.what());
  } catch (const DimensionError &e) {
    throw ConfigError(std::string("codebook file: ") + e.what());
  }
}

inline nlohmann::json joint_to_json(const JointCodebook &joint) {
  return {{"user1", codebook_to_json(joint.user1())},
          {"user2", codebook_to_json(joint.user2())}};
}

inline JointCodebook joint_from_json(const nlohmann::json &j) {
  if (!j.contains("user1") || !j.contains("user2"))
    throw ConfigError("joint codebook file needs user1 and user2");
  try {
    return {codebook_from_json(j.at("user1")), codebook_from_json(j.at("user2"))};
  } catch (const DimensionError &e) {
    throw ConfigError(std::string("joint codebook file: ") + e.what());
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

/// Creates the parent directory of an output path when it is missing.
inline void ensure_parent(const std::filesystem::path &path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
}

inline void write_json_file(const std::filesystem::path &path,
                            const nlohmann::json &j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

inline void save_codebook(const std::filesystem::path &path, const Codebook &cb) {
  write_json_file(path, codebook_to_json(cb));
}
inline Codebook load_codebook(const std::filesystem::path &path) {
  return codebook_from_json(read_json_file(path));
}
inline void save_joint(const std::filesystem::path &path, const JointCodebook &j) {
  write_json_file(path, joint_to_json(j));
}
inline JointCodebook load_joint(const std::filesystem::path &path) {
  return joint_from_json(read_json_file(path));
}

} // namespace ncmac
