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

#include <stdexcept>
#include <string>

namespace ncmac {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent matrix shapes or invalid dimension parameters.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A set or matrix is too small (or empty) for the requested operation.
class SizeError : public Error {
public:
  using Error::Error;
};

/// A scalar argument lies outside its mathematical domain.
class DomainError : public Error {
public:
  using Error::Error;
};

/// A factorization failed (matrix not Hermitian positive definite).
class LinAlgError : public Error {
public:
  using Error::Error;
};

/// A structural invariant (unit norm, Grassmannian scaling) does not hold.
class InvariantError : public Error {
public:
  using Error::Error;
};

/// A retraction produced a degenerate column.
class StepError : public Error {
public:
  using Error::Error;
};

/// Invalid run configuration (CLI, pilot layout, file contents).
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace ncmac
