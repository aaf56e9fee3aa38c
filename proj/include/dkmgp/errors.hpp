// Copyright 2026 The DKMGP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace dkmgp {

/// Base of every error the library raises. `kind()` is a stable
/// machine-readable tag used by the CLI's single-line error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DKMGP_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  };

DKMGP_DEFINE_ERROR(GuardViolation)
DKMGP_DEFINE_ERROR(ParseError)
DKMGP_DEFINE_ERROR(SchemaError)
DKMGP_DEFINE_ERROR(NonUniformSampling)
DKMGP_DEFINE_ERROR(InsufficientData)
DKMGP_DEFINE_ERROR(DimensionMismatch)
DKMGP_DEFINE_ERROR(CholeskyFailure)
DKMGP_DEFINE_ERROR(NonFiniteLoss)
DKMGP_DEFINE_ERROR(VersionMismatch)
DKMGP_DEFINE_ERROR(LengthMismatch)
DKMGP_DEFINE_ERROR(MissingHorizonModel)
DKMGP_DEFINE_ERROR(ConfigError)
DKMGP_DEFINE_ERROR(IoError)
DKMGP_DEFINE_ERROR(InvalidArgument)

#undef DKMGP_DEFINE_ERROR

}  // namespace dkmgp
