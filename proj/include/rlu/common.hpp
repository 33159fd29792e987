//
// Copyright 2026 The rlu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef RLU_COMMON_HPP_
#define RLU_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rlu {

// Machine-readable failure categories. The CLI reports these verbatim in its
// error JSON, so the spelling returned by ErrorCodeName() is part of the
// external interface.
enum class ErrorCode {
  kImpossibleLayout,
  kInvalidPosition,
  kInvalidSpec,
  kDimensionMismatch,
  kEmptyBatch,
  kShapeMismatch,
  kConfig,
  kEmptyInput,
  kMisalignedProbes,
  kInvalidPattern,
  kFrameMismatch,
  kEmptySample,
  kDegenerateDenominator,
  kSingularSystem,
  kMissingData,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// All stochastic components draw from this engine so that a seed fully
// determines a run.
using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a salt
// (splitmix64 finalizer).
std::uint64_t MixSeed(std::uint64_t seed, std::uint64_t salt);

inline int UniformInt(Rng& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

inline double Uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace rlu

#endif  // RLU_COMMON_HPP_
