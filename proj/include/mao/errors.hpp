// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mao {

// Values double as CLI exit codes and C API status codes; keep them stable.
enum class ErrorCode : int {
  kUsage = 2,
  kConfig = 3,
  kDegenerateInput = 4,
  kShape = 5,
  kVocabulary = 6,
  kCandidateSet = 7,
  kDataset = 8,
  kFormat = 9,
  kConstraint = 10,
  kState = 11,
  kArgument = 12,
  kInvariant = 13,
  kNumerical = 14,
  kIo = 15,
  kCompatibility = 16,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the hard-negative sampler when b * topK exceeds the number of
// base classes. Carries the offending values so the caller can shrink them.
class ConstraintViolation : public Error {
 public:
  ConstraintViolation(std::size_t b, std::size_t k, std::size_t n_base);
  std::size_t b() const noexcept { return b_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t n_base() const noexcept { return n_base_; }

 private:
  std::size_t b_;
  std::size_t k_;
  std::size_t n_base_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace mao
