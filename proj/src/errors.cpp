// Copyright 2026 The MAO Authors
// SPDX-License-Identifier: Apache-2.0

#include "mao/errors.hpp"

namespace mao {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUsage: return "usage";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kDegenerateInput: return "degenerate-input";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kVocabulary: return "vocabulary";
    case ErrorCode::kCandidateSet: return "candidate-set";
    case ErrorCode::kDataset: return "dataset";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kConstraint: return "constraint";
    case ErrorCode::kState: return "state";
    case ErrorCode::kArgument: return "argument";
    case ErrorCode::kInvariant: return "invariant";
    case ErrorCode::kNumerical: return "numerical";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kCompatibility: return "compatibility";
  }
  return "unknown";
}

ConstraintViolation::ConstraintViolation(std::size_t b, std::size_t k,
                                         std::size_t n_base)
    : Error(ErrorCode::kConstraint,
            "b*topK = " + std::to_string(b) + "*" + std::to_string(k) + " = " +
                std::to_string(b * k) + " exceeds the " + std::to_string(n_base) +
                " base classes; the sampler requires b*topK <= |C_b|"),
      b_(b),
      k_(k),
      n_base_(n_base) {}

}  // namespace mao
