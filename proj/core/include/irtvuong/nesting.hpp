#pragma once

#include <optional>
#include <string>
#include <vector>

#include "irtvuong/models.hpp"

namespace irtvuong {

// Value of one full-model parameter as a function of the reduced vector.
struct ParamSource {
  enum class Kind { Constant, Reduced, ScaledSd };
  Kind kind = Kind::Constant;
  double value = 0.0;  // Constant value, or the ScaledSd multiplier
  int index = -1;      // Reduced index, or the reduced variance index for ScaledSd

  bool operator==(const ParamSource&) const = default;
};

// Explicit constraint map h: reduced parameters -> full parameters with
// loglik_full(h(x)) == loglik_reduced(x) for every valid x.
struct NestingCertificate {
  int df = 0;  // P_full - P_reduced
  std::vector<ParamSource> map;
  std::vector<std::string> constraints;  // human-readable description of h

  ParameterVector apply(const ParameterVector& reduced) const;
};

struct NestingVerdict {
  bool nested = false;      // certificate with df > 0
  bool equivalent = false;  // certificate with df == 0 (reparameterization)
  std::string reason;       // why it declined, when it did
  std::optional<NestingCertificate> certificate;
};

// Syntactic nesting of `reduced` inside `full`. Recognizes fixing and
// equating of slopes, zeroed extra dimensions, and a free latent variance
// absorbed into free slopes. Never proves non-nesting.
// Throws InputError when the data shapes differ.
NestingVerdict nests(const ModelSpec& reduced, const ModelSpec& full);

}  // namespace irtvuong
