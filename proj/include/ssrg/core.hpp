// Copyright 2026 The ssrg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared numeric types, error categories and seeded random streams.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ssrg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error categories. The CLI maps each to a fixed exit code.
enum class ErrorCategory { config = 1, io = 2, numerical = 3, format = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};
struct CorruptionError : FormatError {
  explicit CorruptionError(const std::string& what) : FormatError(what) {}
};
struct UnsupportedVersionError : FormatError {
  explicit UnsupportedVersionError(const std::string& what) : FormatError(what) {}
};

// Shape or wiring mistakes by the caller (mismatched lengths, stale tapes).
struct StructuralError : Error {
  explicit StructuralError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::numerical: return "numerical";
    case ErrorCategory::format: return "format";
  }
  return "unknown";
}

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

inline Mat randn(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

}  // namespace ssrg
