// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "cminv/tensor.hpp"

namespace cminv {

/// Seeded random stream with platform-independent output.
///
/// std::mt19937_64 has a fully specified output sequence, but the standard
/// distributions do not, so uniform and normal variates are derived here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform();

  /// Standard normal via the Box-Muller transform.
  double normal();

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  Index uniform_index(Index n);

  Vector normal_vector(Index n);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Mixes (base, stream, index) into an independent seed with splitmix64.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace cminv
