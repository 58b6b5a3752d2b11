// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace cminv {

/// Strictly decreasing noise levels t_0 > ... > t_{N-1} inside [t_min, T].
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> levels, double t_min, double t_max);

  const std::vector<double>& levels() const noexcept { return levels_; }
  std::size_t size() const noexcept { return levels_.size(); }
  double t_min() const noexcept { return t_min_; }
  double t_max() const noexcept { return t_max_; }

  /// Set when the schedule came from make_karras_schedule.
  std::optional<double> rho() const noexcept { return rho_; }

  /// Karras schedule with the same (t_min, T, rho) and a new level count.
  /// Throws std::logic_error for schedules built from explicit levels.
  NoiseSchedule with_levels(std::size_t n) const;

 private:
  friend NoiseSchedule make_karras_schedule(std::size_t, double, double, double);

  std::vector<double> levels_;
  double t_min_;
  double t_max_;
  std::optional<double> rho_;
};

/// levels_i = (T^(1/rho) + i/(N-1) (t_min^(1/rho) - T^(1/rho)))^rho, endpoints pinned.
NoiseSchedule make_karras_schedule(std::size_t n, double t_min, double t_max, double rho);

struct StepPair {
  double t;
  double s;
};

/// Consecutive (t, s) = (levels_i, levels_{i+1}) pairs.
std::vector<StepPair> step_pairs(const NoiseSchedule& schedule);

inline constexpr double kDefaultTMin = 0.002;
inline constexpr double kDefaultTMax = 80.0;
inline constexpr double kDefaultRho = 7.0;

}  // namespace cminv
