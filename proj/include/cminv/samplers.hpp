// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cminv/operators.hpp"
#include "cminv/priors.hpp"
#include "cminv/random.hpp"
#include "cminv/schedules.hpp"
#include "cminv/tensor.hpp"

namespace cminv {

enum class SamplerVariant { cm_baseline, ddim, addim, inverse_addim, ddrm };

const char* to_string(SamplerVariant variant);
SamplerVariant parse_sampler_variant(std::string_view name);

/// Raised when a sampler variant cannot run with the given operator (e.g.
/// DDRM with a nonlinear operator).
class UnsupportedVariantError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SamplerConfig {
  SamplerVariant variant = SamplerVariant::inverse_addim;
  double eta = 1.0;        // aDDIM variance gain
  double gamma = 1.0;      // Inverse-aDDIM residual gain
  double eta_ddrm = 0.85;  // DDRM stochasticity
  double eta_b = 1.0;      // DDRM measurement weight
  std::uint64_t seed = 0;
  int steps = 2;

  void validate() const;
};

struct TrajectoryRecord {
  double t = 0.0;
  ImageTensor x_t;
  ImageTensor x_hat;
  std::optional<double> residual_norm_sq;
  bool degenerate = false;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;  // strictly decreasing t
  ImageTensor final;
  std::array<Index, 3> ddrm_branch_hits{0, 0, 0};  // summed over DDRM steps
};

/// (s² - t_min²) / (t² - t_min²); requires t > s >= t_min > 0.
double ddim_variance_ratio(double t, double s, double t_min);

/// x̂ + r (x_t - x̂) with r = sqrt(ddim_variance_ratio), i.e. (1 - r) x̂ + r x_t.
ImageTensor ddim_step(const ImageTensor& x_t, const ImageTensor& x_hat, double t, double s,
                      double t_min);

/// sqrt(ratio + ((1 - sqrt(ratio)) / eps_norm)² added_variance), the factor
/// multiplying ε̂ = x_t - x̂ in the variance-compensated updates.
double noise_coefficient(double ratio, double eps_norm, double added_variance);

struct StepResult {
  ImageTensor next;
  double coefficient = 0.0;
  bool degenerate = false;  // ‖ε̂‖ = 0, fell back to the DDIM update
  std::optional<double> residual_norm_sq;
};

/// aDDIM update with added variance eta ‖x_teacher - x̂‖².
StepResult addim_step(const ImageTensor& x_t, const ImageTensor& x_hat,
                      const ImageTensor& x_teacher, double t, double s, double t_min, double eta);

/// Inverse-aDDIM update with added variance gamma ‖y - A(x̂)‖². Works with
/// any forward operator; only A(x̂) is evaluated.
StepResult inverse_addim_step(const ImageTensor& x_t, const ImageTensor& x_hat, const Vector& y,
                              const ForwardOperator& op, double t, double s, double t_min,
                              double gamma);

enum class DdrmBranch {
  zero_singular = 0,           // s_i = 0: no measurement along this direction
  measurement_less_noisy = 1,  // sigma_t < sigma_y / s_i
  measurement_noisier = 2,     // sigma_t >= sigma_y / s_i
};

DdrmBranch ddrm_branch(double singular_value, bool valid, double sigma_t, double sigma_y);

struct DdrmStepResult {
  Vector x_bar;
  std::array<Index, 3> branch_hits{0, 0, 0};
};

/// One spectral DDRM transition from level sigma_next to sigma_t < sigma_next.
///
/// All vectors are spectral coordinates of length n; singular_values is padded
/// with zeros beyond min(m, n) and y_bar.valid marks usable measurements.
DdrmStepResult ddrm_step(const Vector& x_bar_next, const Vector& x_bar_theta,
                         const SpectralMeasurement& y_bar, const Vector& singular_values,
                         double sigma_t, double sigma_next, double sigma_y, double eta,
                         double eta_b, Rng& rng);

/// Few-step consistency sampling.
///
/// steps == 1 returns f(x_T, y, T) directly. Otherwise the schedule is
/// brought to steps + 1 levels ending at t_min, the variant's update rule is
/// applied along each step pair, and the result is one more evaluation of f
/// at the last level. x_T = T z is drawn from Rng(config.seed). The aDDIM
/// variant needs a teacher image.
Trajectory sample(const SamplerConfig& config, const ConsistencyFn& f,
                  const NoiseSchedule& schedule, const Vector& y, const MeasurementModel& model,
                  const ImageTensor* teacher = nullptr);

/// DDRM over the given sigma levels with an unconditional denoiser; x ↔
/// spectral through the operator's V factor at every level.
Trajectory ddrm_sample(const SamplerConfig& config, const ConsistencyFn& denoiser,
                       const NoiseSchedule& schedule, const Vector& y,
                       const MeasurementModel& model);

/// Runs one trajectory per measurement on `workers` threads. Trajectory i
/// uses seed config.seed + i, so results do not depend on the worker count.
std::vector<Trajectory> sample_batch(const SamplerConfig& config, const ConsistencyFn& f,
                                     const NoiseSchedule& schedule,
                                     const std::vector<Vector>& measurements,
                                     const MeasurementModel& model, int workers,
                                     const std::vector<ImageTensor>* teachers = nullptr);

}  // namespace cminv
