// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cminv/operators.hpp"
#include "cminv/priors.hpp"
#include "cminv/schedules.hpp"

namespace cminv {

struct VerificationReport {
  std::string check_name;
  double statistic = 0.0;
  double bound_or_target = 0.0;
  double tolerance = 0.0;
  Index n_samples = 0;
  bool passed = false;
  double standard_error = 0.0;
  std::string detail;
};

/// Monte Carlo estimate of E‖x_s*‖² − ‖x_s^DDIM‖² for x ~ p(x | x_t), against
/// (1 − r)² trace Var[x | x_t]. x_t is drawn once from the prior; posterior
/// draws come in antithetic pairs.
VerificationReport mc_dropped_variance_check(const GaussianPrior& prior, double t, double s,
                                             double t_min, Index n_samples, std::uint64_t seed,
                                             double relative_tolerance = 0.02);

struct ResidualBoundReports {
  /// mean of ‖y − Ax̂‖² − ‖A(x − x̂)‖² − mσ_y², expected 0 within 3 SE.
  VerificationReport decomposition;
  /// slack = ‖A‖₂² E‖x − x̂‖² + mσ_y² − E‖y − Ax̂‖², passing when ≥ −3 SE.
  VerificationReport bound;
};

/// Draws x from the prior, x_t = x + t z and y = Ax + σ_y w; x̂ = E[x | x_t].
ResidualBoundReports residual_bound_check(const LinearOperator& op, const GaussianPrior& prior,
                                          double sigma_y, Index n_samples, std::uint64_t seed,
                                          double t = 0.5);

struct VarianceCompensationResult {
  VerificationReport report;
  double ddim_ratio = 0.0;
  std::vector<double> gammas;
  std::vector<double> ratios;  // aligned with gammas
  double best_gamma = 0.0;
  double posterior_trace = 0.0;
};

inline const std::vector<double> kDefaultGammaGrid = {0.0, 0.25, 0.5, 1.0, 2.0};

/// Runs n_runs trajectories of DDIM and of Inverse-aDDIM for every γ in the
/// grid (common random numbers across samplers) against one measurement, and
/// compares the trace of the final-sample covariance with the analytic
/// posterior trace.
VarianceCompensationResult variance_compensation_check(
    const GaussianPrior& prior, LinearOperatorPtr op, double sigma_y,
    const NoiseSchedule& schedule, const std::vector<double>& gamma_grid, Index n_runs,
    std::uint64_t seed, int steps = 2, int workers = 1);

struct DdrmPosteriorResult {
  VerificationReport report;  // statistic: largest |mean - posterior mean| / SE over coordinates
  Vector sample_mean;
  Vector standard_error;
  Vector posterior_mean;
  std::array<Index, 3> branch_hits{0, 0, 0};
};

/// Runs n_runs DDRM trajectories against one measurement y = A x + sigma_y w
/// and compares the per-coordinate sample mean of the final images with the
/// analytic posterior mean, passing when every coordinate is within 3 SE.
DdrmPosteriorResult ddrm_posterior_mean_check(const GaussianPrior& prior, LinearOperatorPtr op,
                                              double sigma_y, const NoiseSchedule& schedule,
                                              double eta, double eta_b, Index n_runs,
                                              std::uint64_t seed, int workers = 1);

}  // namespace cminv
