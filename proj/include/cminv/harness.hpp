// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cminv/config.hpp"
#include "cminv/metrics.hpp"
#include "cminv/oracle.hpp"
#include "cminv/operators.hpp"
#include "cminv/priors.hpp"
#include "cminv/samplers.hpp"
#include "cminv/schedules.hpp"

namespace cminv {

using Json = nlohmann::ordered_json;

struct Dataset {
  DatasetSpec spec;
  std::vector<ImageTensor> images;
  std::optional<GaussianPrior> prior;  // gaussian_prior generator only
  std::vector<Vector> atoms;
};

/// Covariance of the gaussian_prior generator: per channel, variance ·
/// exp(-d² / (2 length_scale²)) over pixel distance d plus the nugget on the
/// diagonal; channels independent. Rounded through float32 so that the prior
/// written to disk is the one the data came from.
GaussianPrior generator_prior(const DatasetSpec& spec);

/// Seeded synthetic dataset. Images depend on (seed, split), the prior and the
/// atoms on seed alone.
Dataset synthesize_dataset(const DatasetSpec& spec);

/// Operator for a task on images of the given shape; ConfigError on bad parameters.
ForwardOperatorPtr make_task_operator(const TaskSpec& task, const Shape& shape);
Json describe_task(const TaskSpec& task, const Shape& shape);

/// A(x_i) + sigma_y z_i with one derived noise stream per image.
std::vector<Vector> degrade_all(const std::vector<ImageTensor>& images,
                                const MeasurementModel& model, std::uint64_t seed);

/// Consistency function for a model kind. `unconditional` ignores y (used by DDRM).
ConsistencyFnPtr make_consistency(const ModelSpec& spec, const Dataset& dataset,
                                  const MeasurementModel& model, bool unconditional);

/// Karras schedule with steps + 1 levels unless explicit levels are configured.
NoiseSchedule make_schedule(const ScheduleSpec& spec, int steps);

/// Looks up precomputed predictions by noise level; for externally produced x̂.
class PrecomputedConsistency final : public ConsistencyFn {
 public:
  PrecomputedConsistency(std::vector<double> levels, std::vector<ImageTensor> predictions);
  ImageTensor predict(const ImageTensor& x_t, const Vector& y, double t) const override;

 private:
  std::vector<double> levels_;
  std::vector<ImageTensor> predictions_;
};

/// Samples one reconstruction per measurement. Trajectory i is seeded with
/// sampler.seed + i and results are independent of `workers`. Throws
/// UnsupportedVariantError for DDRM with a nonlinear operator.
std::vector<Trajectory> run_sampling(const ExperimentConfig& config, const Dataset& dataset,
                                     const MeasurementModel& model,
                                     const std::vector<Vector>& measurements,
                                     const std::vector<ImageTensor>* teachers = nullptr);

struct SampleMetrics {
  Index index = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvaluationResult {
  std::vector<SampleMetrics> rows;
  MetricReport aggregate;
  std::optional<KidResult> kid;
  std::optional<FrechetResult> fid;
};

/// Per-sample PSNR/SSIM, their means, and KID/FID on the configured features.
/// External features, when given, replace feature extraction.
EvaluationResult evaluate_reconstructions(const std::vector<ImageTensor>& reconstructions,
                                          const std::vector<ImageTensor>& references,
                                          const MetricsSpec& spec, std::uint64_t seed,
                                          const Matrix* features_samples = nullptr,
                                          const Matrix* features_reference = nullptr);

struct TuneResult {
  std::vector<double> gammas;
  std::vector<double> scores;  // lower is better (KID, or negated PSNR)
  double best_gamma = 0.0;
  std::string criterion;
};

/// Grid search of the Inverse-aDDIM γ on the tuning split (dataset.split
/// replaced by tune.split, tune.count images).
TuneResult tune_gamma(const ExperimentConfig& config);

/// The oracle suite behind `cminv verify`. `filter` keeps checks whose name
/// contains it; empty runs everything.
std::vector<VerificationReport> run_verification_suite(std::uint64_t seed,
                                                       const std::string& filter, int workers);

Json to_json(const VerificationReport& report);
Json to_json(const MetricReport& report);

/// Stable one-line serialization used for every .jsonl file.
std::string jsonl_line(const Json& record);

/// One table row per method, columns PSNR SSIM KID FID.
std::string format_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

// CLI subcommands operating on the output directory layout. Each returns a
// process exit code; ConfigError and UnsupportedVariantError propagate.
int cmd_synthesize(const ExperimentConfig& config);
int cmd_degrade(const ExperimentConfig& config);
int cmd_sample(const ExperimentConfig& config);
int cmd_evaluate(const ExperimentConfig& config);
int cmd_verify(const ExperimentConfig& config, const std::string& filter, std::uint64_t seed);
int cmd_tune_gamma(const ExperimentConfig& config);

}  // namespace cminv
