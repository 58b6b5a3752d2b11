// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cminv/metrics.hpp"
#include "cminv/samplers.hpp"
#include "cminv/tensor.hpp"

namespace cminv {

/// Invalid configuration or operator parameters.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Generator { gaussian_prior, piecewise_constant, atoms };
enum class TaskKind { super_resolution, deblur, inpaint, denoise, nonlinear_deblur };
enum class ModelKind { gaussian, empirical, external };

const char* to_string(Generator g);
const char* to_string(TaskKind t);
const char* to_string(ModelKind m);

struct DatasetSpec {
  Generator generator = Generator::gaussian_prior;
  Index count = 16;
  Shape shape{1, 16, 16};
  std::uint64_t seed = 0;
  std::uint64_t split = 0;    // image stream; prior and atoms depend on seed only
  double mean = 0.5;          // gaussian_prior
  double variance = 0.05;     // gaussian_prior marginal variance
  double length_scale = 2.0;  // gaussian_prior correlation length, pixels
  double nugget = 1e-4;       // gaussian_prior diagonal jitter
  Index n_rects = 4;          // piecewise_constant / atoms
  Index n_atoms = 16;         // atoms file written for every generator

  void validate() const;
};

struct TaskSpec {
  TaskKind kind = TaskKind::super_resolution;
  double sigma_y = 0.05;
  Index scale = 2;             // super_resolution block size
  double blur_sigma = 3.0;     // deblur, nonlinear_deblur
  Index kernel_radius = 0;     // 0 selects ceil(3 sigma)
  double saturation = 2.0;     // nonlinear_deblur
  std::uint64_t seed = 1;      // measurement noise

  void validate() const;
};

struct ScheduleSpec {
  double t_min = 0.002;
  double t_max = 80.0;
  double rho = 7.0;
  std::vector<double> levels;  // explicit levels override the Karras schedule
  int ddrm_steps = 20;

  void validate() const;
};

struct ModelSpec {
  ModelKind kind = ModelKind::gaussian;
  bool condition_on_measurement = true;
  std::filesystem::path predictions;  // external: (N, E, C, H, W) tensor file
};

struct MetricsSpec {
  bool psnr = true;
  bool ssim = true;
  bool kid = true;
  bool fid = true;
  double peak = 1.0;
  FeatureMode features = FeatureMode::raw_pixels;
  Index patch = 2;
  Index kid_subset_size = 0;  // 0: min(N / 2, 100) for equal-size sets
  Index kid_subsets = 100;
  std::filesystem::path features_samples;    // external_file mode
  std::filesystem::path features_reference;  // external_file mode

  void validate() const;
};

struct TuneSpec {
  std::vector<double> gammas = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
  Index count = 32;
  std::uint64_t split = 1;  // dataset split used for tuning
  std::string criterion = "kid";  // kid or psnr

  void validate() const;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  TaskSpec task;
  ScheduleSpec schedule;
  SamplerConfig sampler;
  ModelSpec model;
  MetricsSpec metrics;
  TuneSpec tune;
  std::filesystem::path output_dir = "cminv_out";
  int workers = 1;
  bool export_images = false;  // PGM/PPM dumps next to sample tensors

  void validate() const;
};

/// Parses INI text with sections [run], [dataset], [task], [schedule],
/// [sampler], [model], [metrics], [tune]. Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value" overrides.
void apply_overrides(ExperimentConfig& config, const std::vector<std::string>& overrides);

/// Sets the run seed: dataset, task and sampler seeds are derived from it.
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

}  // namespace cminv
