// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cminv/parallel.hpp"

namespace cminv {

const char* to_string(SamplerVariant variant) {
  switch (variant) {
    case SamplerVariant::cm_baseline: return "cm_baseline";
    case SamplerVariant::ddim: return "ddim";
    case SamplerVariant::addim: return "addim";
    case SamplerVariant::inverse_addim: return "inverse_addim";
    case SamplerVariant::ddrm: return "ddrm";
  }
  return "unknown";
}

SamplerVariant parse_sampler_variant(std::string_view name) {
  for (auto v : {SamplerVariant::cm_baseline, SamplerVariant::ddim, SamplerVariant::addim,
                 SamplerVariant::inverse_addim, SamplerVariant::ddrm}) {
    if (name == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown sampler variant '" + std::string(name) + "'");
}

void SamplerConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  require(steps >= 1, "sampler: steps must be >= 1");
  require(std::isfinite(eta) && eta >= 0.0, "sampler: eta must be finite and >= 0");
  require(std::isfinite(gamma) && gamma >= 0.0, "sampler: gamma must be finite and >= 0");
  require(std::isfinite(eta_ddrm) && eta_ddrm >= 0.0 && eta_ddrm <= 1.0,
          "sampler: eta_ddrm must lie in [0, 1]");
  require(std::isfinite(eta_b) && eta_b >= 0.0 && eta_b <= 1.0, "sampler: eta_b must lie in [0, 1]");
}

double ddim_variance_ratio(double t, double s, double t_min) {
  if (!(t_min > 0.0) || !(s >= t_min) || !(t > s)) {
    std::ostringstream os;
    os << "ddim step requires t > s >= t_min > 0 (t=" << t << ", s=" << s
       << ", t_min=" << t_min << ")";
    throw std::invalid_argument(os.str());
  }
  return (s * s - t_min * t_min) / (t * t - t_min * t_min);
}

ImageTensor ddim_step(const ImageTensor& x_t, const ImageTensor& x_hat, double t, double s,
                      double t_min) {
  check_dim("ddim_step x_hat", x_t.size(), x_hat.size());
  const double r = std::sqrt(ddim_variance_ratio(t, s, t_min));
  return x_t.with_data(x_hat.data() + r * (x_t.data() - x_hat.data()));
}

double noise_coefficient(double ratio, double eps_norm, double added_variance) {
  if (!(eps_norm > 0.0)) throw std::invalid_argument("noise_coefficient: eps_norm must be > 0");
  if (!(added_variance >= 0.0)) {
    throw std::invalid_argument("noise_coefficient: added variance must be >= 0");
  }
  const double a = (1.0 - std::sqrt(ratio)) / eps_norm;
  return std::sqrt(ratio + a * a * added_variance);
}

namespace {

StepResult compensated_step(const ImageTensor& x_t, const ImageTensor& x_hat, double t, double s,
                            double t_min, double added_variance) {
  check_dim("step x_hat", x_t.size(), x_hat.size());
  const double ratio = ddim_variance_ratio(t, s, t_min);
  const Vector eps = x_t.data() - x_hat.data();
  const double eps_norm = eps.norm();
  StepResult out;
  if (eps_norm == 0.0) {
    out.next = ddim_step(x_t, x_hat, t, s, t_min);
    out.coefficient = std::sqrt(ratio);
    out.degenerate = true;
    return out;
  }
  out.coefficient = noise_coefficient(ratio, eps_norm, added_variance);
  out.next = x_t.with_data(x_hat.data() + out.coefficient * eps);
  return out;
}

}  // namespace

StepResult addim_step(const ImageTensor& x_t, const ImageTensor& x_hat,
                      const ImageTensor& x_teacher, double t, double s, double t_min, double eta) {
  check_dim("addim teacher", x_hat.size(), x_teacher.size());
  if (!(eta >= 0.0)) throw std::invalid_argument("addim: eta must be >= 0");
  const double err = (x_teacher.data() - x_hat.data()).squaredNorm();
  return compensated_step(x_t, x_hat, t, s, t_min, eta * err);
}

StepResult inverse_addim_step(const ImageTensor& x_t, const ImageTensor& x_hat, const Vector& y,
                              const ForwardOperator& op, double t, double s, double t_min,
                              double gamma) {
  check_dim("inverse_addim measurement", op.output_dim(), y.size());
  if (!(gamma >= 0.0)) throw std::invalid_argument("inverse_addim: gamma must be >= 0");
  const double resid = (y - op.apply(x_hat)).squaredNorm();
  StepResult out = compensated_step(x_t, x_hat, t, s, t_min, gamma * resid);
  out.residual_norm_sq = resid;
  return out;
}

DdrmBranch ddrm_branch(double singular_value, bool valid, double sigma_t, double sigma_y) {
  if (!valid || singular_value <= 0.0) return DdrmBranch::zero_singular;
  if (sigma_t < sigma_y / singular_value) return DdrmBranch::measurement_less_noisy;
  return DdrmBranch::measurement_noisier;
}

DdrmStepResult ddrm_step(const Vector& x_bar_next, const Vector& x_bar_theta,
                         const SpectralMeasurement& y_bar, const Vector& singular_values,
                         double sigma_t, double sigma_next, double sigma_y, double eta,
                         double eta_b, Rng& rng) {
  const Index n = x_bar_next.size();
  check_dim("ddrm x_bar_theta", n, x_bar_theta.size());
  check_dim("ddrm y_bar", n, y_bar.values.size());
  check_dim("ddrm y_bar mask", n, static_cast<Index>(y_bar.valid.size()));
  check_dim("ddrm singular values", n, singular_values.size());
  if (!(sigma_t >= 0.0) || !(sigma_next > sigma_t)) {
    throw std::invalid_argument("ddrm_step requires sigma_next > sigma_t >= 0");
  }
  if (!(sigma_y >= 0.0)) throw std::invalid_argument("ddrm_step: sigma_y must be >= 0");
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("ddrm_step: eta must lie in [0, 1]");

  const double keep = std::sqrt(1.0 - eta * eta);
  DdrmStepResult out;
  out.x_bar.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double s = singular_values[i];
    const double theta = x_bar_theta[i];
    const DdrmBranch branch = ddrm_branch(s, y_bar.valid[i], sigma_t, sigma_y);
    double mean = 0.0;
    double var = 0.0;
    switch (branch) {
      case DdrmBranch::zero_singular:
        mean = theta + keep * sigma_t * (x_bar_next[i] - theta) / sigma_next;
        var = eta * eta * sigma_t * sigma_t;
        break;
      case DdrmBranch::measurement_less_noisy: {
        const double noise = sigma_y / s;
        mean = theta + keep * sigma_t * (y_bar.values[i] - theta) / noise;
        var = eta * eta * sigma_t * sigma_t;
        break;
      }
      case DdrmBranch::measurement_noisier:
        mean = (1.0 - eta_b) * theta + eta_b * y_bar.values[i];
        var = sigma_t * sigma_t - sigma_y * sigma_y * eta_b * eta_b / (s * s);
        break;
    }
    if (var < 0.0) {
      if (var < -1e-12 * std::max(sigma_t * sigma_t, 1e-300)) {
        std::ostringstream os;
        os << "ddrm_step: negative variance " << var << " at index " << i << " (eta_b=" << eta_b
           << ")";
        throw std::domain_error(os.str());
      }
      var = 0.0;
    }
    // One draw per coordinate keeps the stream aligned across branches.
    out.x_bar[i] = mean + std::sqrt(var) * rng.normal();
    ++out.branch_hits[static_cast<std::size_t>(branch)];
  }
  return out;
}

namespace {

std::optional<double> residual_of(const Vector& y, const MeasurementModel& model,
                                  const ImageTensor& x_hat) {
  if (y.size() == 0) return std::nullopt;
  return (y - model.op->apply(x_hat)).squaredNorm();
}

NoiseSchedule fit_schedule(const NoiseSchedule& schedule, int steps) {
  const auto want = static_cast<std::size_t>(steps) + 1;
  if (schedule.size() == want) return schedule;
  if (!schedule.rho()) {
    std::ostringstream os;
    os << "sampler: explicit schedule has " << schedule.size() << " levels but steps=" << steps
       << " needs " << want;
    throw std::invalid_argument(os.str());
  }
  return schedule.with_levels(want);
}

}  // namespace

Trajectory sample(const SamplerConfig& config, const ConsistencyFn& f,
                  const NoiseSchedule& schedule, const Vector& y, const MeasurementModel& model,
                  const ImageTensor* teacher) {
  config.validate();
  if (config.variant == SamplerVariant::ddrm) {
    return ddrm_sample(config, f, fit_schedule(schedule, config.steps), y, model);
  }
  if (y.size() != 0) check_dim("measurement", model.op->output_dim(), y.size());
  if (config.variant == SamplerVariant::inverse_addim && y.size() == 0) {
    throw std::invalid_argument("inverse_addim requires a measurement");
  }
  if (config.variant == SamplerVariant::addim) {
    if (teacher == nullptr) throw std::invalid_argument("addim requires a teacher image");
    check_dim("addim teacher", model.op->input_dim(), teacher->size());
  }

  const NoiseSchedule sched = fit_schedule(schedule, config.steps);
  const auto& levels = sched.levels();
  const double t_min = sched.t_min();
  const Shape shape = model.op->input_shape();

  Rng rng(config.seed);
  ImageTensor x(shape, levels.front() * rng.normal_vector(shape.size()));
  Trajectory traj;

  for (std::size_t k = 0; k + 1 < levels.size() && config.steps > 1; ++k) {
    const double t = levels[k];
    const double s = levels[k + 1];
    ImageTensor x_hat = f.predict(x, y, t);
    TrajectoryRecord rec{t, x, x_hat, residual_of(y, model, x_hat), false};
    ImageTensor next;
    switch (config.variant) {
      case SamplerVariant::cm_baseline:
        next = x_hat.with_data(x_hat.data() +
                               std::sqrt(s * s - t_min * t_min) * rng.normal_vector(shape.size()));
        break;
      case SamplerVariant::ddim:
        next = ddim_step(x, x_hat, t, s, t_min);
        break;
      case SamplerVariant::addim: {
        StepResult r = addim_step(x, x_hat, *teacher, t, s, t_min, config.eta);
        rec.degenerate = r.degenerate;
        next = std::move(r.next);
        break;
      }
      case SamplerVariant::inverse_addim: {
        StepResult r = inverse_addim_step(x, x_hat, y, *model.op, t, s, t_min, config.gamma);
        rec.degenerate = r.degenerate;
        rec.residual_norm_sq = r.residual_norm_sq;
        next = std::move(r.next);
        break;
      }
      case SamplerVariant::ddrm:
        break;
    }
    traj.records.push_back(std::move(rec));
    x = std::move(next);
  }

  const double t_last = config.steps > 1 ? levels.back() : levels.front();
  ImageTensor x_hat = f.predict(x, y, t_last);
  traj.records.push_back({t_last, x, x_hat, residual_of(y, model, x_hat), false});
  traj.final = std::move(x_hat);
  return traj;
}

Trajectory ddrm_sample(const SamplerConfig& config, const ConsistencyFn& denoiser,
                       const NoiseSchedule& schedule, const Vector& y,
                       const MeasurementModel& model) {
  config.validate();
  const LinearOperatorPtr op = model.linear();
  if (!op) {
    throw UnsupportedVariantError("ddrm requires a linear operator with an SVD; got " +
                                  model.op->describe());
  }
  check_dim("measurement", op->output_dim(), y.size());

  const auto& levels = schedule.levels();
  const Shape shape = op->input_shape();
  const Vector s_full = op->spectral_singular_values();
  SpectralMeasurement y_bar = op->measurement_to_spectral(y);
  const Vector empty;

  Rng rng(config.seed);
  Vector x_bar = op->apply_V_transpose(levels.front() * rng.normal_vector(shape.size()));
  Trajectory traj;

  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    const double sigma_next = levels[k];
    const double sigma_t = levels[k + 1];
    ImageTensor x(shape, op->apply_V(x_bar));
    ImageTensor x_hat = denoiser.predict(x, empty, sigma_next);
    const Vector theta = op->apply_V_transpose(x_hat.data());
    traj.records.push_back({sigma_next, std::move(x), x_hat, residual_of(y, model, x_hat), false});
    DdrmStepResult step = ddrm_step(x_bar, theta, y_bar, s_full, sigma_t, sigma_next,
                                    model.sigma_y, config.eta_ddrm, config.eta_b, rng);
    for (std::size_t b = 0; b < 3; ++b) traj.ddrm_branch_hits[b] += step.branch_hits[b];
    x_bar = std::move(step.x_bar);
  }

  ImageTensor x(shape, op->apply_V(x_bar));
  ImageTensor x_hat = denoiser.predict(x, empty, levels.back());
  traj.records.push_back({levels.back(), std::move(x), x_hat, residual_of(y, model, x_hat), false});
  traj.final = std::move(x_hat);
  return traj;
}

std::vector<Trajectory> sample_batch(const SamplerConfig& config, const ConsistencyFn& f,
                                     const NoiseSchedule& schedule,
                                     const std::vector<Vector>& measurements,
                                     const MeasurementModel& model, int workers,
                                     const std::vector<ImageTensor>* teachers) {
  config.validate();
  if (teachers != nullptr && teachers->size() != measurements.size()) {
    throw std::invalid_argument("sample_batch: teacher count must match measurement count");
  }
  std::vector<Trajectory> out(measurements.size());
  parallel_for(static_cast<Index>(measurements.size()), workers, [&](Index i) {
    SamplerConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    const ImageTensor* teacher = teachers ? &(*teachers)[static_cast<std::size_t>(i)] : nullptr;
    out[static_cast<std::size_t>(i)] =
        sample(c, f, schedule, measurements[static_cast<std::size_t>(i)], model, teacher);
  });
  return out;
}

}  // namespace cminv
