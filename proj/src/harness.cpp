// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/harness.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "cminv/parallel.hpp"
#include "cminv/random.hpp"
#include "cminv/tensor_io.hpp"

namespace cminv {

namespace fs = std::filesystem;

namespace {

// Seed streams for derive_seed().
constexpr std::uint64_t kImageStream = 100;
constexpr std::uint64_t kAtomStream = 7;
constexpr std::uint64_t kTuneNoiseStream = 1000;

std::string indexed(const char* prefix, Index i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05lld.%s", prefix, static_cast<long long>(i), ext);
  return buf;
}

Json shape_json(const Shape& s) { return Json::array({s.channels, s.height, s.width}); }

Json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

std::vector<Json> read_jsonl(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing " + path.string());
  std::vector<Json> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
  }
  return out;
}

std::string jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) out += jsonl_line(r);
  return out;
}

ImageTensor draw_piecewise(Rng& rng, const DatasetSpec& spec) {
  const Shape& s = spec.shape;
  Vector data(s.size());
  for (Index c = 0; c < s.channels; ++c) {
    const double bg = rng.uniform();
    data.segment(c * s.height * s.width, s.height * s.width).setConstant(bg);
  }
  for (Index k = 0; k < spec.n_rects; ++k) {
    const Index i0 = rng.uniform_index(s.height);
    const Index j0 = rng.uniform_index(s.width);
    const Index h = 1 + rng.uniform_index(s.height - i0);
    const Index w = 1 + rng.uniform_index(s.width - j0);
    for (Index c = 0; c < s.channels; ++c) {
      const double v = rng.uniform();
      for (Index i = i0; i < i0 + h; ++i) {
        for (Index j = j0; j < j0 + w; ++j) data[(c * s.height + i) * s.width + j] = v;
      }
    }
  }
  return ImageTensor(s, std::move(data));
}

ImageTensor rounded(const ImageTensor& x) { return x.with_data(round_to_float32(x.data())); }

/// Random SPD matrix Q diag(λ) Qᵀ with λ uniform in [lo, hi].
Matrix random_spd(Rng& rng, Index n, double lo, double hi) {
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  }
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Vector lam(n);
  for (Index i = 0; i < n; ++i) lam[i] = lo + (hi - lo) * rng.uniform();
  Matrix out = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

GaussianPrior random_prior(Rng& rng, Index n, double mean_scale, double lo, double hi) {
  Vector mean = mean_scale * rng.normal_vector(n);
  return GaussianPrior(std::move(mean), random_spd(rng, n, lo, hi));
}

/// A family runs when the filter names it or a check inside it.
bool keep(const std::string& family, const std::string& filter) {
  return filter.empty() || family.find(filter) != std::string::npos ||
         filter.find(family) != std::string::npos;
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets and tasks

GaussianPrior generator_prior(const DatasetSpec& spec) {
  const Shape& s = spec.shape;
  const Index plane = s.height * s.width;
  const Index n = s.size();
  Matrix cov = Matrix::Zero(n, n);
  const double inv = 1.0 / (2.0 * spec.length_scale * spec.length_scale);
  for (Index c = 0; c < s.channels; ++c) {
    for (Index p = 0; p < plane; ++p) {
      for (Index q = 0; q < plane; ++q) {
        const double di = static_cast<double>(p / s.width - q / s.width);
        const double dj = static_cast<double>(p % s.width - q % s.width);
        cov(c * plane + p, c * plane + q) = spec.variance * std::exp(-(di * di + dj * dj) * inv);
      }
    }
  }
  cov.diagonal().array() += spec.nugget;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) cov(i, j) = static_cast<float>(cov(i, j));
  }
  return GaussianPrior(round_to_float32(Vector::Constant(n, spec.mean)), std::move(cov));
}

Dataset synthesize_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  if (spec.generator == Generator::gaussian_prior) ds.prior = generator_prior(spec);

  for (Index k = 0; k < spec.n_atoms; ++k) {
    Rng rng(derive_seed(spec.seed, kAtomStream, static_cast<std::uint64_t>(k)));
    if (ds.prior) {
      ds.atoms.push_back(round_to_float32(ds.prior->sample(rng)));
    } else {
      ds.atoms.push_back(rounded(draw_piecewise(rng, spec)).data());
    }
  }
  for (Index i = 0; i < spec.count; ++i) {
    Rng rng(derive_seed(spec.seed, kImageStream + spec.split, static_cast<std::uint64_t>(i)));
    switch (spec.generator) {
      case Generator::gaussian_prior:
        ds.images.push_back(rounded(ImageTensor(spec.shape, ds.prior->sample(rng))));
        break;
      case Generator::piecewise_constant:
        ds.images.push_back(rounded(draw_piecewise(rng, spec)));
        break;
      case Generator::atoms:
        ds.images.emplace_back(spec.shape, ds.atoms[static_cast<std::size_t>(
                                               rng.uniform_index(spec.n_atoms))]);
        break;
    }
  }
  return ds;
}

ForwardOperatorPtr make_task_operator(const TaskSpec& task, const Shape& shape) {
  task.validate();
  try {
    switch (task.kind) {
      case TaskKind::super_resolution:
        return make_downsample(shape.channels, shape.height, shape.width, task.scale);
      case TaskKind::deblur:
        return make_gaussian_blur(shape.channels, shape.height, shape.width, task.blur_sigma,
                                  task.kernel_radius);
      case TaskKind::inpaint:
        return make_center_inpaint(shape.channels, shape.height, shape.width);
      case TaskKind::denoise:
        return make_identity(shape);
      case TaskKind::nonlinear_deblur:
        return make_synthetic_nonlinear_blur(shape.channels, shape.height, shape.width,
                                             task.blur_sigma, task.saturation,
                                             task.kernel_radius);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid operator parameters: ") + e.what());
  }
  throw ConfigError("unknown task");
}

Json describe_task(const TaskSpec& task, const Shape& shape) {
  const ForwardOperatorPtr op = make_task_operator(task, shape);
  Json j;
  j["task"] = to_string(task.kind);
  j["operator"] = op->describe();
  j["linear"] = op->is_linear();
  j["input_shape"] = shape_json(shape);
  j["output_dims"] = op->output_dims();
  j["sigma_y"] = task.sigma_y;
  switch (task.kind) {
    case TaskKind::super_resolution: j["scale"] = task.scale; break;
    case TaskKind::nonlinear_deblur: j["saturation"] = task.saturation; [[fallthrough]];
    case TaskKind::deblur:
      j["blur_sigma"] = task.blur_sigma;
      j["kernel_radius"] = task.kernel_radius;
      break;
    case TaskKind::inpaint:
    case TaskKind::denoise: break;
  }
  return j;
}

std::vector<Vector> degrade_all(const std::vector<ImageTensor>& images,
                                const MeasurementModel& model, std::uint64_t seed) {
  std::vector<Vector> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    out.push_back(degrade(model, images[i], derive_seed(seed, 0, i)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models and sampling

ConsistencyFnPtr make_consistency(const ModelSpec& spec, const Dataset& dataset,
                                  const MeasurementModel& model, bool unconditional) {
  const bool conditional = !unconditional && spec.condition_on_measurement;
  switch (spec.kind) {
    case ModelKind::gaussian: {
      if (!dataset.prior) {
        throw ConfigError("model.type=gaussian needs a dataset from the gaussian_prior generator");
      }
      if (!conditional) return std::make_shared<GaussianConsistency>(*dataset.prior);
      const LinearOperatorPtr lin = model.linear();
      if (!lin) {
        throw UnsupportedVariantError(
            "the gaussian model conditions on y only through a linear operator; use "
            "model.type=empirical or model.conditioning=none for " + model.op->describe());
      }
      return std::make_shared<GaussianMeasurementConsistency>(*dataset.prior, lin, model.sigma_y);
    }
    case ModelKind::empirical: {
      if (dataset.atoms.empty()) throw ConfigError("model.type=empirical needs dataset atoms");
      EmpiricalPrior prior(dataset.atoms);
      if (!conditional) return std::make_shared<EmpiricalConsistency>(std::move(prior));
      if (!(model.sigma_y > 0.0)) {
        throw ConfigError("model.type=empirical with measurement conditioning needs sigma_y > 0");
      }
      return std::make_shared<EmpiricalMeasurementConsistency>(std::move(prior), model.op,
                                                               model.sigma_y);
    }
    case ModelKind::external:
      throw ConfigError("external predictions are per sample; use run_sampling");
  }
  throw ConfigError("unknown model type");
}

NoiseSchedule make_schedule(const ScheduleSpec& spec, int steps) {
  spec.validate();
  if (spec.levels.empty()) {
    return make_karras_schedule(static_cast<std::size_t>(steps) + 1, spec.t_min, spec.t_max,
                                spec.rho);
  }
  if (spec.levels.size() != static_cast<std::size_t>(steps) + 1) {
    throw ConfigError("schedule.levels has " + std::to_string(spec.levels.size()) +
                      " values but " + std::to_string(steps) + " steps need " +
                      std::to_string(steps + 1));
  }
  try {
    return NoiseSchedule(spec.levels, spec.t_min, spec.t_max);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

PrecomputedConsistency::PrecomputedConsistency(std::vector<double> levels,
                                               std::vector<ImageTensor> predictions)
    : levels_(std::move(levels)), predictions_(std::move(predictions)) {
  if (levels_.size() != predictions_.size()) {
    throw std::invalid_argument("PrecomputedConsistency: one prediction per level required");
  }
}

ImageTensor PrecomputedConsistency::predict(const ImageTensor& x_t, const Vector&, double t) const {
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    if (levels_[k] == t) {
      check_dim("precomputed prediction", x_t.size(), predictions_[k].size());
      return predictions_[k];
    }
  }
  throw std::invalid_argument("no precomputed prediction for level " + std::to_string(t));
}

std::vector<Trajectory> run_sampling(const ExperimentConfig& config, const Dataset& dataset,
                                     const MeasurementModel& model,
                                     const std::vector<Vector>& measurements,
                                     const std::vector<ImageTensor>* teachers) {
  SamplerConfig sc = config.sampler;
  const auto count = static_cast<Index>(measurements.size());
  std::vector<Trajectory> out(measurements.size());

  if (sc.variant == SamplerVariant::ddrm) {
    if (!model.linear()) {
      throw UnsupportedVariantError("ddrm needs a linear operator with an SVD; got " +
                                    model.op->describe());
    }
    if (config.model.kind == ModelKind::external) {
      throw UnsupportedVariantError("ddrm cannot run on precomputed predictions");
    }
    const NoiseSchedule schedule = make_schedule(
        config.schedule,
        config.schedule.levels.empty() ? config.schedule.ddrm_steps
                                       : static_cast<int>(config.schedule.levels.size()) - 1);
    sc.steps = static_cast<int>(schedule.size()) - 1;
    const ConsistencyFnPtr f = make_consistency(config.model, dataset, model, true);
    parallel_for(count, config.workers, [&](Index i) {
      SamplerConfig c = sc;
      c.seed = sc.seed + static_cast<std::uint64_t>(i);
      out[static_cast<std::size_t>(i)] =
          ddrm_sample(c, *f, schedule, measurements[static_cast<std::size_t>(i)], model);
    });
    return out;
  }

  if (sc.variant == SamplerVariant::addim && teachers == nullptr) {
    throw ConfigError("addim needs teacher images");
  }
  const NoiseSchedule schedule = make_schedule(config.schedule, sc.steps);

  if (config.model.kind == ModelKind::external) {
    const TensorData preds = read_tensor_file(config.model.predictions);
    const Shape shape = model.op->input_shape();
    const std::size_t evals = sc.steps == 1 ? 1 : schedule.size();
    if (preds.dims.size() != 5 || preds.dims[0] != measurements.size() ||
        preds.dims[1] != evals || preds.dims[2] != shape.channels ||
        preds.dims[3] != shape.height || preds.dims[4] != shape.width) {
      throw ConfigError("model.predictions must have dims (" + std::to_string(count) + ", " +
                        std::to_string(evals) + ", " + std::to_string(shape.channels) + ", " +
                        std::to_string(shape.height) + ", " + std::to_string(shape.width) + ")");
    }
    std::vector<double> levels(schedule.levels().begin(),
                               schedule.levels().begin() + static_cast<std::ptrdiff_t>(evals));
    parallel_for(count, config.workers, [&](Index i) {
      std::vector<ImageTensor> p;
      for (std::size_t k = 0; k < evals; ++k) {
        const Index offset = (i * static_cast<Index>(evals) + static_cast<Index>(k)) * shape.size();
        p.emplace_back(shape, preds.values.segment(offset, shape.size()));
      }
      const PrecomputedConsistency f(levels, std::move(p));
      SamplerConfig c = sc;
      c.seed = sc.seed + static_cast<std::uint64_t>(i);
      const ImageTensor* teacher = teachers ? &(*teachers)[static_cast<std::size_t>(i)] : nullptr;
      out[static_cast<std::size_t>(i)] =
          sample(c, f, schedule, measurements[static_cast<std::size_t>(i)], model, teacher);
    });
    return out;
  }

  const ConsistencyFnPtr f = make_consistency(config.model, dataset, model, false);
  return sample_batch(sc, *f, schedule, measurements, model, config.workers, teachers);
}

// ---------------------------------------------------------------------------
// Evaluation

EvaluationResult evaluate_reconstructions(const std::vector<ImageTensor>& reconstructions,
                                          const std::vector<ImageTensor>& references,
                                          const MetricsSpec& spec, std::uint64_t seed,
                                          const Matrix* features_samples,
                                          const Matrix* features_reference) {
  spec.validate();
  if (reconstructions.size() != references.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(reconstructions.size()) +
                                " reconstructions but " + std::to_string(references.size()) +
                                " references");
  }
  if (reconstructions.empty()) throw std::invalid_argument("evaluate: nothing to evaluate");
  EvaluationResult out;
  const auto n = static_cast<Index>(reconstructions.size());
  double psnr_sum = 0.0;
  double ssim_sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const auto& x = reconstructions[static_cast<std::size_t>(i)];
    const auto& r = references[static_cast<std::size_t>(i)];
    SampleMetrics row;
    row.index = i;
    row.psnr = spec.psnr ? psnr(x, r, spec.peak) : std::numeric_limits<double>::quiet_NaN();
    row.ssim = spec.ssim ? ssim(x, r, 0, 0.01, 0.03, spec.peak)
                         : std::numeric_limits<double>::quiet_NaN();
    psnr_sum += row.psnr;
    ssim_sum += row.ssim;
    out.rows.push_back(row);
  }
  out.aggregate.n_samples = n;
  out.aggregate.psnr = psnr_sum / static_cast<double>(n);
  out.aggregate.ssim = ssim_sum / static_cast<double>(n);

  if ((spec.kid || spec.fid) && n >= 4) {
    Matrix fx;
    Matrix fr;
    if (features_samples != nullptr && features_reference != nullptr) {
      fx = *features_samples;
      fr = *features_reference;
    } else {
      if (spec.features == FeatureMode::external_file) {
        throw std::invalid_argument("external_file features were not provided");
      }
      fx = feature_matrix(reconstructions, spec.features, spec.patch);
      fr = feature_matrix(references, spec.features, spec.patch);
    }
    if (spec.kid) {
      const Index subset = spec.kid_subset_size > 0
                               ? spec.kid_subset_size
                               : std::min<Index>(max_kid_subset(fx.rows(), fr.rows()), 100);
      out.kid = kid(fx, fr, subset, spec.kid_subsets, seed);
      out.aggregate.kid_x1000 = out.kid->kid_x1000;
      out.aggregate.kid_se_x1000 = out.kid->se_x1000;
    }
    if (spec.fid) {
      out.fid = fid(fx, fr);
      out.aggregate.fid = out.fid->distance;
    }
  }
  return out;
}

TuneResult tune_gamma(const ExperimentConfig& config) {
  config.validate();
  DatasetSpec spec = config.dataset;
  spec.split = config.tune.split;
  spec.count = config.tune.count;
  const Dataset ds = synthesize_dataset(spec);
  const MeasurementModel model(make_task_operator(config.task, spec.shape), config.task.sigma_y);
  const auto ys = degrade_all(ds.images, model,
                              derive_seed(config.task.seed, kTuneNoiseStream + config.tune.split));

  TuneResult out;
  out.criterion = config.tune.criterion;
  MetricsSpec metrics = config.metrics;
  metrics.kid = out.criterion == "kid";
  metrics.fid = false;
  double best = std::numeric_limits<double>::infinity();
  for (double g : config.tune.gammas) {
    ExperimentConfig c = config;
    c.sampler.variant = SamplerVariant::inverse_addim;
    c.sampler.gamma = g;
    const auto trajs = run_sampling(c, ds, model, ys, &ds.images);
    std::vector<ImageTensor> recon;
    for (const auto& t : trajs) recon.push_back(t.final);
    const auto ev = evaluate_reconstructions(recon, ds.images, metrics,
                                             derive_seed(config.sampler.seed, 77));
    const double score = out.criterion == "kid" ? *ev.aggregate.kid_x1000 : -ev.aggregate.psnr;
    out.gammas.push_back(g);
    out.scores.push_back(score);
    if (score < best) {
      best = score;
      out.best_gamma = g;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Verification suite

std::vector<VerificationReport> run_verification_suite(std::uint64_t seed,
                                                       const std::string& filter, int workers) {
  std::vector<VerificationReport> out;
  constexpr double t_min = kDefaultTMin;

  if (keep("dropped_variance", filter)) {
    for (std::uint64_t k = 0; k < 10; ++k) {
      Rng rng(derive_seed(seed, 11, k));
      const Index n = 2 + rng.uniform_index(15);
      const GaussianPrior prior = random_prior(rng, n, 0.5, 0.2, 1.5);
      const double t = 0.2 + 2.8 * rng.uniform();
      const double s = t_min + (0.5 * t - t_min) * rng.uniform();
      out.push_back(mc_dropped_variance_check(prior, t, s, t_min, 100000, rng.next_u64()));
    }
    const GaussianPrior point(Vector::Constant(4, 0.3), Matrix::Zero(4, 4));
    auto rep = mc_dropped_variance_check(point, 1.0, 0.5, t_min, 1000, derive_seed(seed, 12));
    rep.check_name = "dropped_variance_point_mass";
    out.push_back(rep);
  }

  if (keep("residual", filter)) {
    Rng rng(derive_seed(seed, 21));
    Matrix a(6, 8);
    for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
    const GaussianPrior prior = random_prior(rng, 8, 0.5, 0.2, 1.5);
    const auto res = residual_bound_check(*make_dense(a), prior, 0.05, 10000, rng.next_u64());
    out.push_back(res.decomposition);
    out.push_back(res.bound);
    for (std::uint64_t k = 0; k < 20; ++k) {
      Rng r(derive_seed(seed, 22, k));
      const Index n = 2 + r.uniform_index(15);
      const Index m = 1 + r.uniform_index(n);
      Matrix b(m, n);
      for (Index i = 0; i < b.size(); ++i) b.data()[i] = r.normal();
      const GaussianPrior p = random_prior(r, n, 0.5, 0.2, 1.5);
      auto bound = residual_bound_check(*make_dense(b), p, 0.05, 10000, r.next_u64()).bound;
      bound.check_name = "residual_bound_random";
      out.push_back(bound);
    }
    const GaussianPrior p0 = random_prior(rng, 5, 0.5, 0.2, 1.5);
    auto zero = residual_bound_check(*make_dense(Matrix::Zero(3, 5)), p0, 0.05, 10000,
                                     rng.next_u64());
    zero.bound.check_name = "residual_bound_zero_operator";
    out.push_back(zero.bound);
  }

  if (keep("variance_compensation", filter)) {
    Rng rng(derive_seed(seed, 31));
    const GaussianPrior prior = random_prior(rng, 16, 0.5, 0.02, 0.1);
    const auto res = variance_compensation_check(
        prior, make_identity({1, 4, 4}), 0.05,
        make_karras_schedule(3, t_min, kDefaultTMax, kDefaultRho), kDefaultGammaGrid, 1000,
        rng.next_u64(), 2, workers);
    out.push_back(res.report);
  }

  if (keep("ddrm", filter)) {
    Rng rng(derive_seed(seed, 41));
    const GaussianPrior prior = random_prior(rng, 4, 0.5, 0.2, 1.5);
    const auto res = ddrm_posterior_mean_check(
        prior, make_identity({1, 1, 4}), 0.05,
        make_karras_schedule(40, t_min, kDefaultTMax, kDefaultRho), 0.85, 1.0, 10000,
        rng.next_u64(), workers);
    out.push_back(res.report);

    // A diagonal operator with a zero, a weak and a strong singular value.
    Matrix d = Matrix::Zero(3, 3);
    d(0, 0) = 2.0;
    d(1, 1) = 0.01;
    const GaussianPrior p3 = GaussianPrior::isotropic(Vector::Zero(3), 1.0);
    const auto cov = ddrm_posterior_mean_check(
        p3, make_dense(d), 0.05, make_karras_schedule(40, t_min, kDefaultTMax, kDefaultRho),
        0.85, 1.0, 200, rng.next_u64(), workers);
    VerificationReport hits;
    hits.check_name = "ddrm_branch_coverage";
    hits.statistic = static_cast<double>(
        std::min({cov.branch_hits[0], cov.branch_hits[1], cov.branch_hits[2]}));
    hits.bound_or_target = 1.0;
    hits.n_samples = 200;
    hits.passed = hits.statistic >= 1.0;
    hits.detail = cov.report.detail;
    out.push_back(hits);
  }
  std::erase_if(out, [&](const VerificationReport& r) {
    return r.check_name.find(filter) == std::string::npos;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

Json to_json(const VerificationReport& r) {
  Json j;
  j["check"] = r.check_name;
  j["statistic"] = std::isfinite(r.statistic) ? Json(r.statistic) : Json(nullptr);
  j["bound_or_target"] = r.bound_or_target;
  j["tolerance"] = r.tolerance;
  j["standard_error"] = r.standard_error;
  j["n_samples"] = r.n_samples;
  j["passed"] = r.passed;
  j["detail"] = r.detail;
  return j;
}

Json to_json(const MetricReport& r) {
  Json j;
  j["n_samples"] = r.n_samples;
  j["psnr"] = optional_number(r.psnr);
  j["psnr_infinite"] = std::isinf(r.psnr);
  j["ssim"] = optional_number(r.ssim);
  j["kid_x1000"] = optional_number(r.kid_x1000);
  j["kid_se_x1000"] = optional_number(r.kid_se_x1000);
  j["fid"] = optional_number(r.fid);
  return j;
}

std::string jsonl_line(const Json& record) { return record.dump() + "\n"; }

std::string format_metric_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "method" << std::right << std::setw(10) << "PSNR"
     << std::setw(10) << "SSIM" << std::setw(12) << "KID" << std::setw(12) << "FID" << "\n";
  auto cell = [&os](const std::optional<double>& v, int width, int precision) {
    if (!v || !std::isfinite(*v)) {
      os << std::setw(width) << (v && std::isinf(*v) ? "inf" : "-");
    } else {
      os << std::setw(width) << std::fixed << std::setprecision(precision) << *v;
    }
  };
  for (const auto& [name, r] : rows) {
    os << std::left << std::setw(16) << name << std::right;
    cell(r.psnr, 10, 2);
    cell(r.ssim, 10, 4);
    cell(r.kid_x1000, 12, 3);
    cell(r.fid, 12, 3);
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// CLI subcommands

namespace {

fs::path dataset_dir(const ExperimentConfig& c) { return c.output_dir / "dataset"; }
fs::path measurement_dir(const ExperimentConfig& c) { return c.output_dir / "measurements"; }
fs::path samples_dir(const ExperimentConfig& c) { return c.output_dir / "samples"; }
fs::path eval_dir(const ExperimentConfig& c) { return c.output_dir / "eval"; }

Json dataset_info(const DatasetSpec& s) {
  Json j;
  j["generator"] = to_string(s.generator);
  j["count"] = s.count;
  j["shape"] = shape_json(s.shape);
  j["seed"] = s.seed;
  j["split"] = s.split;
  j["mean"] = s.mean;
  j["variance"] = s.variance;
  j["length_scale"] = s.length_scale;
  j["nugget"] = s.nugget;
  j["n_rects"] = s.n_rects;
  j["n_atoms"] = s.n_atoms;
  return j;
}

TensorData stacked(const std::vector<Vector>& rows, const Shape& shape) {
  TensorData t;
  t.dims = {static_cast<std::uint32_t>(rows.size()), static_cast<std::uint32_t>(shape.channels),
            static_cast<std::uint32_t>(shape.height), static_cast<std::uint32_t>(shape.width)};
  t.values.resize(static_cast<Index>(rows.size()) * shape.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.values.segment(static_cast<Index>(i) * shape.size(), shape.size()) = rows[i];
  }
  return t;
}

/// Reads a dataset directory written by `synthesize` (or any directory with a
/// manifest of CMT1 image files).
Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  const fs::path info = dir / "info.jsonl";
  if (fs::exists(info)) {
    const auto recs = read_jsonl(info);
    if (!recs.empty()) {
      const Json& j = recs.front();
      const std::string gen = j.value("generator", "gaussian_prior");
      for (auto g : {Generator::gaussian_prior, Generator::piecewise_constant, Generator::atoms}) {
        if (gen == to_string(g)) ds.spec.generator = g;
      }
      ds.spec.seed = j.value("seed", std::uint64_t{0});
      ds.spec.split = j.value("split", std::uint64_t{0});
    }
  }
  for (const auto& rec : read_jsonl(dir / "manifest.jsonl")) {
    ds.images.push_back(to_image(read_tensor_file(dir / rec.at("file").get<std::string>())));
  }
  ds.spec.count = static_cast<Index>(ds.images.size());
  if (!ds.images.empty()) ds.spec.shape = ds.images.front().shape();
  if (fs::exists(dir / "prior_mean.cmt") && fs::exists(dir / "prior_cov.cmt")) {
    const TensorData mean = read_tensor_file(dir / "prior_mean.cmt");
    const TensorData cov = read_tensor_file(dir / "prior_cov.cmt");
    const Index n = mean.values.size();
    if (cov.dims.size() != 2 || cov.dims[0] != n || cov.dims[1] != n) {
      throw FormatError("prior_cov.cmt must be (n, n) with n = " + std::to_string(n));
    }
    ds.prior = GaussianPrior(mean.values, Eigen::Map<const Matrix>(cov.values.data(), n, n));
  }
  if (fs::exists(dir / "atoms.cmt")) {
    const TensorData atoms = read_tensor_file(dir / "atoms.cmt");
    const Index k = atoms.dims.empty() ? 0 : atoms.dims[0];
    const Index d = k > 0 ? atoms.values.size() / k : 0;
    for (Index i = 0; i < k; ++i) ds.atoms.push_back(atoms.values.segment(i * d, d));
  }
  return ds;
}

struct LoadedMeasurements {
  std::vector<Vector> values;
  std::vector<Json> records;
};

LoadedMeasurements load_measurements(const ExperimentConfig& c, const Json& expected_task) {
  LoadedMeasurements out;
  out.records = read_jsonl(measurement_dir(c) / "manifest.jsonl");
  for (const auto& rec : out.records) {
    if (rec.at("operator") != expected_task) {
      throw ConfigError("measurements in " + measurement_dir(c).string() +
                        " were produced with a different task: " + rec.at("operator").dump());
    }
    out.values.push_back(
        read_tensor_file(measurement_dir(c) / rec.at("measurement").get<std::string>()).values);
  }
  return out;
}

}  // namespace

int cmd_synthesize(const ExperimentConfig& config) {
  config.validate();
  const Dataset ds = synthesize_dataset(config.dataset);
  const fs::path dir = dataset_dir(config);
  std::vector<Json> manifest;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    const std::string file = indexed("x", static_cast<Index>(i), "cmt");
    write_tensor_file(dir / file, to_tensor_data(ds.images[i]));
    Json rec;
    rec["index"] = i;
    rec["file"] = file;
    rec["shape"] = shape_json(ds.images[i].shape());
    manifest.push_back(std::move(rec));
  }
  if (ds.prior) {
    const Index n = ds.prior->dim();
    write_tensor_file(dir / "prior_mean.cmt", {{static_cast<std::uint32_t>(n)}, ds.prior->mean()});
    write_tensor_file(dir / "prior_cov.cmt",
                      {{static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(n)},
                       Eigen::Map<const Vector>(ds.prior->covariance().data(), n * n)});
  }
  write_tensor_file(dir / "atoms.cmt", stacked(ds.atoms, config.dataset.shape));
  write_text_file(dir / "info.jsonl", jsonl_line(dataset_info(config.dataset)));
  write_text_file(dir / "manifest.jsonl", jsonl(manifest));
  std::cout << "synthesized " << ds.images.size() << " images (" << to_string(config.dataset.generator)
            << ", " << config.dataset.shape.to_string() << ") in " << dir.string() << "\n";
  return 0;
}

int cmd_degrade(const ExperimentConfig& config) {
  config.validate();
  const Dataset ds = load_dataset(dataset_dir(config));
  const Shape shape = ds.images.empty() ? config.dataset.shape : ds.images.front().shape();
  const MeasurementModel model(make_task_operator(config.task, shape), config.task.sigma_y);
  const Json task = describe_task(config.task, shape);
  const auto ys = degrade_all(ds.images, model, config.task.seed);

  const fs::path dir = measurement_dir(config);
  std::vector<Json> manifest;
  std::vector<std::uint32_t> dims;
  for (Index d : model.op->output_dims()) dims.push_back(static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const std::string file = indexed("y", static_cast<Index>(i), "cmt");
    write_tensor_file(dir / file, {dims, ys[i]});
    Json rec;
    rec["index"] = i;
    rec["input"] = "../dataset/" + indexed("x", static_cast<Index>(i), "cmt");
    rec["measurement"] = file;
    rec["seed"] = derive_seed(config.task.seed, 0, i);
    rec["operator"] = task;
    manifest.push_back(std::move(rec));
  }
  write_text_file(dir / "manifest.jsonl", jsonl(manifest));
  std::cout << "degraded " << ys.size() << " images with " << model.op->describe()
            << " (sigma_y=" << config.task.sigma_y << ") into " << dir.string() << "\n";
  return 0;
}

int cmd_sample(const ExperimentConfig& config) {
  config.validate();
  const Dataset ds = load_dataset(dataset_dir(config));
  const Shape shape = ds.images.empty() ? config.dataset.shape : ds.images.front().shape();
  const MeasurementModel model(make_task_operator(config.task, shape), config.task.sigma_y);
  const auto meas = load_measurements(config, describe_task(config.task, shape));
  if (config.sampler.variant == SamplerVariant::ddrm && !model.linear()) {
    throw UnsupportedVariantError("ddrm needs a linear operator with an SVD; got " +
                                  model.op->describe());
  }
  const bool need_teacher = config.sampler.variant == SamplerVariant::addim;
  if (need_teacher && ds.images.size() != meas.values.size()) {
    throw ConfigError("addim needs one teacher image per measurement");
  }
  const auto trajs =
      run_sampling(config, ds, model, meas.values, need_teacher ? &ds.images : nullptr);

  const fs::path dir = samples_dir(config);
  std::vector<Json> manifest;
  std::vector<Json> summaries;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& tr = trajs[i];
    const std::string file = indexed("xhat", static_cast<Index>(i), "cmt");
    write_tensor_file(dir / file, to_tensor_data(tr.final));
    if (config.export_images && (shape.channels == 1 || shape.channels == 3)) {
      write_netpbm(dir / indexed("xhat", static_cast<Index>(i), shape.channels == 1 ? "pgm" : "ppm"),
                   tr.final);
    }
    Json rec;
    rec["index"] = i;
    rec["measurement"] = meas.records[i].at("measurement");
    rec["output"] = file;
    rec["variant"] = to_string(config.sampler.variant);
    rec["seed"] = config.sampler.seed + i;
    manifest.push_back(std::move(rec));

    Json sum;
    sum["index"] = i;
    sum["variant"] = to_string(config.sampler.variant);
    Json steps = Json::array();
    for (const auto& r : tr.records) {
      Json s;
      s["t"] = r.t;
      s["residual_norm_sq"] = optional_number(r.residual_norm_sq);
      s["degenerate"] = r.degenerate;
      steps.push_back(std::move(s));
    }
    sum["steps"] = std::move(steps);
    if (config.sampler.variant == SamplerVariant::ddrm) sum["ddrm_branch_hits"] = tr.ddrm_branch_hits;
    summaries.push_back(std::move(sum));
  }
  Json header;
  header["variant"] = to_string(config.sampler.variant);
  header["steps"] = config.sampler.steps;
  header["gamma"] = config.sampler.gamma;
  header["eta"] = config.sampler.eta;
  header["eta_ddrm"] = config.sampler.eta_ddrm;
  header["eta_b"] = config.sampler.eta_b;
  header["model"] = to_string(config.model.kind);
  write_text_file(dir / "trajectories.jsonl", jsonl(summaries));
  write_text_file(dir / "run.jsonl", jsonl_line(header));
  write_text_file(dir / "manifest.jsonl", jsonl(manifest));
  std::cout << "sampled " << trajs.size() << " reconstructions with "
            << to_string(config.sampler.variant) << " into " << dir.string() << "\n";
  return 0;
}

int cmd_evaluate(const ExperimentConfig& config) {
  config.validate();
  const Dataset ds = load_dataset(dataset_dir(config));
  const auto manifest = read_jsonl(samples_dir(config) / "manifest.jsonl");
  std::vector<ImageTensor> recon;
  std::string method = "samples";
  for (const auto& rec : manifest) {
    recon.push_back(to_image(read_tensor_file(samples_dir(config) / rec.at("output").get<std::string>())));
    method = rec.value("variant", method);
  }
  if (recon.size() != ds.images.size()) {
    throw std::runtime_error("evaluate: " + std::to_string(recon.size()) +
                             " reconstructions but " + std::to_string(ds.images.size()) +
                             " references");
  }
  std::optional<Matrix> fx;
  std::optional<Matrix> fr;
  if (config.metrics.features == FeatureMode::external_file) {
    fx = load_feature_file(config.metrics.features_samples, static_cast<Index>(recon.size()));
    fr = load_feature_file(config.metrics.features_reference, static_cast<Index>(recon.size()));
  }
  const auto ev = evaluate_reconstructions(recon, ds.images, config.metrics,
                                           derive_seed(config.sampler.seed, 77),
                                           fx ? &*fx : nullptr, fr ? &*fr : nullptr);
  std::vector<Json> lines;
  for (const auto& row : ev.rows) {
    Json j;
    j["index"] = row.index;
    j["psnr"] = optional_number(row.psnr);
    j["psnr_infinite"] = std::isinf(row.psnr);
    j["ssim"] = optional_number(row.ssim);
    lines.push_back(std::move(j));
  }
  Json agg;
  agg["aggregate"] = true;
  agg["method"] = method;
  agg["features"] = to_string(config.metrics.features);
  agg.update(to_json(ev.aggregate));
  lines.push_back(std::move(agg));
  const std::string table = format_metric_table({{method, ev.aggregate}});
  write_text_file(eval_dir(config) / "metrics.txt", table);
  write_text_file(eval_dir(config) / "metrics.jsonl", jsonl(lines));
  std::cout << table;
  return 0;
}

int cmd_verify(const ExperimentConfig& config, const std::string& filter, std::uint64_t seed) {
  const auto reports = run_verification_suite(seed, filter, config.workers);
  std::vector<Json> lines;
  bool ok = true;
  for (const auto& r : reports) {
    lines.push_back(to_json(r));
    ok = ok && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.check_name << " statistic=" << r.statistic
              << " target=" << r.bound_or_target << " tol=" << r.tolerance << " " << r.detail
              << "\n";
  }
  write_text_file(config.output_dir / "verify.jsonl", jsonl(lines));
  std::cout << reports.size() << " checks, " << (ok ? "all passed" : "FAILURES") << "\n";
  return ok ? 0 : 1;
}

int cmd_tune_gamma(const ExperimentConfig& config) {
  const TuneResult res = tune_gamma(config);
  std::vector<Json> lines;
  for (std::size_t i = 0; i < res.gammas.size(); ++i) {
    Json j;
    j["gamma"] = res.gammas[i];
    j["criterion"] = res.criterion;
    j["score"] = res.scores[i];
    lines.push_back(std::move(j));
    std::cout << "gamma=" << res.gammas[i] << " " << res.criterion << "=" << res.scores[i] << "\n";
  }
  Json best;
  best["best_gamma"] = res.best_gamma;
  best["criterion"] = res.criterion;
  best["task"] = to_string(config.task.kind);
  lines.push_back(std::move(best));
  write_text_file(config.output_dir / "tune_gamma.jsonl", jsonl(lines));
  std::cout << "best gamma " << res.best_gamma << "\n";
  return 0;
}

}  // namespace cminv
