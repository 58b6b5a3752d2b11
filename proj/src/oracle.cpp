// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/oracle.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cminv/parallel.hpp"
#include "cminv/random.hpp"
#include "cminv/samplers.hpp"

namespace cminv {

namespace {

struct RunningStats {
  Index n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double standard_error() const { return std::sqrt(variance() / static_cast<double>(n)); }
};

Matrix psd_root(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

ImageTensor flat(const Vector& v) { return ImageTensor({1, 1, v.size()}, v); }

/// Sum of per-coordinate unbiased variances across rows.
double covariance_trace(const std::vector<Vector>& samples) {
  const Index n = samples.front().size();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    RunningStats st;
    for (const auto& s : samples) st.add(s[i]);
    total += st.variance();
  }
  return total;
}

}  // namespace

VerificationReport mc_dropped_variance_check(const GaussianPrior& prior, double t, double s,
                                             double t_min, Index n_samples, std::uint64_t seed,
                                             double relative_tolerance) {
  if (n_samples < 4) throw std::invalid_argument("mc_dropped_variance_check: n_samples < 4");
  const double r = std::sqrt(ddim_variance_ratio(t, s, t_min));

  Rng rng(seed);
  const Vector x0 = prior.sample(rng);
  const Vector x_t = x0 + t * rng.normal_vector(prior.dim());
  const Vector mean = gaussian_denoise(prior, flat(x_t), t).data();
  const Matrix var = gaussian_conditional_covariance(prior, t);
  const Matrix root = psd_root(var);

  const Vector ddim = (1.0 - r) * mean + r * x_t;
  const double ddim_sq = ddim.squaredNorm();
  // Antithetic pairs (z, -z); each pair counts as two samples.
  RunningStats st;
  for (Index k = 0; k < n_samples / 2; ++k) {
    const Vector dev = (1.0 - r) * (root * rng.normal_vector(prior.dim()));
    st.add(0.5 * ((ddim + dev).squaredNorm() + (ddim - dev).squaredNorm()) - ddim_sq);
  }

  VerificationReport rep;
  rep.check_name = "dropped_variance";
  rep.statistic = st.mean;
  rep.bound_or_target = (1.0 - r) * (1.0 - r) * var.trace();
  rep.tolerance = relative_tolerance * std::abs(rep.bound_or_target);
  rep.n_samples = n_samples;
  rep.standard_error = st.standard_error();
  if (rep.bound_or_target == 0.0) {
    rep.passed = std::abs(rep.statistic) <= 1e-12;
  } else {
    rep.passed = std::abs(rep.statistic - rep.bound_or_target) <= rep.tolerance;
  }
  std::ostringstream os;
  os << "n=" << prior.dim() << " t=" << t << " s=" << s << " t_min=" << t_min << " r=" << r;
  rep.detail = os.str();
  return rep;
}

ResidualBoundReports residual_bound_check(const LinearOperator& op, const GaussianPrior& prior,
                                          double sigma_y, Index n_samples, std::uint64_t seed,
                                          double t) {
  if (n_samples < 2) throw std::invalid_argument("residual_bound_check: n_samples < 2");
  if (!(sigma_y >= 0.0)) throw std::invalid_argument("residual_bound_check: sigma_y < 0");
  check_dim("residual_bound_check operator", prior.dim(), op.input_dim());
  const double m = static_cast<double>(op.output_dim());
  const double norm_sq = op.spectral_norm() * op.spectral_norm();
  const double noise_floor = m * sigma_y * sigma_y;

  Rng rng(seed);
  RunningStats decomposition;
  RunningStats slack;
  RunningStats lhs;
  RunningStats err;
  for (Index k = 0; k < n_samples; ++k) {
    const Vector x = prior.sample(rng);
    const Vector x_t = x + t * rng.normal_vector(prior.dim());
    const Vector noise = sigma_y * rng.normal_vector(op.output_dim());
    const Vector y = op.apply(x) + noise;
    const Vector x_hat = gaussian_denoise(prior, flat(x_t), t).data();
    const double resid = (y - op.apply(x_hat)).squaredNorm();
    const double e = (x - x_hat).squaredNorm();
    decomposition.add(resid - op.apply(Vector(x - x_hat)).squaredNorm() - noise_floor);
    slack.add(norm_sq * e + noise_floor - resid);
    lhs.add(resid);
    err.add(e);
  }

  ResidualBoundReports out;
  auto& d = out.decomposition;
  d.check_name = "residual_decomposition";
  d.statistic = decomposition.mean;
  d.bound_or_target = 0.0;
  d.standard_error = decomposition.standard_error();
  d.tolerance = 3.0 * d.standard_error;
  d.n_samples = n_samples;
  d.passed = std::abs(d.statistic) <= d.tolerance;

  auto& b = out.bound;
  b.check_name = "residual_bound";
  b.statistic = lhs.mean;
  b.bound_or_target = norm_sq * err.mean + noise_floor;
  b.standard_error = slack.standard_error();
  b.tolerance = 3.0 * b.standard_error;
  b.n_samples = n_samples;
  b.passed = b.bound_or_target - b.statistic >= -b.tolerance;
  std::ostringstream os;
  os << "slack=" << b.bound_or_target - b.statistic << " m=" << op.output_dim()
     << " n=" << op.input_dim() << " t=" << t;
  b.detail = os.str();
  return out;
}

VarianceCompensationResult variance_compensation_check(
    const GaussianPrior& prior, LinearOperatorPtr op, double sigma_y,
    const NoiseSchedule& schedule, const std::vector<double>& gamma_grid, Index n_runs,
    std::uint64_t seed, int steps, int workers) {
  if (!op) throw std::invalid_argument("variance_compensation_check: null operator");
  if (gamma_grid.empty()) throw std::invalid_argument("variance_compensation_check: empty grid");
  if (n_runs < 2) throw std::invalid_argument("variance_compensation_check: n_runs < 2");

  Rng rng(seed);
  const Vector x_true = prior.sample(rng);
  const MeasurementModel model(op, sigma_y);
  const Vector y = degrade(model, x_true, rng.next_u64());
  const double post_trace = gaussian_posterior(prior, *op, y, sigma_y).covariance.trace();
  const GaussianMeasurementConsistency f(prior, op, sigma_y);
  const std::vector<Vector> ys(static_cast<std::size_t>(n_runs), y);
  const std::uint64_t run_seed = rng.next_u64();

  auto ratio_for = [&](SamplerVariant variant, double gamma) {
    SamplerConfig c;
    c.variant = variant;
    c.gamma = gamma;
    c.steps = steps;
    c.seed = run_seed;
    const auto trajs = sample_batch(c, f, schedule, ys, model, workers);
    std::vector<Vector> finals;
    finals.reserve(trajs.size());
    for (const auto& tr : trajs) finals.push_back(tr.final.data());
    const double tr = covariance_trace(finals);
    // A point-mass posterior is matched by definition.
    return post_trace == 0.0 ? 1.0 : tr / post_trace;
  };

  VarianceCompensationResult out;
  out.posterior_trace = post_trace;
  out.ddim_ratio = ratio_for(SamplerVariant::ddim, 0.0);
  out.gammas = gamma_grid;
  double best = std::abs(out.ddim_ratio - 1.0);
  bool improved = false;
  out.best_gamma = 0.0;
  for (double g : gamma_grid) {
    const double ratio = ratio_for(SamplerVariant::inverse_addim, g);
    out.ratios.push_back(ratio);
    if (std::abs(ratio - 1.0) < best) {
      best = std::abs(ratio - 1.0);
      out.best_gamma = g;
      improved = true;
    }
  }

  auto& rep = out.report;
  rep.check_name = "variance_compensation";
  rep.statistic = best;
  rep.bound_or_target = std::abs(out.ddim_ratio - 1.0);
  rep.tolerance = 0.0;
  rep.n_samples = n_runs;
  const bool trivial = post_trace == 0.0;
  rep.passed = trivial || (out.ddim_ratio < 1.0 && improved);
  std::ostringstream os;
  os << "ddim_ratio=" << out.ddim_ratio << " best_gamma=" << out.best_gamma
     << " posterior_trace=" << post_trace;
  rep.detail = os.str();
  return out;
}

DdrmPosteriorResult ddrm_posterior_mean_check(const GaussianPrior& prior, LinearOperatorPtr op,
                                              double sigma_y, const NoiseSchedule& schedule,
                                              double eta, double eta_b, Index n_runs,
                                              std::uint64_t seed, int workers) {
  if (!op) throw std::invalid_argument("ddrm_posterior_mean_check: null operator");
  if (n_runs < 2) throw std::invalid_argument("ddrm_posterior_mean_check: n_runs < 2");
  Rng rng(seed);
  const Vector x_true = prior.sample(rng);
  const MeasurementModel model(op, sigma_y);
  const Vector y = degrade(model, x_true, rng.next_u64());
  const GaussianConsistency denoiser(prior);

  SamplerConfig config;
  config.variant = SamplerVariant::ddrm;
  config.eta_ddrm = eta;
  config.eta_b = eta_b;
  config.steps = static_cast<int>(schedule.size()) - 1;
  const std::uint64_t base = rng.next_u64();
  std::vector<Trajectory> runs(static_cast<std::size_t>(n_runs));
  parallel_for(n_runs, workers, [&](Index i) {
    SamplerConfig c = config;
    c.seed = base + static_cast<std::uint64_t>(i);
    runs[static_cast<std::size_t>(i)] = ddrm_sample(c, denoiser, schedule, y, model);
  });

  DdrmPosteriorResult out;
  const Index n = prior.dim();
  out.posterior_mean = gaussian_posterior(prior, *op, y, sigma_y).mean;
  out.sample_mean.resize(n);
  out.standard_error.resize(n);
  double worst = 0.0;
  for (Index j = 0; j < n; ++j) {
    RunningStats st;
    for (const auto& tr : runs) st.add(tr.final.data()[j]);
    out.sample_mean[j] = st.mean;
    out.standard_error[j] = st.standard_error();
    const double diff = std::abs(st.mean - out.posterior_mean[j]);
    const double z = out.standard_error[j] > 0.0 ? diff / out.standard_error[j]
                                                 : (diff <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity());
    worst = std::max(worst, z);
  }
  for (const auto& tr : runs) {
    for (std::size_t b = 0; b < 3; ++b) out.branch_hits[b] += tr.ddrm_branch_hits[b];
  }

  auto& rep = out.report;
  rep.check_name = "ddrm_posterior_mean";
  rep.statistic = worst;
  rep.bound_or_target = 0.0;
  rep.tolerance = 3.0;
  rep.n_samples = n_runs;
  rep.passed = worst <= 3.0;
  std::ostringstream os;
  os << "levels=" << schedule.size() << " eta=" << eta << " eta_b=" << eta_b
     << " branch_hits=" << out.branch_hits[0] << "/" << out.branch_hits[1] << "/"
     << out.branch_hits[2];
  rep.detail = os.str();
  return out;
}

}  // namespace cminv
