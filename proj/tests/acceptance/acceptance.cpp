// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 on any FAIL.

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cminv/harness.hpp"
#include "cminv/parallel.hpp"
#include "cminv/random.hpp"
#include "cminv/tensor_io.hpp"

using namespace cminv;

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

Matrix random_spd(Rng& rng, Index n, double lo, double hi) {
  Matrix g(n, n);
  for (Index i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Vector lam(n);
  for (Index i = 0; i < n; ++i) lam[i] = lo + (hi - lo) * rng.uniform();
  const Matrix c = q * lam.asDiagonal() * q.transpose();
  return 0.5 * (c + c.transpose());
}

Matrix random_matrix(Rng& rng, Index m, Index n) {
  Matrix a(m, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return a;
}

ImageTensor flat(Vector v) {
  const Index n = v.size();
  return ImageTensor({1, 1, n}, std::move(v));
}

/// tr (Σ⁻¹ + t⁻² I)⁻¹ from the eigenvalues of Σ.
double conditional_trace(const Matrix& sigma, double t) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  double tr = 0.0;
  for (Index i = 0; i < sigma.rows(); ++i) {
    const double lam = std::max(es.eigenvalues()[i], 0.0);
    tr += lam * t * t / (lam + t * t);
  }
  return tr;
}

double trace_of_covariance(const std::vector<Vector>& xs) {
  const Index n = xs.front().size();
  Vector mean = Vector::Zero(n);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double tr = 0.0;
  for (const auto& x : xs) tr += (x - mean).squaredNorm();
  return tr / static_cast<double>(xs.size() - 1);
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome reductions() {
  Rng rng(101);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Index n = 1 + rng.uniform_index(64);
    const Index m = 1 + rng.uniform_index(n);
    const double t_min = 0.001 + 0.01 * rng.uniform();
    const double t = t_min + (80.0 - t_min) * rng.uniform();
    const double s = t_min + (t - t_min) * rng.uniform();
    const ImageTensor x_t = flat(3.0 * rng.normal_vector(n));
    const ImageTensor x_hat = flat(rng.normal_vector(n));
    const ImageTensor teacher = flat(rng.normal_vector(n));
    const auto op = make_dense(random_matrix(rng, m, n));
    const Vector y = rng.normal_vector(m);

    const Vector ddim = ddim_step(x_t, x_hat, t, s, t_min).data();
    const Vector inv = inverse_addim_step(x_t, x_hat, y, *op, t, s, t_min, 0.0).next.data();
    const Vector ad = addim_step(x_t, x_hat, teacher, t, s, t_min, 0.0).next.data();
    worst = std::max({worst, (inv - ddim).lpNorm<Eigen::Infinity>(),
                      (ad - ddim).lpNorm<Eigen::Infinity>()});
  }
  return {worst <= 1e-12, fmt("1000 cases, max |diff| = %.3g", worst)};
}

Outcome dropped_variance() {
  Rng rng(202);
  constexpr double t_min = kDefaultTMin;
  double worst = 0.0;
  bool ok = true;
  for (int k = 0; k < 10; ++k) {
    const Index n = 1 + rng.uniform_index(16);
    const GaussianPrior prior(0.5 * rng.normal_vector(n), random_spd(rng, n, 0.1, 2.0));
    const double t = 0.1 + 4.0 * rng.uniform();
    const double s = t_min + (0.9 * t - t_min) * rng.uniform();
    const auto rep = mc_dropped_variance_check(prior, t, s, t_min, 100000, rng.next_u64());
    const double r = std::sqrt((s * s - t_min * t_min) / (t * t - t_min * t_min));
    const double target = (1.0 - r) * (1.0 - r) * conditional_trace(prior.covariance(), t);
    const double rel = std::abs(rep.statistic - target) / target;
    worst = std::max(worst, rel);
    ok = ok && rel <= 0.02 && rep.n_samples == 100000;
  }
  return {ok, fmt("10 configs at 1e5 samples, max relative error = %.4f", worst)};
}

Outcome residual_decomposition_and_bound() {
  Rng rng(303);
  const GaussianPrior prior(0.5 * rng.normal_vector(8), random_spd(rng, 8, 0.2, 1.5));
  const auto dec =
      residual_bound_check(*make_dense(random_matrix(rng, 6, 8)), prior, 0.05, 10000,
                           rng.next_u64())
          .decomposition;
  const bool dec_ok = std::abs(dec.statistic) <= 3.0 * dec.standard_error;

  int nonneg = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 100; ++k) {
    const Index n = 2 + rng.uniform_index(15);
    const Index m = 1 + rng.uniform_index(n);
    const GaussianPrior p(0.5 * rng.normal_vector(n), random_spd(rng, n, 0.2, 1.5));
    const auto b = residual_bound_check(*make_dense(random_matrix(rng, m, n)), p, 0.05, 10000,
                                        rng.next_u64())
                       .bound;
    const double slack = b.bound_or_target - b.statistic;
    min_slack = std::min(min_slack, slack);
    if (slack >= 0.0) ++nonneg;
  }
  return {dec_ok && nonneg == 100,
          fmt("decomposition %.3g SE; slack >= 0 in %.0f/100 trials, min slack %.4g",
              std::abs(dec.statistic) / dec.standard_error, nonneg, min_slack)};
}

Outcome ddrm_correctness() {
  Rng rng(404);
  constexpr Index n = 4;
  constexpr double sigma_y = 0.05;
  constexpr Index runs = 10000;
  const GaussianPrior prior(0.5 * rng.normal_vector(n), random_spd(rng, n, 0.2, 1.5));
  const auto op = make_identity({1, 1, n});
  const MeasurementModel model(op, sigma_y);
  const Vector x = prior.sample(rng);
  const Vector y = x + sigma_y * rng.normal_vector(n);

  // Posterior mean for an identity operator: μ + Σ (Σ + σ_y² I)⁻¹ (y − μ).
  const Matrix& sigma = prior.covariance();
  const Matrix gram = sigma + sigma_y * sigma_y * Matrix::Identity(n, n);
  const Vector post = prior.mean() + sigma * gram.ldlt().solve(y - prior.mean());

  const GaussianConsistency f(prior);
  const NoiseSchedule schedule = make_karras_schedule(40, kDefaultTMin, kDefaultTMax, kDefaultRho);
  SamplerConfig sc;
  sc.variant = SamplerVariant::ddrm;
  sc.steps = 39;
  const std::uint64_t base = rng.next_u64();
  std::vector<Vector> finals(runs);
  parallel_for(runs, 1, [&](Index i) {
    SamplerConfig c = sc;
    c.seed = base + static_cast<std::uint64_t>(i);
    finals[static_cast<std::size_t>(i)] = ddrm_sample(c, f, schedule, y, model).final.data();
  });
  Vector mean = Vector::Zero(n);
  for (const auto& v : finals) mean += v;
  mean /= static_cast<double>(runs);
  Vector var = Vector::Zero(n);
  for (const auto& v : finals) var += (v - mean).cwiseAbs2();
  var /= static_cast<double>(runs - 1);
  double worst = 0.0;
  for (Index i = 0; i < n; ++i) {
    worst = std::max(worst, std::abs(mean[i] - post[i]) / std::sqrt(var[i] / runs));
  }

  // Singular values 2, 0.01 and 0 exercise all three update cases.
  Matrix d = Matrix::Zero(3, 3);
  d(0, 0) = 2.0;
  d(1, 1) = 0.01;
  const MeasurementModel diag(make_dense(d), sigma_y);
  const GaussianPrior iso = GaussianPrior::isotropic(Vector::Zero(3), 1.0);
  const GaussianConsistency g(iso);
  std::array<Index, 3> hits{0, 0, 0};
  for (Index i = 0; i < 50; ++i) {
    SamplerConfig c = sc;
    c.seed = base + static_cast<std::uint64_t>(runs + i);
    const Vector yd = degrade(diag, iso.sample(rng), rng.next_u64());
    const auto tr = ddrm_sample(c, g, schedule, yd, diag);
    for (int b = 0; b < 3; ++b) hits[b] += tr.ddrm_branch_hits[b];
  }
  const bool ok = worst <= 3.0 && hits[0] > 0 && hits[1] > 0 && hits[2] > 0;
  std::ostringstream os;
  os << fmt("max |mean - posterior mean| = %.2f SE over 1e4 runs", worst) << "; branch hits "
     << hits[0] << "/" << hits[1] << "/" << hits[2];
  return {ok, os.str()};
}

Outcome variance_compensation() {
  DatasetSpec spec;
  spec.shape = {1, 4, 4};
  spec.seed = 505;
  const GaussianPrior prior = generator_prior(spec);
  constexpr double sigma_y = 0.05;
  constexpr Index runs = 1000;
  const auto op = make_identity(spec.shape);
  const MeasurementModel model(op, sigma_y);
  Rng rng(506);
  const Vector x = prior.sample(rng);
  const Vector y = x + sigma_y * rng.normal_vector(16);

  // Identity operator: Var[x | y] = Σ − Σ (Σ + σ_y² I)⁻¹ Σ.
  const Matrix& sigma = prior.covariance();
  const Matrix gram = sigma + sigma_y * sigma_y * Matrix::Identity(16, 16);
  const double post_trace = (sigma - sigma * gram.ldlt().solve(sigma)).trace();

  const GaussianMeasurementConsistency f(prior, op, sigma_y);
  const NoiseSchedule schedule = make_karras_schedule(3, kDefaultTMin, kDefaultTMax, kDefaultRho);
  const std::vector<Vector> ys(runs, y);
  const std::uint64_t seed = rng.next_u64();
  auto ratio = [&](SamplerVariant v, double gamma) {
    SamplerConfig c;
    c.variant = v;
    c.gamma = gamma;
    c.steps = 2;
    c.seed = seed;
    const auto trajs = sample_batch(c, f, schedule, ys, model, 1);
    std::vector<Vector> finals;
    for (const auto& t : trajs) finals.push_back(t.final.data());
    return trace_of_covariance(finals) / post_trace;
  };
  const double ddim = ratio(SamplerVariant::ddim, 0.0);
  double best = ddim;
  double best_gamma = 0.0;
  for (double g : kDefaultGammaGrid) {
    const double r = ratio(SamplerVariant::inverse_addim, g);
    if (std::abs(r - 1.0) < std::abs(best - 1.0)) {
      best = r;
      best_gamma = g;
    }
  }
  const bool ok = ddim < 0.9 && std::abs(best - 1.0) < std::abs(ddim - 1.0);
  return {ok, fmt("DDIM trace ratio %.4f; best gamma %.2f gives ratio %.4f", ddim, best_gamma, best)};
}

Outcome desk_scale() {
  const std::vector<TaskKind> tasks = {TaskKind::super_resolution, TaskKind::deblur,
                                       TaskKind::inpaint};
  int wins = 0;
  std::ostringstream detail;
  for (TaskKind task : tasks) {
    ExperimentConfig c;
    c.task.kind = task;
    c.task.sigma_y = 0.05;
    c.dataset.shape = {1, 16, 16};
    c.dataset.count = 1000;
    c.tune.count = 1000;
    c.metrics.kid_subset_size = 500;
    c.metrics.kid_subsets = 50;
    apply_seed(c, 2026);
    c.validate();

    const Dataset ds = synthesize_dataset(c.dataset);
    const MeasurementModel model(make_task_operator(c.task, c.dataset.shape), c.task.sigma_y);
    const auto ys = degrade_all(ds.images, model, c.task.seed);
    const TuneResult tuned = tune_gamma(c);

    std::vector<std::pair<std::string, MetricReport>> rows;
    auto run = [&](SamplerVariant v, double gamma) {
      ExperimentConfig e = c;
      e.sampler.variant = v;
      e.sampler.gamma = gamma;
      std::vector<ImageTensor> recon;
      for (const auto& t : run_sampling(e, ds, model, ys)) recon.push_back(t.final);
      const auto ev =
          evaluate_reconstructions(recon, ds.images, c.metrics, derive_seed(c.sampler.seed, 77));
      rows.emplace_back(to_string(v), ev.aggregate);
      return ev.aggregate;
    };
    const MetricReport cm = run(SamplerVariant::cm_baseline, 0.0);
    run(SamplerVariant::ddim, 0.0);
    const MetricReport inv = run(SamplerVariant::inverse_addim, tuned.best_gamma);
    const bool win = *inv.kid_x1000 <= *cm.kid_x1000;
    if (win) ++wins;

    std::cout << "  task " << to_string(task) << " (tuned gamma " << tuned.best_gamma << ")\n";
    std::istringstream table(format_metric_table(rows));
    for (std::string line; std::getline(table, line);) std::cout << "    " << line << "\n";
    detail << to_string(task) << (win ? " <=" : " >") << " ";
  }
  return {wins >= 2, detail.str() + fmt("(inverse_addim KID <= cm_baseline in %.0f/3)", wins)};
}

Outcome metric_correctness() {
  bool ok = true;
  std::ostringstream os;

  Rng rng(707);
  const Shape shape{1, 16, 16};
  Vector ref(shape.size());
  for (Index i = 0; i < ref.size(); ++i) ref[i] = 0.8 * rng.uniform();
  const ImageTensor r(shape, ref);
  const ImageTensor x(shape, (ref.array() + 0.1).matrix());
  const double p = psnr(x, r);
  ok = ok && std::abs(p - 20.0) <= 1e-9;
  const double s = ssim(r, r);
  ok = ok && std::abs(s - 1.0) <= 1e-12;

  double fworst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Index d = 1 + rng.uniform_index(12);
    Vector m1 = rng.normal_vector(d);
    Vector m2 = rng.normal_vector(d);
    Vector a(d);
    Vector b(d);
    for (Index i = 0; i < d; ++i) {
      a[i] = 0.1 + 2.0 * rng.uniform();
      b[i] = 0.1 + 2.0 * rng.uniform();
    }
    double expect = (m1 - m2).squaredNorm();
    for (Index i = 0; i < d; ++i) expect += a[i] + b[i] - 2.0 * std::sqrt(a[i] * b[i]);
    const double got = frechet_distance(m1, a.asDiagonal().toDenseMatrix(), m2,
                                        b.asDiagonal().toDenseMatrix())
                           .distance;
    fworst = std::max(fworst, std::abs(got - expect));
  }
  ok = ok && fworst <= 1e-8;

  Matrix feats(400, 16);
  for (Index i = 0; i < feats.size(); ++i) feats.data()[i] = rng.normal();
  const KidResult same = kid(feats, feats, 100, 100, 708);
  ok = ok && std::abs(same.kid_x1000) <= 3.0 * same.se_x1000;

  os << fmt("PSNR %.12f dB, SSIM(x,x) = %.15f, ", p, s)
     << fmt("Frechet max err %.2g, ", fworst)
     << fmt("same-set KID %.4f (SE %.4f)", same.kid_x1000, same.se_x1000);
  return {ok, os.str()};
}

std::string read_all(const fs::path& p) { return read_text_file(p); }

/// Relative path -> bytes for every regular file below root.
std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      out.emplace_back(fs::relative(e.path(), root).generic_string(), read_all(e.path()));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "cminv_acceptance_determinism";
  fs::remove_all(base);
  auto pipeline = [&](const std::string& name, int workers) {
    ExperimentConfig c;
    c.dataset.count = 12;
    c.tune.count = 8;
    c.tune.gammas = {0.0, 1.0, 4.0};
    c.task.kind = TaskKind::deblur;
    c.export_images = true;
    apply_seed(c, 808);
    c.workers = workers;
    c.output_dir = base / name;
    std::streambuf* saved = std::cout.rdbuf();
    std::ostringstream sink;
    std::cout.rdbuf(sink.rdbuf());
    try {
      cmd_synthesize(c);
      cmd_degrade(c);
      cmd_tune_gamma(c);
      cmd_sample(c);
      cmd_evaluate(c);
      ExperimentConfig d = c;
      d.sampler.variant = SamplerVariant::ddrm;
      d.output_dir = base / name / "ddrm";
      cmd_synthesize(d);
      cmd_degrade(d);
      cmd_sample(d);
      cmd_evaluate(d);
    } catch (...) {
      std::cout.rdbuf(saved);
      throw;
    }
    std::cout.rdbuf(saved);
    return snapshot(c.output_dir);
  };
  const auto a = pipeline("run_a_w1", 1);
  const auto b = pipeline("run_b_w1", 1);
  const auto c = pipeline("run_c_w8", 8);
  fs::remove_all(base);
  const bool ok = !a.empty() && a == b && a == c;
  return {ok, fmt("%.0f files compared across two runs and workers {1, 8}",
                  static_cast<double>(a.size()))};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "reduction identities", 1.0, reductions},
      {2, "dropped-variance identity", 30.0, dropped_variance},
      {3, "residual decomposition and bound", 60.0, residual_decomposition_and_bound},
      {4, "DDRM posterior mean and branch coverage", 0.0, ddrm_correctness},
      {5, "variance compensation", 300.0, variance_compensation},
      {6, "desk-scale end-to-end", 600.0, desk_scale},
      {7, "metric correctness", 0.0, metric_correctness},
      {8, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    bool pass = o.passed;
    std::string timing = fmt("%.2fs", secs);
    if (c.limit_seconds > 0.0) {
      timing += fmt(" (limit %.0fs)", c.limit_seconds);
      pass = pass && secs < c.limit_seconds;
    }
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " - "
              << o.detail << " [" << timing << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
