// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cminv/harness.hpp"
#include "cminv/tensor_io.hpp"

using namespace cminv;

namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.dataset.shape = {1, 8, 8};
  c.dataset.count = 6;
  c.output_dir = out;
  apply_seed(c, 13);
  return c;
}

}  // namespace

TEST_CASE("synthetic datasets") {
  DatasetSpec spec;
  spec.shape = {1, 4, 4};
  spec.count = 10000;
  spec.seed = 3;
  const Dataset ds = synthesize_dataset(spec);
  REQUIRE(ds.prior.has_value());
  const Matrix& sigma = ds.prior->covariance();
  Vector mean = Vector::Zero(16);
  for (const auto& x : ds.images) mean += x.data();
  mean /= static_cast<double>(ds.images.size());
  Matrix cov = Matrix::Zero(16, 16);
  for (const auto& x : ds.images) cov += (x.data() - mean) * (x.data() - mean).transpose();
  cov /= static_cast<double>(ds.images.size() - 1);
  CHECK((cov - sigma).norm() / sigma.norm() < 0.05);

  DatasetSpec small = spec;
  small.count = 4;
  const Dataset a = synthesize_dataset(small);
  const Dataset b = synthesize_dataset(small);
  for (std::size_t i = 0; i < 4; ++i) CHECK(a.images[i].data() == b.images[i].data());
  small.split = 1;
  CHECK(synthesize_dataset(small).images[0].data() != a.images[0].data());

  for (auto g : {Generator::piecewise_constant, Generator::atoms}) {
    DatasetSpec s = small;
    s.generator = g;
    const Dataset d = synthesize_dataset(s);
    CHECK(d.images.size() == 4);
    CHECK_FALSE(d.prior.has_value());
    for (const auto& x : d.images) {
      CHECK(x.data().minCoeff() >= 0.0);
      CHECK(x.data().maxCoeff() <= 1.0);
    }
  }
  DatasetSpec empty = small;
  empty.count = 0;
  CHECK(synthesize_dataset(empty).images.empty());
}

TEST_CASE("task operators") {
  TaskSpec t;
  t.kind = TaskKind::inpaint;
  CHECK(make_task_operator(t, {1, 28, 28})->output_dim() == 588);
  t.kind = TaskKind::super_resolution;
  t.scale = 3;
  CHECK_THROWS_AS(make_task_operator(t, {1, 16, 16}), ConfigError);
  t.kind = TaskKind::nonlinear_deblur;
  CHECK_FALSE(make_task_operator(t, {1, 16, 16})->is_linear());
  const Json j = describe_task(t, {1, 16, 16});
  CHECK(j.begin().key() == "task");
  CHECK(j["task"] == "nonlinear_deblur");
}

TEST_CASE("sampling through the harness") {
  const ExperimentConfig base = small_config("unused");
  const Dataset ds = synthesize_dataset(base.dataset);
  const MeasurementModel model(make_task_operator(base.task, base.dataset.shape), base.task.sigma_y);
  const auto ys = degrade_all(ds.images, model, base.task.seed);

  SUBCASE("gamma = 0 equals ddim on the same seeds") {
    ExperimentConfig g0 = base;
    g0.sampler.gamma = 0.0;
    ExperimentConfig dd = base;
    dd.sampler.variant = SamplerVariant::ddim;
    const auto a = run_sampling(g0, ds, model, ys);
    const auto b = run_sampling(dd, ds, model, ys);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK((a[i].final.data() - b[i].final.data()).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SUBCASE("worker count does not change results") {
    for (auto v : {SamplerVariant::inverse_addim, SamplerVariant::cm_baseline, SamplerVariant::ddrm}) {
      ExperimentConfig one = base;
      one.sampler.variant = v;
      ExperimentConfig eight = one;
      eight.workers = 8;
      const auto a = run_sampling(one, ds, model, ys);
      const auto b = run_sampling(eight, ds, model, ys);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].final.data() == b[i].final.data());
    }
  }
  SUBCASE("ddrm with a nonlinear operator is unsupported") {
    ExperimentConfig c = base;
    c.sampler.variant = SamplerVariant::ddrm;
    c.task.kind = TaskKind::nonlinear_deblur;
    const MeasurementModel nl(make_task_operator(c.task, c.dataset.shape), 0.05);
    CHECK_THROWS_AS(run_sampling(c, ds, nl, degrade_all(ds.images, nl, 1)), UnsupportedVariantError);
  }
  SUBCASE("empirical model handles the nonlinear operator") {
    ExperimentConfig c = base;
    c.task.kind = TaskKind::nonlinear_deblur;
    c.model.kind = ModelKind::empirical;
    const MeasurementModel nl(make_task_operator(c.task, c.dataset.shape), 0.05);
    const auto out = run_sampling(c, ds, nl, degrade_all(ds.images, nl, 1));
    CHECK(out.size() == ds.images.size());
    CHECK(out[0].records[0].residual_norm_sq.has_value());
  }
  SUBCASE("precomputed predictions are looked up by level") {
    const auto schedule = make_schedule(base.schedule, 2);
    std::vector<ImageTensor> preds;
    for (std::size_t k = 0; k < schedule.size(); ++k) preds.push_back(ImageTensor::filled({1, 8, 8}, 0.1 * k));
    const PrecomputedConsistency f(schedule.levels(), preds);
    CHECK(f.predict(ImageTensor::zeros({1, 8, 8}), Vector(), schedule.levels()[1]).data() == preds[1].data());
    CHECK_THROWS(f.predict(ImageTensor::zeros({1, 8, 8}), Vector(), 0.5));
  }
}

TEST_CASE("evaluation") {
  const ExperimentConfig c = small_config("unused");
  const Dataset ds = synthesize_dataset(c.dataset);
  const auto same = evaluate_reconstructions(ds.images, ds.images, c.metrics, 1);
  CHECK(std::isinf(same.aggregate.psnr));
  CHECK(same.aggregate.ssim == 1.0);
  CHECK(same.aggregate.fid.value() < 1e-8);

  std::vector<ImageTensor> noisy;
  for (const auto& x : ds.images) noisy.push_back(x.with_data(x.data().array() + 0.05 * x.data().array().sin()));
  const auto ev = evaluate_reconstructions(noisy, ds.images, c.metrics, 1);
  double p = 0.0;
  double s = 0.0;
  for (const auto& row : ev.rows) {
    p += row.psnr;
    s += row.ssim;
  }
  CHECK(std::abs(ev.aggregate.psnr - p / 6.0) < 1e-10);
  CHECK(std::abs(ev.aggregate.ssim - s / 6.0) < 1e-10);
  CHECK(ev.aggregate.kid_x1000.has_value());

  const std::string table = format_metric_table({{"method", ev.aggregate}});
  const auto header = table.substr(0, table.find('\n'));
  CHECK(header.find("PSNR") < header.find("SSIM"));
  CHECK(header.find("SSIM") < header.find("KID"));
  CHECK(header.find("KID") < header.find("FID"));

  std::vector<ImageTensor> fewer(noisy.begin(), noisy.end() - 1);
  CHECK_THROWS(evaluate_reconstructions(fewer, ds.images, c.metrics, 1));
}

TEST_CASE("gamma tuning") {
  ExperimentConfig c = small_config("unused");
  c.tune.gammas = {0.0, 1.0};
  c.tune.count = 6;
  const TuneResult r = tune_gamma(c);
  CHECK(r.gammas == c.tune.gammas);
  CHECK(r.scores.size() == 2);
  CHECK((r.best_gamma == 0.0 || r.best_gamma == 1.0));
  const TuneResult again = tune_gamma(c);
  CHECK(again.scores == r.scores);
}

TEST_CASE("verification suite filter") {
  const auto reports = run_verification_suite(0, "dropped_variance_point", 1);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].check_name == "dropped_variance_point_mass");
  CHECK(reports[0].passed);
  const Json j = to_json(reports[0]);
  CHECK(j.begin().key() == "check");
}

TEST_CASE("cli commands write a deterministic layout") {
  const fs::path out = fs::temp_directory_path() / "cminv_harness_cli";
  fs::remove_all(out);
  ExperimentConfig c = small_config(out);
  CHECK(cmd_synthesize(c) == 0);
  CHECK(cmd_degrade(c) == 0);
  CHECK(cmd_sample(c) == 0);
  CHECK(cmd_evaluate(c) == 0);
  const std::string first = read_text_file(out / "eval" / "metrics.jsonl");
  const std::string xhat = read_text_file(out / "samples" / "xhat_00003.cmt");
  c.workers = 8;
  CHECK(cmd_sample(c) == 0);
  CHECK(cmd_evaluate(c) == 0);
  CHECK(read_text_file(out / "eval" / "metrics.jsonl") == first);
  CHECK(read_text_file(out / "samples" / "xhat_00003.cmt") == xhat);

  ExperimentConfig other = c;
  other.task.kind = TaskKind::deblur;
  CHECK_THROWS_AS(cmd_sample(other), ConfigError);

  ExperimentConfig identity = c;
  identity.task.kind = TaskKind::denoise;
  identity.task.sigma_y = 0.0;
  CHECK(cmd_degrade(identity) == 0);
  CHECK(read_text_file(out / "measurements" / "y_00002.cmt") ==
        read_text_file(out / "dataset" / "x_00002.cmt"));

  ExperimentConfig none = c;
  none.dataset.count = 0;
  none.output_dir = out / "empty";
  CHECK(cmd_synthesize(none) == 0);
  CHECK(read_text_file(none.output_dir / "dataset" / "manifest.jsonl").empty());
  fs::remove_all(out);
}
