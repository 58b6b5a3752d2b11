# Copyright (C) 2026 The cminv Authors
# SPDX-License-Identifier: Apache-2.0

import json

import numpy as np
import pytest

import cminv


def gaussian_setup(n=4, sigma_y=0.05):
    rng = np.random.default_rng(0)
    g = rng.normal(size=(n, n))
    cov = g @ g.T / n + 0.1 * np.eye(n)
    prior = cminv.GaussianPrior(np.zeros(n), cov)
    op = cminv.identity((1, 1, n))
    return prior, op, cminv.MeasurementModel(op, sigma_y)


def test_operators_round_trip():
    op = cminv.downsample(1, 4, 4, 2)
    x = np.arange(16, dtype=float).reshape(1, 4, 4)
    y = op.apply(x)
    assert y.shape == (4,)
    assert y[0] == pytest.approx((0 + 1 + 4 + 5) / 4)
    dense = op.to_dense()
    assert np.allclose(dense @ x.ravel(), y)
    assert op.is_linear
    assert not cminv.nonlinear_blur(1, 4, 4, 1.0, 2.0).is_linear


def test_ddim_step_matches_closed_form():
    x_t = np.array([1.0, -2.0])
    x_hat = np.array([0.5, 0.0])
    t, s, t_min = 2.0, 1.0, 0.5
    r = np.sqrt((s * s - t_min * t_min) / (t * t - t_min * t_min))
    got = cminv.ddim_step(x_t, x_hat, t, s, t_min).ravel()
    assert np.allclose(got, x_hat + r * (x_t - x_hat), atol=1e-14)


def test_inverse_addim_with_zero_gamma_is_ddim():
    op = cminv.dense(np.array([[1.0, 2.0, 0.0]]))
    x_t = np.array([0.3, 1.0, -1.0])
    x_hat = np.array([0.1, 0.2, 0.3])
    ddim = cminv.ddim_step(x_t, x_hat, 3.0, 1.0, 0.002)
    step = cminv.inverse_addim_step(x_t, x_hat, np.array([0.7]), op, 3.0, 1.0, 0.002, 0.0)
    assert np.array_equal(step.next, ddim)


def test_batch_sampling_is_deterministic_across_workers():
    prior, op, model = gaussian_setup()
    f = cminv.GaussianMeasurementConsistency(prior, op, 0.05)
    ys = [cminv.degrade(model, prior.sample(i), 100 + i) for i in range(6)]
    cfg = cminv.SamplerConfig(variant=cminv.SamplerVariant.inverse_addim, gamma=1.0, seed=7)
    sched = cminv.karras_schedule(3)
    a = cminv.sample_batch(cfg, f, sched, ys, model, workers=1)
    b = cminv.sample_batch(cfg, f, sched, ys, model, workers=4)
    for ta, tb in zip(a, b):
        assert np.array_equal(ta.final, tb.final)
        assert len(ta.records) == 3


def test_python_consistency_function():
    prior, op, model = gaussian_setup()

    class Shrink(cminv.ConsistencyFn):
        def predict(self, x_t, y, t):
            return x_t / (1.0 + t * t)

    f = Shrink()
    sched = cminv.karras_schedule(3)
    cfg = cminv.SamplerConfig(variant=cminv.SamplerVariant.ddim, seed=1)
    y = cminv.degrade(model, prior.sample(3), 4)
    tr = cminv.sample(cfg, f, sched, y, model)
    assert tr.final.shape == (1, 1, 4)
    assert [r.t for r in tr.records] == list(sched.levels)
    batch = cminv.sample_batch(cfg, f, sched, [y, y], model, workers=2)
    assert np.array_equal(batch[0].final, tr.final)


def test_ddrm_rejects_nonlinear_operator():
    prior, _, _ = gaussian_setup(n=16)
    nl = cminv.nonlinear_blur(1, 4, 4, 1.0, 2.0)
    model = cminv.MeasurementModel(nl, 0.05)
    f = cminv.GaussianConsistency(prior)
    cfg = cminv.SamplerConfig(variant=cminv.SamplerVariant.ddrm, steps=3)
    with pytest.raises(cminv.UnsupportedVariantError):
        cminv.ddrm_sample(cfg, f, cminv.karras_schedule(4), np.zeros(16), model)


def test_metrics():
    ref = np.full((1, 8, 8), 0.4)
    assert cminv.psnr(ref + 0.1, ref) == pytest.approx(20.0, abs=1e-9)
    assert cminv.ssim(ref, ref) == pytest.approx(1.0)
    assert cminv.frechet_distance(np.zeros(2), np.eye(2), np.ones(2), np.eye(2)) == pytest.approx(2.0)
    rng = np.random.default_rng(1)
    feats = rng.normal(size=(200, 8))
    res = cminv.kid(feats, feats, 50, 40, 3)
    assert abs(res.kid_x1000) <= 3 * res.se_x1000


def test_verification_filter():
    reports = cminv.verify(seed=1, filter="dropped_variance_point_mass")
    assert [r.check_name for r in reports] == ["dropped_variance_point_mass"]
    assert all(r.passed for r in reports)


def test_pipeline_commands(tmp_path):
    overrides = ["dataset.count=4", "dataset.height=8", "dataset.width=8", "metrics.fid=false"]
    for cmd in ["synthesize", "degrade", "sample", "evaluate"]:
        assert cminv.run_command(cmd, "", overrides, seed=5, output_dir=tmp_path) == 0
    lines = (tmp_path / "eval" / "metrics.jsonl").read_text().splitlines()
    assert json.loads(lines[-1])["aggregate"] is True
    with pytest.raises(cminv.ConfigError):
        cminv.run_command("synthesize", "", ["task.scale=0"], output_dir=tmp_path)
