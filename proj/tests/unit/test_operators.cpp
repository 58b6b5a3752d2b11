// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>
#include <string>

#include "cminv/operators.hpp"
#include "cminv/random.hpp"

using namespace cminv;

namespace {

Vector random_vector(Rng& rng, Index n) { return rng.normal_vector(n); }

std::vector<LinearOperatorPtr> operator_zoo() {
  Rng rng(5);
  Matrix a(5, 7);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  Matrix tall(7, 4);
  for (Index i = 0; i < tall.size(); ++i) tall.data()[i] = rng.normal();
  return {make_identity({2, 3, 4}),
          make_dense(a),
          make_dense(tall),
          make_downsample(2, 8, 8, 2),
          make_downsample(1, 8, 12, 4),
          make_gaussian_blur(1, 8, 8, 1.5),
          make_gaussian_blur(3, 6, 10, 3.0),
          make_center_inpaint(2, 9, 7)};
}

double rel(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST_CASE("identity operator returns its input") {
  const auto op = make_identity({1, 4, 4});
  Rng rng(1);
  const Vector x = random_vector(rng, 16);
  CHECK(op->apply(x) == x);
  CHECK(op->adjoint(x) == x);
  CHECK(op->to_spectral(x) == x);
  CHECK(op->spectral_norm() == doctest::Approx(1.0));
  const auto ym = op->measurement_to_spectral(x);
  CHECK(ym.values == x);
  for (bool v : ym.valid) CHECK(v);
}

TEST_CASE("dimension mismatch names expected and actual sizes") {
  const auto op = make_identity({1, 2, 2});
  try {
    op->apply(Vector::Zero(5));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.expected() == 4);
    CHECK(e.actual() == 5);
    const std::string msg = e.what();
    CHECK(msg.find('4') != std::string::npos);
    CHECK(msg.find('5') != std::string::npos);
  }
}

TEST_CASE("block downsample") {
  SUBCASE("constant image maps to the same constant") {
    const auto op = make_downsample(1, 6, 6, 2);
    const Vector y = op->apply(Vector::Constant(36, 0.7));
    CHECK(y.size() == 9);
    CHECK((y.array() - 0.7).abs().maxCoeff() < 1e-15);
  }
  SUBCASE("block=1 is the identity") {
    const auto op = make_downsample(1, 4, 5, 1);
    Rng rng(2);
    const Vector x = random_vector(rng, 20);
    CHECK((op->apply(x) - x).norm() < 1e-15);
  }
  SUBCASE("2x2 blocks on 4x4 average four pixels; singular values 0.5") {
    const auto op = make_downsample(1, 4, 4, 2);
    Vector x(16);
    for (Index i = 0; i < 16; ++i) x[i] = static_cast<double>(i);
    const Vector y = op->apply(x);
    REQUIRE(y.size() == 4);
    CHECK(y[0] == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
    CHECK(y[3] == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
    Eigen::JacobiSVD<Matrix> svd(op->to_dense());
    for (Index i = 0; i < 4; ++i) CHECK(svd.singularValues()[i] == doctest::Approx(0.5));
    for (Index i = 0; i < 4; ++i) CHECK(op->singular_values()[i] == doctest::Approx(0.5));
  }
  SUBCASE("k-pixel blocks have spectral norm 1/sqrt(k)") {
    CHECK(make_downsample(1, 16, 16, 4)->spectral_norm() == doctest::Approx(0.25));
    Eigen::JacobiSVD<Matrix> svd(make_downsample(1, 8, 8, 4)->to_dense());
    CHECK(svd.singularValues()[0] == doctest::Approx(0.25));
  }
  CHECK_THROWS_AS(make_downsample(1, 5, 5, 2), std::invalid_argument);
}

TEST_CASE("circular Gaussian blur") {
  SUBCASE("constant image is unchanged") {
    const auto op = make_gaussian_blur(1, 8, 8, 3.0);
    const Vector y = op->apply(Vector::Constant(64, 0.3));
    CHECK((y.array() - 0.3).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("sigma 3 on 28x28 has top singular value 1") {
    const auto op = make_gaussian_blur(1, 28, 28, 3.0);
    CHECK(op->spectral_norm() == doctest::Approx(1.0).epsilon(1e-12));
    // Rows of the separable blur: dense circulant from the 1-D taps.
    const auto taps = gaussian_kernel_1d(3.0, 9);
    Matrix c = Matrix::Zero(28, 28);
    for (Index i = 0; i < 28; ++i) {
      for (Index k = -9; k <= 9; ++k) c(i, ((i + k) % 28 + 28) % 28) += taps[static_cast<std::size_t>(k + 9)];
    }
    Eigen::JacobiSVD<Matrix> svd(c);
    CHECK(svd.singularValues()[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(op->singular_values()[0] == doctest::Approx(svd.singularValues()[0] * svd.singularValues()[0]).epsilon(1e-12));
  }
  SUBCASE("impulse response is the kernel placed circularly") {
    const Index h = 9;
    const Index w = 9;
    const auto op = make_gaussian_blur(1, h, w, 1.0, 2);
    const auto taps = gaussian_kernel_1d(1.0, 2);
    Vector x = Vector::Zero(h * w);
    x[0] = 1.0;
    const Vector y = op->apply(x);
    for (Index di = -2; di <= 2; ++di) {
      for (Index dj = -2; dj <= 2; ++dj) {
        const Index i = (di + h) % h;
        const Index j = (dj + w) % w;
        CHECK(y[i * w + j] == doctest::Approx(taps[static_cast<std::size_t>(di + 2)] *
                                              taps[static_cast<std::size_t>(dj + 2)]));
      }
    }
    CHECK(y[4 * w + 4] == 0.0);
  }
  SUBCASE("taps are normalized") {
    const auto taps = gaussian_kernel_1d(2.0, 6);
    double sum = 0.0;
    for (double t : taps) sum += t;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(taps.size() == 13);
  }
}

TEST_CASE("inpaint") {
  SUBCASE("keeps exactly the observed pixels") {
    Mask mask(20, false);
    std::vector<Index> kept = {0, 3, 4, 11, 19};
    for (Index k : kept) mask[static_cast<std::size_t>(k)] = true;
    const auto op = make_inpaint(1, 4, 5, mask);
    Rng rng(3);
    const Vector x = random_vector(rng, 20);
    const Vector y = op->apply(x);
    REQUIRE(y.size() == 5);
    for (std::size_t k = 0; k < kept.size(); ++k) CHECK(y[static_cast<Index>(k)] == x[kept[k]]);
    const Vector back = op->adjoint(y);
    for (Index i = 0; i < 20; ++i) CHECK(back[i] == (mask[static_cast<std::size_t>(i)] ? x[i] : 0.0));
  }
  SUBCASE("all-true mask is the identity") {
    const auto op = make_inpaint(1, 3, 3, Mask(9, true));
    Rng rng(4);
    const Vector x = random_vector(rng, 9);
    CHECK(op->apply(x) == x);
  }
  SUBCASE("centered half-side square on 28x28 keeps 588 pixels") {
    const Mask m = centered_square_mask(1, 28, 28);
    Index count = 0;
    for (bool b : m) count += b ? 1 : 0;
    CHECK(count == 784 - 196);
    CHECK(make_center_inpaint(1, 28, 28)->output_dim() == 588);
    CHECK_FALSE(m[14 * 28 + 14]);
    CHECK(m[0]);
  }
}

TEST_CASE("linear operator invariants") {
  Rng rng(11);
  for (const auto& op : operator_zoo()) {
    CAPTURE(op->describe());
    const Index n = op->input_dim();
    const Index m = op->output_dim();
    const Matrix dense = op->to_dense();
    Eigen::JacobiSVD<Matrix> svd(dense);
    CHECK(op->spectral_norm() == doctest::Approx(svd.singularValues()[0]).epsilon(1e-9));
    for (int probe = 0; probe < 100; ++probe) {
      const Vector x = random_vector(rng, n);
      const Vector y = random_vector(rng, m);
      const Vector ax = op->apply(x);
      CHECK(ax.norm() <= op->spectral_norm() * x.norm() * (1 + 1e-12) + 1e-12);
      if (probe < 10) {
        CHECK(rel(op->apply_factored(x), ax) < 1e-5);
        const double lhs = ax.dot(y);
        const double rhs = x.dot(op->adjoint(y));
        CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(lhs)));
        CHECK(rel(op->apply_V(op->apply_V_transpose(x)), x) < 1e-5);
        CHECK(rel(op->apply_U(op->apply_U_transpose(y)), y) < 1e-5);
        CHECK(rel(dense.transpose() * y, op->adjoint(y)) < 1e-9);
      }
    }
  }
}

TEST_CASE("spectral measurements of noiseless data recover spectral coordinates") {
  Rng rng(12);
  Matrix a(4, 6);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  a.row(3) = a.row(0);  // rank 3
  const auto op = make_dense(a);
  const Vector x = random_vector(rng, 6);
  const auto ym = op->measurement_to_spectral(op->apply(x));
  const Vector xbar = op->to_spectral(x);
  Index valid = 0;
  for (Index i = 0; i < 6; ++i) {
    if (ym.valid[static_cast<std::size_t>(i)]) {
      ++valid;
      CHECK(ym.values[i] == doctest::Approx(xbar[i]).epsilon(1e-9));
    }
  }
  CHECK(valid == 3);
  const Vector s = op->spectral_singular_values();
  CHECK(s.size() == 6);
  CHECK(s[4] == 0.0);
  CHECK(s[5] == 0.0);
}

TEST_CASE("scaled identity has spectral norm |c|") {
  const Matrix a = -2.5 * Matrix::Identity(5, 5);
  CHECK(make_dense(a)->spectral_norm() == doctest::Approx(2.5));
}

TEST_CASE("zero singular values are flagged invalid") {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = 1.0;
  a(1, 1) = 0.5;
  const auto ym = make_dense(a)->measurement_to_spectral(Vector::Ones(3));
  CHECK(ym.valid[0]);
  CHECK(ym.valid[1]);
  CHECK_FALSE(ym.valid[2]);
}

TEST_CASE("synthetic nonlinear blur") {
  const auto nl = make_synthetic_nonlinear_blur(1, 8, 8, 1.0, 2.0);
  CHECK_FALSE(nl->is_linear());
  CHECK(nl->apply(Vector::Zero(64)).norm() == 0.0);
  Rng rng(13);
  const Vector x = random_vector(rng, 64);
  CHECK(nl->apply(x) == nl->apply(x));
  const auto tiny = make_synthetic_nonlinear_blur(1, 8, 8, 1.0, 1e-6);
  const Vector lin = make_gaussian_blur(1, 8, 8, 1.0)->apply(x);
  CHECK((tiny->apply(x) - lin).norm() <= 1e-6 * lin.norm());
  CHECK((nl->apply(x) - lin).norm() > 1e-3);
}

TEST_CASE("degrade") {
  const MeasurementModel clean(make_downsample(1, 4, 4, 2), 0.0);
  Rng rng(14);
  const Vector x = random_vector(rng, 16);
  CHECK(degrade(clean, x, 1) == clean.op->apply(x));
  CHECK(degrade(clean, x, 1) == degrade(clean, x, 2));
  const MeasurementModel noisy(make_identity({1, 4, 4}), 0.05);
  CHECK(degrade(noisy, x, 7) == degrade(noisy, x, 7));
  CHECK(degrade(noisy, x, 7) != degrade(noisy, x, 8));
  CHECK(noisy.linear() != nullptr);
  const MeasurementModel nl(make_synthetic_nonlinear_blur(1, 4, 4, 1.0, 1.0), 0.05);
  CHECK(nl.linear() == nullptr);
  CHECK_THROWS_AS(MeasurementModel(clean.op, -1.0), std::invalid_argument);
}
