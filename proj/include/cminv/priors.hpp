// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "cminv/operators.hpp"
#include "cminv/tensor.hpp"

namespace cminv {

class Rng;

/// N(mean, covariance) over flattened images. Covariance is stored densely;
/// priors built with diagonal() use componentwise fast paths.
class GaussianPrior {
 public:
  GaussianPrior(Vector mean, Matrix covariance);

  static GaussianPrior diagonal(Vector mean, const Vector& variances);
  static GaussianPrior isotropic(Vector mean, double variance);

  Index dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  bool is_diagonal() const noexcept { return diagonal_; }

  /// Symmetric square root of the covariance (negative eigenvalues clamped).
  const Matrix& covariance_sqrt() const noexcept { return *sqrt_; }

  Vector sample(Rng& rng) const;

 private:
  Vector mean_;
  Matrix covariance_;
  bool diagonal_ = false;
  std::shared_ptr<const Matrix> sqrt_;
};

/// Discrete prior: atoms (columns) with non-negative weights summing to one.
class EmpiricalPrior {
 public:
  EmpiricalPrior(std::vector<Vector> atoms, std::vector<double> weights);
  /// Uniform weights.
  explicit EmpiricalPrior(std::vector<Vector> atoms);

  Index dim() const noexcept { return atoms_.rows(); }
  Index size() const noexcept { return atoms_.cols(); }
  const Matrix& atoms() const noexcept { return atoms_; }
  const Vector& weights() const noexcept { return weights_; }

 private:
  Matrix atoms_;
  Vector weights_;
};

/// E[x | x_t] for x ~ prior, x_t = x + t z: mean + Σ (Σ + t² I)⁻¹ (x_t - mean).
ImageTensor gaussian_denoise(const GaussianPrior& prior, const ImageTensor& x_t, double t);

/// E[x | x_t, y] with x_t = x + t z and y = A x + sigma_y w, by sequential
/// Gaussian conditioning (first on x_t, then on y).
ImageTensor gaussian_joint_denoise(const GaussianPrior& prior, const ImageTensor& x_t, double t,
                                   const LinearOperator& op, const Vector& y, double sigma_y);

struct GaussianPosterior {
  Vector mean;
  Matrix covariance;
};

/// Exact p(x | y) for y = A x + sigma_y w.
GaussianPosterior gaussian_posterior(const GaussianPrior& prior, const LinearOperator& op,
                                     const Vector& y, double sigma_y);

/// Var[x | x_t] = Σ - Σ (Σ + t² I)⁻¹ Σ, which equals (Σ⁻¹ + t⁻² I)⁻¹ when Σ is invertible.
Matrix gaussian_conditional_covariance(const GaussianPrior& prior, double t);

/// Posterior-weighted mean of the atoms given x_t, softmax-stabilized.
ImageTensor empirical_denoise(const EmpiricalPrior& prior, const ImageTensor& x_t, double t);

/// The denoiser abstraction x̂ = f(x_t, y, t).
///
/// An empty `y` means no measurement is available. Implementations must be
/// safe to call concurrently.
class ConsistencyFn {
 public:
  virtual ~ConsistencyFn() = default;
  virtual ImageTensor predict(const ImageTensor& x_t, const Vector& y, double t) const = 0;
  virtual bool uses_measurement() const { return false; }
};

using ConsistencyFnPtr = std::shared_ptr<const ConsistencyFn>;

/// x̂ = offset + gain_xt x_t + gain_y y; the closed form of every Gaussian denoiser.
struct AffineDenoiser {
  Vector offset;
  Matrix gain_xt;
  Matrix gain_y;  // empty when the denoiser ignores y
};

/// Unconditional Gaussian conditional-mean denoiser with per-level caching.
class GaussianConsistency final : public ConsistencyFn {
 public:
  explicit GaussianConsistency(GaussianPrior prior);
  ImageTensor predict(const ImageTensor& x_t, const Vector& y, double t) const override;
  const GaussianPrior& prior() const noexcept { return prior_; }

 private:
  GaussianPrior prior_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const AffineDenoiser>> cache_;
};

/// Measurement-conditioned Gaussian denoiser E[x | x_t, y].
class GaussianMeasurementConsistency final : public ConsistencyFn {
 public:
  GaussianMeasurementConsistency(GaussianPrior prior, LinearOperatorPtr op, double sigma_y);
  ImageTensor predict(const ImageTensor& x_t, const Vector& y, double t) const override;
  bool uses_measurement() const override { return true; }

  /// Cached affine form at level t.
  std::shared_ptr<const AffineDenoiser> affine(double t) const;

 private:
  GaussianPrior prior_;
  LinearOperatorPtr op_;
  Matrix dense_op_;
  double sigma_y_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const AffineDenoiser>> cache_;
};

class EmpiricalConsistency final : public ConsistencyFn {
 public:
  explicit EmpiricalConsistency(EmpiricalPrior prior) : prior_(std::move(prior)) {}
  ImageTensor predict(const ImageTensor& x_t, const Vector& y, double t) const override;

 private:
  EmpiricalPrior prior_;
};

/// E[x | x_t, y] for an empirical prior; works with nonlinear operators.
/// Requires sigma_y > 0.
class EmpiricalMeasurementConsistency final : public ConsistencyFn {
 public:
  EmpiricalMeasurementConsistency(EmpiricalPrior prior, ForwardOperatorPtr op, double sigma_y);
  ImageTensor predict(const ImageTensor& x_t, const Vector& y, double t) const override;
  bool uses_measurement() const override { return true; }

 private:
  EmpiricalPrior prior_;
  ForwardOperatorPtr op_;
  Matrix measured_atoms_;  // A(a_j) per column
  double sigma_y_;
};

}  // namespace cminv
