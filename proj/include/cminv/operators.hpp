// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cminv/tensor.hpp"

namespace cminv {

/// Any measurement map x -> A(x). Linear operators additionally expose an SVD.
class ForwardOperator {
 public:
  virtual ~ForwardOperator() = default;

  virtual Index input_dim() const = 0;
  virtual Index output_dim() const = 0;

  /// Natural dimensions of a measurement, used when writing tensor files.
  virtual std::vector<Index> output_dims() const { return {output_dim()}; }

  /// Image shape of the signal; (1, 1, n) for operators without spatial structure.
  virtual Shape input_shape() const { return {1, 1, input_dim()}; }

  virtual std::string describe() const = 0;
  virtual bool is_linear() const { return false; }

  /// A(x). Throws DimensionError when x does not have input_dim() entries.
  Vector apply(const Vector& x) const;
  Vector apply(const ImageTensor& x) const { return apply(x.data()); }

 protected:
  virtual Vector do_apply(const Vector& x) const = 0;
};

enum class OperatorKind { identity, downsample, blur_circular, inpaint, dense };

const char* to_string(OperatorKind kind);

/// ȳ = Σ⁺ Uᵀ y, flagged invalid wherever the singular value vanishes.
///
/// Both vectors have length input_dim(), aligned with to_spectral(); indices
/// beyond min(m, n) carry no measurement and are always invalid.
struct SpectralMeasurement {
  Vector values;
  std::vector<bool> valid;
};

/// A = U Σ Vᵀ with U (m x m), V (n x n) orthonormal and Σ (m x n) diagonal.
///
/// Spectral coordinates are ordered so that singular_values() is
/// non-increasing. Singular values at or below zero_threshold() are treated as
/// exact zeros by measurement_to_spectral() and by samplers that branch on them.
class LinearOperator : public ForwardOperator {
 public:
  bool is_linear() const final { return true; }
  virtual OperatorKind kind() const = 0;

  /// Length min(m, n), non-increasing, non-negative.
  const Vector& singular_values() const noexcept { return singular_values_; }

  /// Singular values padded with zeros to length n, aligned with to_spectral().
  Vector spectral_singular_values() const;

  double spectral_norm() const;
  double zero_threshold() const;

  Vector adjoint(const Vector& y) const;

  Vector apply_V_transpose(const Vector& x) const;
  Vector apply_V(const Vector& x_bar) const;
  Vector apply_U_transpose(const Vector& y) const;
  Vector apply_U(const Vector& y_bar) const;

  Vector to_spectral(const Vector& x) const { return apply_V_transpose(x); }
  Vector to_spectral(const ImageTensor& x) const { return apply_V_transpose(x.data()); }
  SpectralMeasurement measurement_to_spectral(const Vector& y) const;

  /// U Σ Vᵀ x, evaluated through the factors rather than the direct kernel.
  Vector apply_factored(const Vector& x) const;

  /// Dense m x n matrix, built column by column from apply(). Small sizes only.
  Matrix to_dense() const;

 protected:
  void set_singular_values(Vector s) { singular_values_ = std::move(s); }

  virtual Vector do_adjoint(const Vector& y) const;
  virtual Vector do_V_transpose(const Vector& x) const = 0;
  virtual Vector do_V(const Vector& x_bar) const = 0;
  virtual Vector do_U_transpose(const Vector& y) const = 0;
  virtual Vector do_U(const Vector& y_bar) const = 0;

 private:
  Vector singular_values_;
};

using LinearOperatorPtr = std::shared_ptr<const LinearOperator>;
using ForwardOperatorPtr = std::shared_ptr<const ForwardOperator>;

/// Masks are row-major (channels, height, width) boolean grids; true = observed.
using Mask = std::vector<bool>;

LinearOperatorPtr make_identity(Shape shape);

/// Dense operator from an explicit m x n matrix; SVD computed with Eigen.
LinearOperatorPtr make_dense(Matrix matrix);

/// Block-average pooling by `block` in both spatial dimensions, per channel.
LinearOperatorPtr make_downsample(Index channels, Index height, Index width, Index block);

/// Circular separable Gaussian blur; kernel_radius <= 0 selects ceil(3 sigma).
LinearOperatorPtr make_gaussian_blur(Index channels, Index height, Index width, double sigma,
                                     Index kernel_radius = 0);

LinearOperatorPtr make_inpaint(Index channels, Index height, Index width, const Mask& mask);

/// Mask observing everything except a centered square with half the image side.
Mask centered_square_mask(Index channels, Index height, Index width);
LinearOperatorPtr make_center_inpaint(Index channels, Index height, Index width);

/// Normalized 1-D Gaussian taps for offsets -radius..radius.
std::vector<double> gaussian_kernel_1d(double sigma, Index radius);

/// Non-SVD operator wrapping a deterministic map.
class NonlinearOperator : public ForwardOperator {
 public:
  virtual std::string description() const = 0;
  std::string describe() const override { return description(); }
};

/// x -> tanh(saturation * blur(x)) / saturation, using circular Gaussian blur.
///
/// Approaches the linear blur as saturation -> 0.
std::shared_ptr<const NonlinearOperator> make_synthetic_nonlinear_blur(
    Index channels, Index height, Index width, double sigma, double saturation,
    Index kernel_radius = 0);

struct MeasurementModel {
  ForwardOperatorPtr op;
  double sigma_y = 0.0;

  MeasurementModel(ForwardOperatorPtr op, double sigma_y);

  /// Null when the operator is nonlinear.
  LinearOperatorPtr linear() const;
};

/// A(x) + sigma_y z with z drawn from Rng(seed).
Vector degrade(const MeasurementModel& model, const Vector& x, std::uint64_t seed);
Vector degrade(const MeasurementModel& model, const ImageTensor& x, std::uint64_t seed);

}  // namespace cminv
