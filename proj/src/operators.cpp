// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cminv/random.hpp"

namespace cminv {

const char* to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::identity: return "identity";
    case OperatorKind::downsample: return "downsample";
    case OperatorKind::blur_circular: return "blur_circular";
    case OperatorKind::inpaint: return "inpaint";
    case OperatorKind::dense: return "dense";
  }
  return "unknown";
}

Vector ForwardOperator::apply(const Vector& x) const {
  check_dim("operator input", input_dim(), x.size());
  return do_apply(x);
}

// ---------------------------------------------------------------------------
// LinearOperator

Vector LinearOperator::spectral_singular_values() const {
  Vector s = Vector::Zero(input_dim());
  const Index k = std::min(input_dim(), singular_values_.size());
  s.head(k) = singular_values_.head(k);
  return s;
}

double LinearOperator::spectral_norm() const {
  return singular_values_.size() == 0 ? 0.0 : singular_values_[0];
}

double LinearOperator::zero_threshold() const { return 1e-12 * spectral_norm(); }

Vector LinearOperator::adjoint(const Vector& y) const {
  check_dim("adjoint input", output_dim(), y.size());
  return do_adjoint(y);
}

Vector LinearOperator::apply_V_transpose(const Vector& x) const {
  check_dim("V^T input", input_dim(), x.size());
  return do_V_transpose(x);
}

Vector LinearOperator::apply_V(const Vector& x_bar) const {
  check_dim("V input", input_dim(), x_bar.size());
  return do_V(x_bar);
}

Vector LinearOperator::apply_U_transpose(const Vector& y) const {
  check_dim("U^T input", output_dim(), y.size());
  return do_U_transpose(y);
}

Vector LinearOperator::apply_U(const Vector& y_bar) const {
  check_dim("U input", output_dim(), y_bar.size());
  return do_U(y_bar);
}

Vector LinearOperator::apply_factored(const Vector& x) const {
  const Vector x_bar = apply_V_transpose(x);
  const Index k = singular_values_.size();
  Vector scaled = Vector::Zero(output_dim());
  scaled.head(k) = singular_values_.cwiseProduct(x_bar.head(k));
  return apply_U(scaled);
}

Vector LinearOperator::do_adjoint(const Vector& y) const {
  const Vector y_bar = do_U_transpose(y);
  const Index k = singular_values_.size();
  Vector scaled = Vector::Zero(input_dim());
  scaled.head(k) = singular_values_.cwiseProduct(y_bar.head(k));
  return do_V(scaled);
}

SpectralMeasurement LinearOperator::measurement_to_spectral(const Vector& y) const {
  const Vector u = apply_U_transpose(y);
  const double threshold = zero_threshold();
  SpectralMeasurement out{Vector::Zero(input_dim()), std::vector<bool>(input_dim(), false)};
  for (Index i = 0; i < singular_values_.size(); ++i) {
    if (singular_values_[i] > threshold) {
      out.values[i] = u[i] / singular_values_[i];
      out.valid[i] = true;
    }
  }
  return out;
}

Matrix LinearOperator::to_dense() const {
  Matrix dense(output_dim(), input_dim());
  Vector unit = Vector::Zero(input_dim());
  for (Index j = 0; j < input_dim(); ++j) {
    unit[j] = 1.0;
    dense.col(j) = do_apply(unit);
    unit[j] = 0.0;
  }
  return dense;
}

namespace {

// ---------------------------------------------------------------------------
// Identity

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Shape shape) : shape_(shape) {
    set_singular_values(Vector::Ones(shape.size()));
  }

  Index input_dim() const override { return shape_.size(); }
  Index output_dim() const override { return shape_.size(); }
  std::vector<Index> output_dims() const override {
    return {shape_.channels, shape_.height, shape_.width};
  }
  Shape input_shape() const override { return shape_; }
  OperatorKind kind() const override { return OperatorKind::identity; }
  std::string describe() const override { return "identity " + shape_.to_string(); }

 protected:
  Vector do_apply(const Vector& x) const override { return x; }
  Vector do_adjoint(const Vector& y) const override { return y; }
  Vector do_V_transpose(const Vector& x) const override { return x; }
  Vector do_V(const Vector& x) const override { return x; }
  Vector do_U_transpose(const Vector& y) const override { return y; }
  Vector do_U(const Vector& y) const override { return y; }

 private:
  Shape shape_;
};

// ---------------------------------------------------------------------------
// Dense

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() == 0 || matrix_.cols() == 0) {
      throw std::invalid_argument("make_dense: matrix must be non-empty");
    }
    if (!matrix_.allFinite()) throw std::invalid_argument("make_dense: matrix must be finite");
    Eigen::JacobiSVD<Matrix> svd(matrix_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    u_ = svd.matrixU();
    v_ = svd.matrixV();
    set_singular_values(svd.singularValues());
  }

  Index input_dim() const override { return matrix_.cols(); }
  Index output_dim() const override { return matrix_.rows(); }
  OperatorKind kind() const override { return OperatorKind::dense; }
  std::string describe() const override {
    std::ostringstream os;
    os << "dense " << matrix_.rows() << "x" << matrix_.cols();
    return os.str();
  }

 protected:
  Vector do_apply(const Vector& x) const override { return matrix_ * x; }
  Vector do_adjoint(const Vector& y) const override { return matrix_.transpose() * y; }
  Vector do_V_transpose(const Vector& x) const override { return v_.transpose() * x; }
  Vector do_V(const Vector& x) const override { return v_ * x; }
  Vector do_U_transpose(const Vector& y) const override { return u_.transpose() * y; }
  Vector do_U(const Vector& y) const override { return u_ * y; }

 private:
  Matrix matrix_;
  Matrix u_;
  Matrix v_;
};

// ---------------------------------------------------------------------------
// Block-average downsampling
//
// Each output pixel is the mean of a block x block patch. The right factor
// starts with the normalized block indicators (singular value 1/block), then
// lists a Helmert basis of the zero-mean subspace of every block.

class DownsampleOperator final : public LinearOperator {
 public:
  DownsampleOperator(Index channels, Index height, Index width, Index block)
      : channels_(channels), height_(height), width_(width), block_(block) {
    out_h_ = height / block;
    out_w_ = width / block;
    set_singular_values(Vector::Constant(output_dim(), 1.0 / static_cast<double>(block)));
  }

  Index input_dim() const override { return channels_ * height_ * width_; }
  Index output_dim() const override { return channels_ * out_h_ * out_w_; }
  std::vector<Index> output_dims() const override { return {channels_, out_h_, out_w_}; }
  Shape input_shape() const override { return {channels_, height_, width_}; }
  OperatorKind kind() const override { return OperatorKind::downsample; }
  std::string describe() const override {
    std::ostringstream os;
    os << "downsample block=" << block_ << " " << Shape{channels_, height_, width_}.to_string();
    return os.str();
  }

 protected:
  Vector do_apply(const Vector& x) const override {
    Vector y(output_dim());
    const double inv = 1.0 / static_cast<double>(block_ * block_);
    for_each_block([&](Index o, const std::vector<Index>& pixels) {
      double sum = 0.0;
      for (Index p : pixels) sum += x[p];
      y[o] = sum * inv;
    });
    return y;
  }

  Vector do_V_transpose(const Vector& x) const override {
    Vector out(input_dim());
    const Index m = output_dim();
    const Index k = block_ * block_;
    const double b = static_cast<double>(block_);
    for_each_block([&](Index o, const std::vector<Index>& pixels) {
      double sum = 0.0;
      for (Index p : pixels) sum += x[p];
      out[o] = sum / b;
      // Helmert rows: h_l = (1,...,1, -l, 0,...) / sqrt(l (l + 1)).
      double prefix = 0.0;
      for (Index l = 1; l < k; ++l) {
        prefix += x[pixels[l - 1]];
        const double dl = static_cast<double>(l);
        out[m + o * (k - 1) + (l - 1)] = (prefix - dl * x[pixels[l]]) / std::sqrt(dl * (dl + 1.0));
      }
    });
    return out;
  }

  Vector do_V(const Vector& x_bar) const override {
    Vector out(input_dim());
    const Index m = output_dim();
    const Index k = block_ * block_;
    const double b = static_cast<double>(block_);
    for_each_block([&](Index o, const std::vector<Index>& pixels) {
      for (Index p : pixels) out[p] = x_bar[o] / b;
      for (Index l = 1; l < k; ++l) {
        const double dl = static_cast<double>(l);
        const double c = x_bar[m + o * (k - 1) + (l - 1)] / std::sqrt(dl * (dl + 1.0));
        for (Index q = 0; q < l; ++q) out[pixels[q]] += c;
        out[pixels[l]] -= dl * c;
      }
    });
    return out;
  }

  Vector do_U_transpose(const Vector& y) const override { return y; }
  Vector do_U(const Vector& y) const override { return y; }

 private:
  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    std::vector<Index> pixels(static_cast<std::size_t>(block_ * block_));
    Index o = 0;
    for (Index c = 0; c < channels_; ++c) {
      for (Index bi = 0; bi < out_h_; ++bi) {
        for (Index bj = 0; bj < out_w_; ++bj, ++o) {
          std::size_t idx = 0;
          for (Index di = 0; di < block_; ++di) {
            for (Index dj = 0; dj < block_; ++dj) {
              pixels[idx++] = (c * height_ + bi * block_ + di) * width_ + bj * block_ + dj;
            }
          }
          fn(o, pixels);
        }
      }
    }
  }

  Index channels_, height_, width_, block_;
  Index out_h_ = 0, out_w_ = 0;
};

// ---------------------------------------------------------------------------
// Circular Gaussian blur, diagonalized by a real orthonormal Fourier basis.

struct RealFourierBasis {
  Matrix basis;         // columns are orthonormal basis vectors
  Vector eigenvalues;   // eigenvalue of the circulant for each column
};

RealFourierBasis real_fourier_basis(Index n, const Vector& circulant_column) {
  RealFourierBasis out{Matrix(n, n), Vector(n)};
  const double dn = static_cast<double>(n);
  auto eigenvalue = [&](Index freq) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) {
      acc += circulant_column[j] * std::cos(2.0 * std::numbers::pi * static_cast<double>(freq * j) / dn);
    }
    return acc;
  };
  Index col = 0;
  out.basis.col(col).setConstant(1.0 / std::sqrt(dn));
  out.eigenvalues[col++] = eigenvalue(0);
  for (Index k = 1; 2 * k < n; ++k) {
    const double lambda = eigenvalue(k);
    for (Index j = 0; j < n; ++j) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k * j) / dn;
      out.basis(j, col) = std::sqrt(2.0 / dn) * std::cos(angle);
      out.basis(j, col + 1) = std::sqrt(2.0 / dn) * std::sin(angle);
    }
    out.eigenvalues[col] = lambda;
    out.eigenvalues[col + 1] = lambda;
    col += 2;
  }
  if (n % 2 == 0) {
    for (Index j = 0; j < n; ++j) out.basis(j, col) = (j % 2 == 0 ? 1.0 : -1.0) / std::sqrt(dn);
    out.eigenvalues[col] = eigenvalue(n / 2);
  }
  return out;
}

Vector wrapped_kernel(const std::vector<double>& taps, Index radius, Index n) {
  Vector column = Vector::Zero(n);
  for (Index d = -radius; d <= radius; ++d) {
    const Index idx = ((d % n) + n) % n;
    column[idx] += taps[static_cast<std::size_t>(d + radius)];
  }
  return column;
}

class CircularBlurOperator final : public LinearOperator {
 public:
  CircularBlurOperator(Index channels, Index height, Index width, double sigma, Index radius)
      : channels_(channels), height_(height), width_(width), sigma_(sigma), radius_(radius) {
    taps_ = gaussian_kernel_1d(sigma, radius);
    column_h_ = wrapped_kernel(taps_, radius, height);
    column_w_ = wrapped_kernel(taps_, radius, width);
    rows_ = real_fourier_basis(height, column_h_);
    cols_ = real_fourier_basis(width, column_w_);

    const Index plane = height * width;
    const Index n = channels * plane;
    Vector natural_s(n);
    sign_ = Vector(n);
    for (Index c = 0; c < channels; ++c) {
      for (Index p = 0; p < height; ++p) {
        for (Index q = 0; q < width; ++q) {
          const double lambda = rows_.eigenvalues[p] * cols_.eigenvalues[q];
          natural_s[c * plane + p * width + q] = std::abs(lambda);
        }
      }
    }
    perm_.resize(static_cast<std::size_t>(n));
    std::iota(perm_.begin(), perm_.end(), Index{0});
    std::stable_sort(perm_.begin(), perm_.end(),
                     [&](Index a, Index b) { return natural_s[a] > natural_s[b]; });
    Vector s(n);
    for (Index k = 0; k < n; ++k) {
      const Index nat = perm_[static_cast<std::size_t>(k)];
      s[k] = natural_s[nat];
      const Index pq = nat % plane;
      const double lambda = rows_.eigenvalues[pq / width] * cols_.eigenvalues[pq % width];
      sign_[k] = lambda < 0.0 ? -1.0 : 1.0;
    }
    set_singular_values(std::move(s));
  }

  Index input_dim() const override { return channels_ * height_ * width_; }
  Index output_dim() const override { return input_dim(); }
  std::vector<Index> output_dims() const override { return {channels_, height_, width_}; }
  Shape input_shape() const override { return {channels_, height_, width_}; }
  OperatorKind kind() const override { return OperatorKind::blur_circular; }
  std::string describe() const override {
    std::ostringstream os;
    os << "blur_circular sigma=" << sigma_ << " radius=" << radius_ << " "
       << Shape{channels_, height_, width_}.to_string();
    return os.str();
  }

 protected:
  Vector do_apply(const Vector& x) const override {
    // Separable circular convolution: rows first, then columns.
    const Index plane = height_ * width_;
    Vector tmp(x.size());
    Vector out(x.size());
    for (Index c = 0; c < channels_; ++c) {
      const Index base = c * plane;
      for (Index i = 0; i < height_; ++i) {
        for (Index j = 0; j < width_; ++j) {
          double acc = 0.0;
          for (Index d = -radius_; d <= radius_; ++d) {
            const Index jj = (((j - d) % width_) + width_) % width_;
            acc += taps_[static_cast<std::size_t>(d + radius_)] * x[base + i * width_ + jj];
          }
          tmp[base + i * width_ + j] = acc;
        }
      }
      for (Index i = 0; i < height_; ++i) {
        for (Index j = 0; j < width_; ++j) {
          double acc = 0.0;
          for (Index d = -radius_; d <= radius_; ++d) {
            const Index ii = (((i - d) % height_) + height_) % height_;
            acc += taps_[static_cast<std::size_t>(d + radius_)] * tmp[base + ii * width_ + j];
          }
          out[base + i * width_ + j] = acc;
        }
      }
    }
    return out;
  }

  Vector do_adjoint(const Vector& y) const override {
    // The kernel is symmetric, so the operator is self-adjoint.
    return do_apply(y);
  }

  Vector do_V_transpose(const Vector& x) const override {
    const Vector natural = to_natural(x);
    Vector out(natural.size());
    for (std::size_t k = 0; k < perm_.size(); ++k) out[static_cast<Index>(k)] = natural[perm_[k]];
    return out;
  }

  Vector do_V(const Vector& x_bar) const override {
    Vector natural(x_bar.size());
    for (std::size_t k = 0; k < perm_.size(); ++k) natural[perm_[k]] = x_bar[static_cast<Index>(k)];
    return from_natural(natural);
  }

  Vector do_U_transpose(const Vector& y) const override {
    return do_V_transpose(y).cwiseProduct(sign_);
  }

  Vector do_U(const Vector& y_bar) const override { return do_V(y_bar.cwiseProduct(sign_)); }

 private:
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Vector to_natural(const Vector& x) const {
    const Index plane = height_ * width_;
    Vector out(x.size());
    for (Index c = 0; c < channels_; ++c) {
      Eigen::Map<const RowMajor> image(x.data() + c * plane, height_, width_);
      Eigen::Map<RowMajor> coeffs(out.data() + c * plane, height_, width_);
      coeffs = rows_.basis.transpose() * image * cols_.basis;
    }
    return out;
  }

  Vector from_natural(const Vector& natural) const {
    const Index plane = height_ * width_;
    Vector out(natural.size());
    for (Index c = 0; c < channels_; ++c) {
      Eigen::Map<const RowMajor> coeffs(natural.data() + c * plane, height_, width_);
      Eigen::Map<RowMajor> image(out.data() + c * plane, height_, width_);
      image = rows_.basis * coeffs * cols_.basis.transpose();
    }
    return out;
  }

  Index channels_, height_, width_;
  double sigma_;
  Index radius_;
  std::vector<double> taps_;
  Vector column_h_, column_w_;
  RealFourierBasis rows_, cols_;
  std::vector<Index> perm_;  // spectral index -> natural index
  Vector sign_;              // sign of the eigenvalue, per spectral index
};

// ---------------------------------------------------------------------------
// Inpainting (row selection)

class InpaintOperator final : public LinearOperator {
 public:
  InpaintOperator(Shape shape, const Mask& mask) : shape_(shape) {
    for (Index i = 0; i < shape.size(); ++i) {
      (mask[static_cast<std::size_t>(i)] ? kept_ : dropped_).push_back(i);
    }
    set_singular_values(Vector::Ones(static_cast<Index>(kept_.size())));
  }

  Index input_dim() const override { return shape_.size(); }
  Index output_dim() const override { return static_cast<Index>(kept_.size()); }
  Shape input_shape() const override { return shape_; }
  OperatorKind kind() const override { return OperatorKind::inpaint; }
  std::string describe() const override {
    std::ostringstream os;
    os << "inpaint kept=" << kept_.size() << " " << shape_.to_string();
    return os.str();
  }

 protected:
  Vector do_apply(const Vector& x) const override {
    Vector y(output_dim());
    for (std::size_t k = 0; k < kept_.size(); ++k) y[static_cast<Index>(k)] = x[kept_[k]];
    return y;
  }

  Vector do_adjoint(const Vector& y) const override {
    Vector x = Vector::Zero(input_dim());
    for (std::size_t k = 0; k < kept_.size(); ++k) x[kept_[k]] = y[static_cast<Index>(k)];
    return x;
  }

  Vector do_V_transpose(const Vector& x) const override {
    Vector out(input_dim());
    Index k = 0;
    for (Index i : kept_) out[k++] = x[i];
    for (Index i : dropped_) out[k++] = x[i];
    return out;
  }

  Vector do_V(const Vector& x_bar) const override {
    Vector out(input_dim());
    Index k = 0;
    for (Index i : kept_) out[i] = x_bar[k++];
    for (Index i : dropped_) out[i] = x_bar[k++];
    return out;
  }

  Vector do_U_transpose(const Vector& y) const override { return y; }
  Vector do_U(const Vector& y) const override { return y; }

 private:
  Shape shape_;
  std::vector<Index> kept_;
  std::vector<Index> dropped_;
};

// ---------------------------------------------------------------------------

class SyntheticNonlinearBlur final : public NonlinearOperator {
 public:
  SyntheticNonlinearBlur(LinearOperatorPtr blur, double saturation)
      : blur_(std::move(blur)), saturation_(saturation) {}

  Index input_dim() const override { return blur_->input_dim(); }
  Index output_dim() const override { return blur_->output_dim(); }
  std::vector<Index> output_dims() const override { return blur_->output_dims(); }
  Shape input_shape() const override { return blur_->input_shape(); }
  std::string description() const override {
    std::ostringstream os;
    os << "tanh-saturated " << blur_->describe() << " saturation=" << saturation_;
    return os.str();
  }

 protected:
  Vector do_apply(const Vector& x) const override {
    Vector b = blur_->apply(x);
    for (Index i = 0; i < b.size(); ++i) b[i] = std::tanh(saturation_ * b[i]) / saturation_;
    return b;
  }

 private:
  LinearOperatorPtr blur_;
  double saturation_;
};

void check_positive_shape(const char* what, Index channels, Index height, Index width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw std::invalid_argument(std::string(what) + ": shape must be positive");
  }
}

Index default_radius(double sigma, Index kernel_radius) {
  return kernel_radius > 0 ? kernel_radius : static_cast<Index>(std::ceil(3.0 * sigma));
}

}  // namespace

std::vector<double> gaussian_kernel_1d(double sigma, Index radius) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel: sigma must be positive");
  if (radius < 1) throw std::invalid_argument("gaussian kernel: radius must be >= 1");
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (Index d = -radius; d <= radius; ++d) {
    const double v = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(d + radius)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;
  return taps;
}

LinearOperatorPtr make_identity(Shape shape) {
  check_positive_shape("make_identity", shape.channels, shape.height, shape.width);
  return std::make_shared<IdentityOperator>(shape);
}

LinearOperatorPtr make_dense(Matrix matrix) {
  return std::make_shared<DenseOperator>(std::move(matrix));
}

LinearOperatorPtr make_downsample(Index channels, Index height, Index width, Index block) {
  check_positive_shape("make_downsample", channels, height, width);
  if (block < 1) throw std::invalid_argument("make_downsample: block must be >= 1");
  if (height % block != 0 || width % block != 0) {
    std::ostringstream os;
    os << "make_downsample: block " << block << " does not divide " << height << "x" << width;
    throw std::invalid_argument(os.str());
  }
  return std::make_shared<DownsampleOperator>(channels, height, width, block);
}

LinearOperatorPtr make_gaussian_blur(Index channels, Index height, Index width, double sigma,
                                     Index kernel_radius) {
  check_positive_shape("make_gaussian_blur", channels, height, width);
  if (!(sigma > 0.0)) throw std::invalid_argument("make_gaussian_blur: sigma must be positive");
  return std::make_shared<CircularBlurOperator>(channels, height, width, sigma,
                                                default_radius(sigma, kernel_radius));
}

LinearOperatorPtr make_inpaint(Index channels, Index height, Index width, const Mask& mask) {
  check_positive_shape("make_inpaint", channels, height, width);
  const Shape shape{channels, height, width};
  check_dim("make_inpaint mask", shape.size(), static_cast<Index>(mask.size()));
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
    throw std::invalid_argument("make_inpaint: mask keeps no pixels");
  }
  return std::make_shared<InpaintOperator>(shape, mask);
}

Mask centered_square_mask(Index channels, Index height, Index width) {
  check_positive_shape("centered_square_mask", channels, height, width);
  const Index side_h = height / 2;
  const Index side_w = width / 2;
  const Index top = (height - side_h) / 2;
  const Index left = (width - side_w) / 2;
  Mask mask(static_cast<std::size_t>(channels * height * width), true);
  for (Index c = 0; c < channels; ++c) {
    for (Index i = top; i < top + side_h; ++i) {
      for (Index j = left; j < left + side_w; ++j) {
        mask[static_cast<std::size_t>((c * height + i) * width + j)] = false;
      }
    }
  }
  return mask;
}

LinearOperatorPtr make_center_inpaint(Index channels, Index height, Index width) {
  return make_inpaint(channels, height, width, centered_square_mask(channels, height, width));
}

std::shared_ptr<const NonlinearOperator> make_synthetic_nonlinear_blur(
    Index channels, Index height, Index width, double sigma, double saturation,
    Index kernel_radius) {
  if (!(saturation > 0.0)) {
    throw std::invalid_argument("make_synthetic_nonlinear_blur: saturation must be positive");
  }
  auto blur = make_gaussian_blur(channels, height, width, sigma, kernel_radius);
  return std::make_shared<SyntheticNonlinearBlur>(std::move(blur), saturation);
}

MeasurementModel::MeasurementModel(ForwardOperatorPtr op_in, double sigma_y_in)
    : op(std::move(op_in)), sigma_y(sigma_y_in) {
  if (!op) throw std::invalid_argument("MeasurementModel: operator is null");
  if (!(sigma_y >= 0.0) || !std::isfinite(sigma_y)) {
    throw std::invalid_argument("MeasurementModel: sigma_y must be finite and >= 0");
  }
}

LinearOperatorPtr MeasurementModel::linear() const {
  return std::dynamic_pointer_cast<const LinearOperator>(op);
}

Vector degrade(const MeasurementModel& model, const Vector& x, std::uint64_t seed) {
  Vector y = model.op->apply(x);
  if (model.sigma_y > 0.0) {
    Rng rng(seed);
    for (Index i = 0; i < y.size(); ++i) y[i] += model.sigma_y * rng.normal();
  }
  return y;
}

Vector degrade(const MeasurementModel& model, const ImageTensor& x, std::uint64_t seed) {
  return degrade(model, x.data(), seed);
}

}  // namespace cminv
