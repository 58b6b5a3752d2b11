// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cminv/random.hpp"
#include "cminv/tensor_io.hpp"

namespace cminv {

namespace {

void check_same_shape(const ImageTensor& x, const ImageTensor& reference) {
  if (!(x.shape() == reference.shape())) {
    throw std::invalid_argument("shape mismatch: " + x.shape().to_string() + " vs " +
                                reference.shape().to_string());
  }
}

/// Symmetric PSD square root; adds the magnitude of clamped eigenvalues to `clamped`.
Matrix psd_sqrt(const Matrix& m, double& clamped) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  Vector lam = eig.eigenvalues();
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < 0.0) {
      clamped += -lam[i];
      lam[i] = 0.0;
    }
  }
  return eig.eigenvectors() * lam.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double psnr(const ImageTensor& x, const ImageTensor& reference, double peak) {
  check_same_shape(x, reference);
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be > 0");
  const double mse = (x.data() - reference.data()).squaredNorm() / static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

Index default_ssim_window(const Shape& shape) {
  return std::min(shape.height, shape.width) < 32 ? 7 : 11;
}

double ssim(const ImageTensor& x, const ImageTensor& reference, Index window, double k1,
            double k2, double peak) {
  check_same_shape(x, reference);
  const Shape& sh = x.shape();
  if (window == 0) window = default_ssim_window(sh);
  if (window < 3 || window % 2 == 0) throw std::invalid_argument("ssim: window must be odd and >= 3");
  if (sh.height < window || sh.width < window) {
    throw std::invalid_argument("ssim: image " + sh.to_string() + " smaller than window " +
                                std::to_string(window));
  }

  constexpr double sigma = 1.5;
  const Index half = window / 2;
  Vector g(window);
  for (Index k = 0; k < window; ++k) {
    const double d = static_cast<double>(k - half);
    g[k] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  g /= g.sum();
  const Matrix w = g * g.transpose();

  const double c1 = (k1 * peak) * (k1 * peak);
  const double c2 = (k2 * peak) * (k2 * peak);
  double total = 0.0;
  for (Index c = 0; c < sh.channels; ++c) {
    double channel_sum = 0.0;
    Index count = 0;
    for (Index i0 = 0; i0 + window <= sh.height; ++i0) {
      for (Index j0 = 0; j0 + window <= sh.width; ++j0) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (Index a = 0; a < window; ++a) {
          for (Index b = 0; b < window; ++b) {
            const double wt = w(a, b);
            const double xv = x.at(c, i0 + a, j0 + b);
            const double yv = reference.at(c, i0 + a, j0 + b);
            mx += wt * xv;
            my += wt * yv;
            sxx += wt * xv * xv;
            syy += wt * yv * yv;
            sxy += wt * xv * yv;
          }
        }
        const double vx = sxx - mx * mx;
        const double vy = syy - my * my;
        const double cov = sxy - mx * my;
        channel_sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
    total += channel_sum / static_cast<double>(count);
  }
  return total / static_cast<double>(sh.channels);
}

FrechetResult frechet_distance(const Vector& mu1, const Matrix& cov1, const Vector& mu2,
                               const Matrix& cov2) {
  const Index d = mu1.size();
  check_dim("frechet mu2", d, mu2.size());
  check_dim("frechet cov1 rows", d, cov1.rows());
  check_dim("frechet cov1 cols", d, cov1.cols());
  check_dim("frechet cov2 rows", d, cov2.rows());
  check_dim("frechet cov2 cols", d, cov2.cols());

  FrechetResult out;
  const Matrix s1 = psd_sqrt(cov1, out.clamped);
  const Matrix inner = s1 * cov2 * s1;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (inner + inner.transpose()),
                                            Eigen::EigenvaluesOnly);
  double trace_sqrt = 0.0;
  for (Index i = 0; i < d; ++i) {
    const double lam = eig.eigenvalues()[i];
    if (lam < 0.0) {
      out.clamped += -lam;
    } else {
      trace_sqrt += std::sqrt(lam);
    }
  }
  const double value =
      (mu1 - mu2).squaredNorm() + cov1.trace() + cov2.trace() - 2.0 * trace_sqrt;
  out.distance = std::max(value, 0.0);
  return out;
}

GaussianMoments feature_moments(const Matrix& features) {
  if (features.rows() < 2) throw std::invalid_argument("feature moments need at least 2 samples");
  GaussianMoments m;
  m.mean = features.colwise().mean().transpose();
  const Matrix centered = features.rowwise() - m.mean.transpose();
  m.covariance = centered.transpose() * centered / static_cast<double>(features.rows() - 1);
  return m;
}

FrechetResult fid(const Matrix& features_x, const Matrix& features_y) {
  check_dim("fid feature width", features_x.cols(), features_y.cols());
  const auto a = feature_moments(features_x);
  const auto b = feature_moments(features_y);
  return frechet_distance(a.mean, a.covariance, b.mean, b.covariance);
}

double kid_kernel(const Vector& a, const Vector& b) {
  check_dim("kid kernel", a.size(), b.size());
  const double v = a.dot(b) / static_cast<double>(a.size()) + 1.0;
  return v * v * v;
}

Index max_kid_subset(Index n_x, Index n_y) {
  return n_x == n_y ? n_x / 2 : std::min(n_x, n_y);
}

KidResult kid(const Matrix& features_x, const Matrix& features_y, Index subset_size,
              Index n_subsets, std::uint64_t seed) {
  check_dim("kid feature width", features_x.cols(), features_y.cols());
  if (subset_size < 2) throw std::invalid_argument("kid: subset_size must be >= 2");
  if (n_subsets < 1) throw std::invalid_argument("kid: n_subsets must be >= 1");
  const Index nx = features_x.rows();
  const Index ny = features_y.rows();
  const bool paired = nx == ny;
  if (subset_size > max_kid_subset(nx, ny)) {
    throw std::invalid_argument("kid: subset_size " + std::to_string(subset_size) +
                                " too large for sets of " + std::to_string(nx) + " and " +
                                std::to_string(ny) + " samples (at most " +
                                std::to_string(max_kid_subset(nx, ny)) + ")");
  }
  const Index m = subset_size;
  const double d = static_cast<double>(features_x.cols());
  Rng rng(seed);
  Vector estimates(n_subsets);
  Matrix sx(m, features_x.cols());
  Matrix sy(m, features_y.cols());
  std::vector<Index> px(static_cast<std::size_t>(nx));
  std::vector<Index> py(static_cast<std::size_t>(ny));
  // Partial Fisher-Yates: the first `count` entries of perm become a uniform draw.
  auto shuffle_prefix = [&rng](std::vector<Index>& perm, Index count) {
    std::iota(perm.begin(), perm.end(), Index{0});
    const auto n = static_cast<Index>(perm.size());
    for (Index i = 0; i < count; ++i) {
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(i + rng.uniform_index(n - i))]);
    }
  };
  for (Index k = 0; k < n_subsets; ++k) {
    if (paired) {
      shuffle_prefix(px, 2 * m);
      for (Index i = 0; i < m; ++i) {
        sx.row(i) = features_x.row(px[static_cast<std::size_t>(i)]);
        sy.row(i) = features_y.row(px[static_cast<std::size_t>(m + i)]);
      }
    } else {
      shuffle_prefix(px, m);
      shuffle_prefix(py, m);
      for (Index i = 0; i < m; ++i) {
        sx.row(i) = features_x.row(px[static_cast<std::size_t>(i)]);
        sy.row(i) = features_y.row(py[static_cast<std::size_t>(i)]);
      }
    }
    const Matrix kxx = ((sx * sx.transpose()).array() / d + 1.0).cube().matrix();
    const Matrix kyy = ((sy * sy.transpose()).array() / d + 1.0).cube().matrix();
    const Matrix kxy = ((sx * sy.transpose()).array() / d + 1.0).cube().matrix();
    const double mm1 = static_cast<double>(m * (m - 1));
    const double xx = (kxx.sum() - kxx.trace()) / mm1;
    const double yy = (kyy.sum() - kyy.trace()) / mm1;
    const double xy = kxy.sum() / static_cast<double>(m * m);
    estimates[k] = xx + yy - 2.0 * xy;
  }
  KidResult out;
  out.n_subsets = n_subsets;
  out.subset_size = m;
  const double mean = estimates.mean();
  out.kid_x1000 = 1000.0 * mean;
  if (n_subsets > 1) {
    const double var =
        (estimates.array() - mean).square().sum() / static_cast<double>(n_subsets - 1);
    out.std_x1000 = 1000.0 * std::sqrt(var);
    out.se_x1000 = out.std_x1000 / std::sqrt(static_cast<double>(n_subsets));
  }
  return out;
}

FeatureMode parse_feature_mode(std::string_view name) {
  for (auto m : {FeatureMode::raw_pixels, FeatureMode::pooled_patches, FeatureMode::external_file}) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown feature mode '" + std::string(name) + "'");
}

const char* to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::raw_pixels: return "raw_pixels";
    case FeatureMode::pooled_patches: return "pooled_patches";
    case FeatureMode::external_file: return "external_file";
  }
  return "unknown";
}

Vector feature_extract(const ImageTensor& x, FeatureMode mode, Index patch) {
  switch (mode) {
    case FeatureMode::raw_pixels:
      return x.data();
    case FeatureMode::pooled_patches: {
      const Shape& s = x.shape();
      if (patch < 1 || s.height % patch != 0 || s.width % patch != 0) {
        throw std::invalid_argument("pooled_patches: patch " + std::to_string(patch) +
                                    " must divide " + s.to_string());
      }
      const Index oh = s.height / patch;
      const Index ow = s.width / patch;
      Vector f = Vector::Zero(s.channels * oh * ow);
      const double inv = 1.0 / static_cast<double>(patch * patch);
      for (Index c = 0; c < s.channels; ++c) {
        for (Index i = 0; i < s.height; ++i) {
          for (Index j = 0; j < s.width; ++j) {
            f[(c * oh + i / patch) * ow + j / patch] += x.at(c, i, j) * inv;
          }
        }
      }
      return f;
    }
    case FeatureMode::external_file:
      throw std::invalid_argument("external_file features are loaded with load_feature_file");
  }
  return {};
}

Matrix feature_matrix(const std::vector<ImageTensor>& images, FeatureMode mode, Index patch) {
  if (images.empty()) return {};
  const Vector first = feature_extract(images.front(), mode, patch);
  Matrix out(static_cast<Index>(images.size()), first.size());
  out.row(0) = first.transpose();
  for (std::size_t i = 1; i < images.size(); ++i) {
    const Vector f = feature_extract(images[i], mode, patch);
    check_dim("feature length", first.size(), f.size());
    out.row(static_cast<Index>(i)) = f.transpose();
  }
  return out;
}

Matrix load_feature_file(const std::filesystem::path& path, Index expected_rows) {
  const TensorData t = read_tensor_file(path);
  if (t.dims.size() != 2) {
    throw FormatError(path.string() + ": feature files must be 2-D (N, d)");
  }
  const Index rows = t.dims[0];
  const Index cols = t.dims[1];
  if (expected_rows >= 0) check_dim("feature rows", expected_rows, rows);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = t.values[i * cols + j];
  }
  return out;
}

}  // namespace cminv
