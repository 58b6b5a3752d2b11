// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "cminv/tensor.hpp"

namespace cminv {

struct MetricReport {
  double psnr = 0.0;  // +inf when every sample matched its reference exactly
  double ssim = 0.0;
  std::optional<double> fid;
  std::optional<double> kid_x1000;
  std::optional<double> kid_se_x1000;
  Index n_samples = 0;
};

/// 10 log10(peak² / MSE); +inf when MSE = 0.
double psnr(const ImageTensor& x, const ImageTensor& reference, double peak = 1.0);

/// Window side used when none is given: 11, or 7 for images smaller than 32.
Index default_ssim_window(const Shape& shape);

/// Mean local SSIM over valid Gaussian-weighted windows (sigma 1.5), averaged
/// over channels. window = 0 picks default_ssim_window().
double ssim(const ImageTensor& x, const ImageTensor& reference, Index window = 0,
            double k1 = 0.01, double k2 = 0.03, double peak = 1.0);

struct FrechetResult {
  double distance = 0.0;
  double clamped = 0.0;  // total magnitude of negative eigenvalues set to zero
};

FrechetResult frechet_distance(const Vector& mu1, const Matrix& cov1, const Vector& mu2,
                               const Matrix& cov2);

struct GaussianMoments {
  Vector mean;
  Matrix covariance;  // unbiased (n - 1)
};

/// Rows of `features` are samples.
GaussianMoments feature_moments(const Matrix& features);

/// Fréchet distance between the feature moments of two sample sets.
FrechetResult fid(const Matrix& features_x, const Matrix& features_y);

/// (aᵀb / d + 1)³
double kid_kernel(const Vector& a, const Vector& b);

struct KidResult {
  double kid_x1000 = 0.0;  // mean unbiased MMD² over subsets, times 1000
  double std_x1000 = 0.0;  // spread across subsets
  double se_x1000 = 0.0;   // std / sqrt(n_subsets)
  Index n_subsets = 0;
  Index subset_size = 0;
};

/// Largest subset size kid() accepts for sets of these sizes.
Index max_kid_subset(Index n_x, Index n_y);

/// Unbiased polynomial-kernel MMD² averaged over seeded subsets, each drawn
/// without replacement. When both sets have the same length, row i of one set
/// may be paired with row i of the other (a reconstruction and its
/// reference, or the same set twice), so the two subsets use disjoint row
/// indices; this needs 2 subset_size <= N.
KidResult kid(const Matrix& features_x, const Matrix& features_y, Index subset_size,
              Index n_subsets, std::uint64_t seed);

enum class FeatureMode { raw_pixels, pooled_patches, external_file };

FeatureMode parse_feature_mode(std::string_view name);
const char* to_string(FeatureMode mode);

/// raw_pixels flattens; pooled_patches averages non-overlapping patch x patch
/// blocks per channel (patch must divide both sides).
Vector feature_extract(const ImageTensor& x, FeatureMode mode, Index patch = 2);

/// Stacks per-image features into a matrix with one row per image.
Matrix feature_matrix(const std::vector<ImageTensor>& images, FeatureMode mode, Index patch = 2);

/// Loads an (N, d) feature tensor file; rows align with sample indices.
Matrix load_feature_file(const std::filesystem::path& path, Index expected_rows);

}  // namespace cminv
