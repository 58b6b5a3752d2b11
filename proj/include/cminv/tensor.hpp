// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cminv {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when an input's dimension does not match what an operation expects.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& what, Index expected, Index actual);

  Index expected() const noexcept { return expected_; }
  Index actual() const noexcept { return actual_; }

 private:
  Index expected_;
  Index actual_;
};

/// Throws DimensionError unless `actual == expected`.
void check_dim(const char* what, Index expected, Index actual);

struct Shape {
  Index channels = 1;
  Index height = 1;
  Index width = 1;

  Index size() const noexcept { return channels * height * width; }
  bool operator==(const Shape&) const = default;
  std::string to_string() const;
};

/// Dense (channels, height, width) image stored row-major, channel-outermost.
///
/// Values are nominally in [0, 1] but nothing enforces a range. Construction
/// rejects NaN and infinities.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(Shape shape, Vector data);

  static ImageTensor zeros(Shape shape);
  static ImageTensor filled(Shape shape, double value);

  const Shape& shape() const noexcept { return shape_; }
  Index size() const noexcept { return data_.size(); }

  const Vector& data() const noexcept { return data_; }

  double at(Index c, Index i, Index j) const {
    return data_[(c * shape_.height + i) * shape_.width + j];
  }

  /// Same shape, new values. Values are checked for finiteness.
  ImageTensor with_data(Vector data) const { return ImageTensor(shape_, std::move(data)); }

 private:
  Shape shape_{0, 0, 0};
  Vector data_;
};

bool all_finite(const Vector& v);

}  // namespace cminv
