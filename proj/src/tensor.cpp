// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/tensor.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cminv/random.hpp"

namespace cminv {

namespace {

std::string dimension_message(const std::string& what, Index expected, Index actual) {
  std::ostringstream os;
  os << what << ": expected dimension " << expected << ", got " << actual;
  return os.str();
}

}  // namespace

DimensionError::DimensionError(const std::string& what, Index expected, Index actual)
    : std::invalid_argument(dimension_message(what, expected, actual)),
      expected_(expected),
      actual_(actual) {}

void check_dim(const char* what, Index expected, Index actual) {
  if (expected != actual) throw DimensionError(what, expected, actual);
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << "(" << channels << ", " << height << ", " << width << ")";
  return os.str();
}

bool all_finite(const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) return false;
  }
  return true;
}

ImageTensor::ImageTensor(Shape shape, Vector data) : shape_(shape), data_(std::move(data)) {
  if (shape_.channels <= 0 || shape_.height <= 0 || shape_.width <= 0) {
    throw std::invalid_argument("ImageTensor: shape " + shape_.to_string() + " must be positive");
  }
  check_dim("ImageTensor data", shape_.size(), data_.size());
  if (!all_finite(data_)) throw std::invalid_argument("ImageTensor: data contains NaN or Inf");
}

ImageTensor ImageTensor::zeros(Shape shape) { return ImageTensor(shape, Vector::Zero(shape.size())); }

ImageTensor ImageTensor::filled(Shape shape, double value) {
  return ImageTensor(shape, Vector::Constant(shape.size(), value));
}

double Rng::uniform() {
  // 53 random bits mapped to (0, 1); the half-step offset excludes 0.
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

Index Rng::uniform_index(Index n) {
  if (n <= 0) throw std::invalid_argument("Rng::uniform_index: n must be positive");
  const auto range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return static_cast<Index>(draw % range);
}

Vector Rng::normal_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(base) ^ stream) ^ index);
}

}  // namespace cminv
