// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "cminv/tensor.hpp"

namespace cminv {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// In-memory form of a CMT1 file: dims and a row-major payload. Values are
/// held as doubles but stored as little-endian float32.
struct TensorData {
  std::vector<std::uint32_t> dims;
  Vector values;

  std::size_t element_count() const;
};

/// Serialized bytes: "CMT1", u32 ndim, ndim x u32 dims, float32 payload, all LE.
std::string encode_tensor(const TensorData& tensor);
TensorData decode_tensor(const std::string& bytes);

/// Writes through a temporary file in the same directory and renames it into place.
void write_tensor_file(const std::filesystem::path& path, const TensorData& tensor);
TensorData read_tensor_file(const std::filesystem::path& path);

TensorData to_tensor_data(const ImageTensor& image);
/// Accepts (C, H, W), (H, W) and (N) dims; the latter as (1, 1, N).
ImageTensor to_image(const TensorData& tensor);

/// Rounds a tensor through float32, as a write/read cycle would.
Vector round_to_float32(const Vector& v);

/// 8-bit binary PGM (1 channel) or PPM (3 channels); values clamped to [0, 1].
std::string encode_netpbm(const ImageTensor& image);
void write_netpbm(const std::filesystem::path& path, const ImageTensor& image);

/// Atomic text write (temp file + rename).
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cminv
