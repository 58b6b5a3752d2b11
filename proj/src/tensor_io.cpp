// Copyright (C) 2026 The cminv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cminv/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cminv {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'C', 'M', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + k])) << (8 * k);
  }
  return v;
}

}  // namespace

std::size_t TensorData::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string encode_tensor(const TensorData& tensor) {
  if (tensor.element_count() != static_cast<std::size_t>(tensor.values.size())) {
    throw FormatError("tensor payload has " + std::to_string(tensor.values.size()) +
                      " values but dims imply " + std::to_string(tensor.element_count()));
  }
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  out.reserve(out.size() + 4 * tensor.element_count());
  for (Index i = 0; i < tensor.values.size(); ++i) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(tensor.values[i])));
  }
  return out;
}

TensorData decode_tensor(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, kMagic, 4) != 0) {
    throw FormatError("not a CMT1 tensor file (bad magic)");
  }
  TensorData t;
  const std::uint32_t ndim = get_u32(bytes, 4);
  const std::size_t header = 8 + 4 * static_cast<std::size_t>(ndim);
  if (bytes.size() < header) throw FormatError("truncated tensor header");
  for (std::uint32_t k = 0; k < ndim; ++k) t.dims.push_back(get_u32(bytes, 8 + 4 * k));
  const std::size_t n = t.element_count();
  if (bytes.size() != header + 4 * n) {
    throw FormatError("tensor payload is " + std::to_string(bytes.size() - header) +
                      " bytes, expected " + std::to_string(4 * n));
  }
  t.values.resize(static_cast<Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    t.values[static_cast<Index>(i)] = std::bit_cast<float>(get_u32(bytes, header + 4 * i));
  }
  return t;
}

void write_text_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_tensor_file(const fs::path& path, const TensorData& tensor) {
  write_text_file(path, encode_tensor(tensor));
}

TensorData read_tensor_file(const fs::path& path) {
  try {
    return decode_tensor(read_text_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

TensorData to_tensor_data(const ImageTensor& image) {
  const Shape& s = image.shape();
  return {{static_cast<std::uint32_t>(s.channels), static_cast<std::uint32_t>(s.height),
           static_cast<std::uint32_t>(s.width)},
          image.data()};
}

ImageTensor to_image(const TensorData& tensor) {
  const auto& d = tensor.dims;
  Shape shape;
  if (d.size() == 3) {
    shape = {d[0], d[1], d[2]};
  } else if (d.size() == 2) {
    shape = {1, d[0], d[1]};
  } else if (d.size() == 1) {
    shape = {1, 1, d[0]};
  } else {
    throw FormatError("image tensors need 1 to 3 dims, got " + std::to_string(d.size()));
  }
  return ImageTensor(shape, tensor.values);
}

Vector round_to_float32(const Vector& v) {
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

std::string encode_netpbm(const ImageTensor& image) {
  const Shape& s = image.shape();
  if (s.channels != 1 && s.channels != 3) {
    throw std::invalid_argument("netpbm export needs 1 or 3 channels, got " +
                                std::to_string(s.channels));
  }
  std::ostringstream os;
  os << (s.channels == 1 ? "P5" : "P6") << "\n" << s.width << " " << s.height << "\n255\n";
  std::string out = os.str();
  for (Index i = 0; i < s.height; ++i) {
    for (Index j = 0; j < s.width; ++j) {
      for (Index c = 0; c < s.channels; ++c) {
        const double v = std::clamp(image.at(c, i, j), 0.0, 1.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
  return out;
}

void write_netpbm(const fs::path& path, const ImageTensor& image) {
  write_text_file(path, encode_netpbm(image));
}

}  // namespace cminv
