// Copyright 2026 The ConvMix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CONVMIX_BINARY_IO_H_
#define CONVMIX_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>

#include "convmix/error.h"

namespace convmix {

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are written in host order, which must be "
              "little-endian");

class BinaryWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void f64_array(std::span<const double> v) {
    bytes(v.data(), v.size_bytes());
  }
  void f32_array(std::span<const float> v) { bytes(v.data(), v.size_bytes()); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  BinaryReader(std::string data, std::string name)
      : data_(std::move(data)), name_(std::move(name)) {}

  void bytes(void* out, std::size_t n) {
    if (n > data_.size() - pos_) {
      throw Error(ErrorKind::kParse, name_ + ": truncated file");
    }
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { return read<std::uint8_t>(); }
  std::uint32_t u32() { return read<std::uint32_t>(); }
  std::uint64_t u64() { return read<std::uint64_t>(); }
  double f64() { return read<double>(); }
  void f64_array(std::span<double> out) { bytes(out.data(), out.size_bytes()); }
  void f32_array(std::span<float> out) { bytes(out.data(), out.size_bytes()); }
  std::string str() {
    std::string s(u32(), '\0');
    bytes(s.data(), s.size());
    return s;
  }
  void expect_end() const {
    if (pos_ != data_.size()) {
      throw Error(ErrorKind::kParse, name_ + ": trailing bytes");
    }
  }

 private:
  template <typename T>
  T read() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }

  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace convmix

#endif  // CONVMIX_BINARY_IO_H_
