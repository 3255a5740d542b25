/*
 * Copyright 2026 The labelfish Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LABELFISH_SRC_BYTES_H_
#define LABELFISH_SRC_BYTES_H_

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelfish/error.h"

namespace labelfish::internal {

// Little-endian byte sink. Multi-byte values are written with explicit
// shifts so the encoding does not depend on host byte order.
class ByteWriter {
 public:
  void U8(std::uint8_t v) { out_.push_back(v); }
  void U32(std::uint32_t v) { Put(v, 4); }
  void U64(std::uint64_t v) { Put(v, 8); }
  void F64(double v) { Put(std::bit_cast<std::uint64_t>(v), 8); }
  void Bytes(std::string_view s) {
    out_.insert(out_.end(), s.begin(), s.end());
  }

  std::vector<std::uint8_t>& bytes() { return out_; }
  std::vector<std::uint8_t> Take() { return std::move(out_); }

 private:
  void Put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> in, std::string what)
      : in_(in), what_(std::move(what)) {}

  std::uint8_t U8() { return static_cast<std::uint8_t>(Get(1)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Get(4)); }
  std::uint64_t U64() { return Get(8); }
  double F64() { return std::bit_cast<double>(Get(8)); }
  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  // Element count that must still fit in the input at `width` bytes each.
  std::size_t Count(std::size_t width) {
    const std::uint64_t n = U64();
    if (width != 0 && n > (in_.size() - pos_) / width) {
      Fail("count " + std::to_string(n) + " exceeds remaining input");
    }
    return static_cast<std::size_t>(n);
  }

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }
  void ExpectDone() const {
    if (!done()) Fail("trailing bytes");
  }

  [[noreturn]] void Fail(const std::string& msg) const {
    throw Error(ErrorCode::kFormat,
                what_ + ": " + msg + " at offset " + std::to_string(pos_));
  }

 private:
  void Need(std::size_t n) const {
    if (n > in_.size() - pos_) Fail("truncated");
  }
  std::uint64_t Get(int n) {
    Need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= std::uint64_t{in_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace labelfish::internal

#endif  // LABELFISH_SRC_BYTES_H_
