// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace danesd {

using Bytes = std::vector<uint8_t>;

// Big-endian append/read helpers for wire encoding.
class ByteWriter {
public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
  }
  void u24(uint32_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 16));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
  }
  void u32(uint32_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 24));
    buf_.push_back(static_cast<uint8_t>(v >> 16));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v));
  }
  void raw(std::span<const uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void raw(const std::string& s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  size_t size() const { return buf_.size(); }
  uint8_t& at(size_t i) { return buf_.at(i); }
  // Patches a previously reserved 32-bit slot.
  void patch_u32(size_t offset, uint32_t v) {
    buf_.at(offset) = static_cast<uint8_t>(v >> 24);
    buf_.at(offset + 1) = static_cast<uint8_t>(v >> 16);
    buf_.at(offset + 2) = static_cast<uint8_t>(v >> 8);
    buf_.at(offset + 3) = static_cast<uint8_t>(v);
  }
  Bytes take() { return std::move(buf_); }
  const Bytes& data() const { return buf_; }

private:
  Bytes buf_;
};

// Cursor over a byte buffer. Callers check remaining() before reads or use
// the throwing accessors; out-of-range reads raise std::out_of_range with
// the offset baked into the message.
class ByteReader {
public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  size_t offset() const { return pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  uint16_t u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  uint32_t u24() {
    need(3);
    uint32_t v = static_cast<uint32_t>(data_[pos_]) << 16 |
        static_cast<uint32_t>(data_[pos_ + 1]) << 8 | data_[pos_ + 2];
    pos_ += 3;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = static_cast<uint32_t>(data_[pos_]) << 24 |
        static_cast<uint32_t>(data_[pos_ + 1]) << 16 |
        static_cast<uint32_t>(data_[pos_ + 2]) << 8 | data_[pos_ + 3];
    pos_ += 4;
    return v;
  }
  std::span<const uint8_t> raw(size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(size_t n) {
    need(n);
    pos_ += n;
  }

private:
  void need(size_t n) const {
    if (data_.size() - pos_ < n)
      throw std::out_of_range("short read at offset " + std::to_string(pos_));
  }
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

std::string to_hex(std::span<const uint8_t> data);
Bytes from_hex(const std::string& hex);

std::string base64_encode(std::span<const uint8_t> data);
Bytes base64_decode(const std::string& text);

} // namespace danesd
