#pragma once

// Little-endian byte encoding shared by the embedding and model formats.

#include "fecam/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fecam::detail {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buffer_.insert(buffer_.end(), s.begin(), s.end()); }

  void u8(std::uint8_t v) { buffer_.push_back(v); }

  void u16(std::uint16_t v) { put_le(v, 2); }

  void u32(std::uint32_t v) { put_le(v, 4); }

  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v), 4); }

  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }

  std::vector<std::uint8_t> take() { return std::move(buffer_); }

  std::size_t size() const { return buffer_.size(); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t> buffer_;
};

class ByteReader {
 public:
  // `base` is the absolute position of data[0], so errors report file offsets.
  ByteReader(std::span<const std::uint8_t> data, const char* what, std::size_t base = 0)
      : data_(data), what_(what), base_(base) {}

  std::size_t offset() const { return base_ + offset_; }
  std::size_t remaining() const { return data_.size() - offset_; }
  bool at_end() const { return offset_ == data_.size(); }

  void require(std::size_t n, const char* field) const {
    if (remaining() < n) {
      throw FormatError(std::string(what_) + ": truncated while reading " + field + " (need " +
                            std::to_string(n) + " bytes, " + std::to_string(remaining()) +
                            " left)",
                        base_ + data_.size());
    }
  }

  std::string bytes(std::size_t n, const char* field) {
    require(n, field);
    std::string out(reinterpret_cast<const char*>(data_.data() + offset_), n);
    offset_ += n;
    return out;
  }

  std::uint8_t u8(const char* field) { return static_cast<std::uint8_t>(get_le(1, field)); }
  std::uint16_t u16(const char* field) { return static_cast<std::uint16_t>(get_le(2, field)); }
  std::uint32_t u32(const char* field) { return static_cast<std::uint32_t>(get_le(4, field)); }
  float f32(const char* field) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(get_le(4, field)));
  }
  double f64(const char* field) { return std::bit_cast<double>(get_le(8, field)); }

  [[noreturn]] void fail(const std::string& message) const {
    throw FormatError(std::string(what_) + ": " + message, offset());
  }

 private:
  std::uint64_t get_le(int width, const char* field) {
    require(static_cast<std::size_t>(width), field);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(data_[offset_ + static_cast<std::size_t>(i)]) << (8 * i);
    }
    offset_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const std::uint8_t> data_;
  const char* what_;
  std::size_t base_ = 0;
  std::size_t offset_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace fecam::detail
