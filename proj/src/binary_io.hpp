#pragma once

// Little-endian byte buffers shared by the PEMB, PADP and PVIG formats.

#include "pnps/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace pnps::detail {

class ByteWriter {
 public:
  void magic(std::string_view tag) { bytes_.insert(bytes_.end(), tag.begin(), tag.end()); }

  void u8(std::uint8_t v) { bytes_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> shift));
  }

  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  std::size_t flush(std::ostream& out) const {
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "write to sink failed");
    return bytes_.size();
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked cursor over a fully buffered input; every short read is
/// reported as Truncated before anything is allocated.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  static ByteReader slurp(std::istream& in) {
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (in.bad()) throw Error(ErrorCode::IoFailure, "read from source failed");
    return ByteReader(std::move(bytes));
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) throw Error(ErrorCode::Truncated, std::string("stream ends inside ") + what);
  }

  void expect_magic(std::string_view tag) {
    if (remaining() < tag.size() ||
        std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
      throw Error(ErrorCode::BadMagic, "expected magic \"" + std::string(tag) + "\"");
    }
    pos_ += tag.size();
  }

  std::uint8_t u8(const char* what) {
    require(1, what);
    return bytes_[pos_++];
  }

  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::string str(std::size_t n, const char* what) {
    require(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void expect_end() const {
    if (remaining() != 0) {
      throw Error(ErrorCode::TrailingBytes, std::to_string(remaining()) + " unexpected trailing bytes");
    }
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace pnps::detail
