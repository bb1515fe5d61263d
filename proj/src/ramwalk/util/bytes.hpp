#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ramwalk::util {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TruncatedInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void f64s(const double* p, std::size_t n) { raw(p, n * sizeof(double)); }

  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& v) : ByteReader(v.data(), v.size()) {}

  void raw(void* out, std::size_t n) {
    if (n > size_ - pos_) {
      throw TruncatedInput("truncated input: need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                           ", have " + std::to_string(size_ - pos_));
    }
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return get<std::int32_t>(); }
  double f64() { return get<double>(); }
  std::string str() {
    const auto n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void f64s(double* out, std::size_t n) {
    if (n > (size_ - pos_) / sizeof(double)) throw TruncatedInput("truncated input: tensor payload");
    raw(out, n * sizeof(double));
  }

  std::size_t remaining() const { return size_ - pos_; }
  std::size_t position() const { return pos_; }

 private:
  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace ramwalk::util
