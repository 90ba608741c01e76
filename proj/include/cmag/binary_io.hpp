#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmag/matrix.hpp"

namespace cmag::io {

// Versioned binary container used for fitted models and checkpoints:
//   "CMAGBIN\0" | u32 format version | u32 kind length | kind bytes | body | u32 CRC-32
// Everything little-endian; strings are u32-length-prefixed.
inline constexpr std::uint32_t kContainerVersion = 1;

class BinaryWriter {
 public:
  explicit BinaryWriter(std::string_view kind);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  void f64s(std::span<const double> v);
  void matrix(const Matrix& m);
  /// Appends the checksum and returns the finished bytes.
  std::vector<unsigned char> finish();
  void save(const std::filesystem::path& path);

 private:
  std::vector<unsigned char> buf_;
};

class BinaryReader {
 public:
  /// Verifies magic, version, kind and checksum up front.
  BinaryReader(std::vector<unsigned char> bytes, std::string_view expected_kind);
  static BinaryReader open(const std::filesystem::path& path, std::string_view expected_kind);

  std::uint32_t version() const noexcept { return version_; }
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::vector<double> f64s();
  Matrix matrix();
  bool at_end() const noexcept { return pos_ == end_; }

 private:
  void need(std::size_t n) const;
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::uint32_t version_ = 0;
};

}  // namespace cmag::io
