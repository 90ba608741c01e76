#include "cmag/binary_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "cmag/error.hpp"

namespace cmag::io {
namespace {

constexpr char kMagic[8] = {'C', 'M', 'A', 'G', 'B', 'I', 'N', '\0'};

std::uint32_t checksum(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace

BinaryWriter::BinaryWriter(std::string_view kind) {
  buf_.insert(buf_.end(), kMagic, kMagic + 8);
  u32(kContainerVersion);
  str(kind);
}

void BinaryWriter::u32(std::uint32_t v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  buf_.insert(buf_.end(), b, b + 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  unsigned char b[8];
  std::memcpy(b, &v, 8);
  buf_.insert(buf_.end(), b, b + 8);
}

void BinaryWriter::f64(double v) {
  unsigned char b[8];
  std::memcpy(b, &v, 8);
  buf_.insert(buf_.end(), b, b + 8);
}

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void BinaryWriter::f64s(std::span<const double> v) {
  u64(v.size());
  for (double x : v) f64(x);
}

void BinaryWriter::matrix(const Matrix& m) {
  u64(m.rows());
  u64(m.cols());
  for (double x : m.values()) f64(x);
}

std::vector<unsigned char> BinaryWriter::finish() {
  std::vector<unsigned char> out = buf_;
  const std::uint32_t c = checksum(out.data(), out.size());
  unsigned char b[4];
  std::memcpy(b, &c, 4);
  out.insert(out.end(), b, b + 4);
  return out;
}

void BinaryWriter::save(const std::filesystem::path& path) {
  const auto bytes = finish();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

BinaryReader::BinaryReader(std::vector<unsigned char> bytes, std::string_view expected_kind)
    : buf_(std::move(bytes)) {
  if (buf_.size() < 8 + 4 + 4 + 4 || std::memcmp(buf_.data(), kMagic, 8) != 0) {
    fail(ErrorCode::BadFormat, "not a cmag binary container");
  }
  std::uint32_t stored;
  std::memcpy(&stored, buf_.data() + buf_.size() - 4, 4);
  if (stored != checksum(buf_.data(), buf_.size() - 4)) {
    fail(ErrorCode::ChecksumMismatch, "binary container checksum mismatch");
  }
  end_ = buf_.size() - 4;
  pos_ = 8;
  version_ = u32();
  if (version_ != kContainerVersion) {
    fail(ErrorCode::BadFormat, "unsupported container version " + std::to_string(version_));
  }
  const std::string kind = str();
  if (kind != expected_kind) {
    fail(ErrorCode::BadFormat, "container holds '" + kind + "', expected '" + std::string(expected_kind) + "'");
  }
}

BinaryReader BinaryReader::open(const std::filesystem::path& path, std::string_view expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return BinaryReader(std::move(bytes), expected_kind);
}

void BinaryReader::need(std::size_t n) const {
  if (pos_ + n > end_) fail(ErrorCode::Truncated, "binary container ends early");
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, buf_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::vector<double> BinaryReader::f64s() {
  const std::uint64_t n = u64();
  need(n * 8);
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return v;
}

Matrix BinaryReader::matrix() {
  const std::uint64_t r = u64();
  const std::uint64_t c = u64();
  need(r * c * 8);
  Matrix m(r, c);
  for (auto& x : m.values()) x = f64();
  return m;
}

}  // namespace cmag::io
