#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace meanfield {

using Json = nlohmann::json;

/// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Canonical serialization: keys sorted, no whitespace, shortest round-trip
/// numbers. Two configs that compare equal produce the same string.
std::string canonical_dump(const Json& j);
inline std::string content_hash(const Json& j) { return sha256_hex(canonical_dump(j)); }

/// Little-endian byte sink used by every binary format in the project.
class ByteWriter {
 public:
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> v);
  void bytes(std::string_view s);
  const std::string& data() const noexcept { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Bounds-checked little-endian reader; throws the supplied error type's
/// message via `fail` when the input is short.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}
  uint32_t u32();
  uint64_t u64();
  double f64();
  void f64s(std::span<double> out);
  std::string_view bytes(size_t n);
  size_t remaining() const noexcept { return data_.size() - pos_; }
  size_t position() const noexcept { return pos_; }

 private:
  void need(size_t n) const;
  std::string_view data_;
  size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

/// Tensor file: magic "MFT1", u64 header length, UTF-8 JSON header,
/// then the float64 payload (little-endian). The header always carries
/// "shape" (array of extents) and may carry arbitrary metadata.
struct Tensor {
  Json header = Json::object();
  std::vector<size_t> shape;
  std::vector<double> values;
};

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Minimal RFC-4180 CSV writer. Numbers use round-trip precision.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void row(std::span<const double> values);
  void row(const std::vector<std::string>& fields);
  const std::string& str() const noexcept { return out_; }

 private:
  static std::string escape(const std::string& field);
  size_t columns_;
  std::string out_;
};

std::string format_double(double v);

}  // namespace meanfield
