#include "meanfield/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "meanfield/errors.hpp"

namespace meanfield {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string canonical_dump(const Json& j) {
  // nlohmann::json objects are std::map-backed, so keys are already sorted.
  return j.dump(-1, ' ', false, Json::error_handler_t::strict);
}

void ByteWriter::u32(uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void ByteWriter::u64(uint64_t v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void ByteWriter::f64(double v) { buf_.append(reinterpret_cast<const char*>(&v), sizeof v); }
void ByteWriter::f64s(std::span<const double> v) {
  buf_.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
}
void ByteWriter::bytes(std::string_view s) { buf_.append(s); }

void ByteReader::need(size_t n) const {
  if (remaining() < n) throw CorruptCheckpoint("unexpected end of binary data");
}
uint32_t ByteReader::u32() {
  need(4);
  uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}
uint64_t ByteReader::u64() {
  need(8);
  uint64_t v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}
double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}
void ByteReader::f64s(std::span<double> out) {
  need(out.size_bytes());
  std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}
std::string_view ByteReader::bytes(size_t n) {
  need(n);
  auto s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingData("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

namespace {
constexpr std::string_view kTensorMagic = "MFT1";
}

std::string encode_tensor(const Tensor& t) {
  size_t count = 1;
  for (size_t e : t.shape) count *= e;
  if (count != t.values.size()) throw ConfigError("tensor shape does not match payload size");
  Json header = t.header;
  header["shape"] = t.shape;
  const std::string h = canonical_dump(header);
  ByteWriter w;
  w.bytes(kTensorMagic);
  w.u64(h.size());
  w.bytes(h);
  w.f64s(t.values);
  return w.take();
}

Tensor decode_tensor(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4 || r.bytes(4) != kTensorMagic) throw CorruptCheckpoint("not an MFT1 tensor file");
  const uint64_t hlen = r.u64();
  Tensor t;
  t.header = Json::parse(r.bytes(hlen));
  t.shape = t.header.at("shape").get<std::vector<size_t>>();
  size_t count = 1;
  for (size_t e : t.shape) count *= e;
  if (r.remaining() != count * sizeof(double)) throw CorruptCheckpoint("tensor payload has the wrong length");
  t.values.resize(count);
  r.f64s(t.values);
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }
Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

std::string CsvWriter::escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) throw ConfigError("CSV row has the wrong number of columns");
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ += ',';
    out_ += escape(fields[i]);
  }
  out_ += "\r\n";
}

void CsvWriter::row(std::span<const double> values) {
  std::vector<std::string> fields;
  fields.reserve(values.size());
  for (double v : values) fields.push_back(format_double(v));
  row(fields);
}

}  // namespace meanfield
