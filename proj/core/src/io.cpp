#include "ssmdiff/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ssmdiff/error.hpp"
#include "ssmdiff/rng.hpp"

namespace ssmdiff {

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void set_rng_state(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw FormatError("invalid rng state string");
}

}  // namespace ssmdiff

namespace ssmdiff::io {

void write_u64_le(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int k = 0; k < 8; ++k) bytes[k] = static_cast<char>((v >> (8 * k)) & 0xffU);
  os.write(bytes, 8);
}

void write_f64_le(std::ostream& os, double v) { write_u64_le(os, std::bit_cast<std::uint64_t>(v)); }

void write_f64_block(std::ostream& os, std::span<const double> values) {
  for (double v : values) write_f64_le(os, v);
}

ByteReader::ByteReader(std::string bytes, std::size_t offset) : bytes_(std::move(bytes)), offset_(offset) {
  if (offset_ > bytes_.size()) throw FormatError("data offset beyond end of file");
}

void ByteReader::require(std::size_t n, std::string_view what) const {
  if (remaining() < n) {
    throw FormatError("truncated data at byte offset " + std::to_string(offset_) + " while reading " +
                      std::string(what) + " (need " + std::to_string(n) + " bytes, have " +
                      std::to_string(remaining()) + ")");
  }
}

std::uint64_t ByteReader::read_u64() {
  require(8, "u64");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[offset_ + k])) << (8 * k);
  }
  offset_ += 8;
  return v;
}

double ByteReader::read_f64() {
  require(8, "f64");
  return std::bit_cast<double>(read_u64());
}

void ByteReader::read_f64_block(std::span<double> out) {
  require(8 * out.size(), "f64 block");
  for (double& v : out) v = read_f64();
}

HeaderSplit parse_header(const std::string& bytes, std::string_view magic) {
  HeaderSplit out;
  std::size_t pos = 0;
  bool first = true;
  while (true) {
    const std::size_t eol = bytes.find('\n', pos);
    if (eol == std::string::npos) {
      throw FormatError("truncated header at byte offset " + std::to_string(pos) + ": missing end_header");
    }
    std::string line = bytes.substr(pos, eol - pos);
    const std::size_t line_start = pos;
    pos = eol + 1;
    if (first) {
      if (line != magic) {
        throw FormatError("bad magic at byte offset 0: expected '" + std::string(magic) + "'");
      }
      first = false;
      continue;
    }
    if (line == "end_header") break;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError("malformed header line at byte offset " + std::to_string(line_start));
    }
    out.header[line.substr(0, eq)] = line.substr(eq + 1);
  }
  out.data_offset = pos;
  return out;
}

const std::string& header_get(const Header& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw FormatError("header is missing key '" + key + "'");
  return it->second;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string join_sizes(std::span<const std::size_t> values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(values[k]);
  }
  return out;
}

std::vector<std::size_t> split_sizes(std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    std::size_t value = 0;
    auto piece = text.substr(pos, comma - pos);
    auto res = std::from_chars(piece.data(), piece.data() + piece.size(), value);
    if (res.ec != std::errc{} || res.ptr != piece.data() + piece.size()) {
      throw FormatError("invalid size list '" + std::string(text) + "'");
    }
    out.push_back(value);
    pos = comma + 1;
  }
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ssmdiff::io
