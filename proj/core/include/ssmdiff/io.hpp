#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssmdiff::io {

void write_f64_le(std::ostream& os, double v);
void write_u64_le(std::ostream& os, std::uint64_t v);
void write_f64_block(std::ostream& os, std::span<const double> values);

// Sequential little-endian reader over an in-memory byte buffer. Every read
// is bounds-checked and failures name the byte offset.
class ByteReader {
 public:
  explicit ByteReader(std::string bytes, std::size_t offset = 0);

  double read_f64();
  std::uint64_t read_u64();
  void read_f64_block(std::span<double> out);

  std::size_t offset() const { return offset_; }
  std::size_t remaining() const { return bytes_.size() - offset_; }

 private:
  void require(std::size_t n, std::string_view what) const;

  std::string bytes_;
  std::size_t offset_;
};

// Text header of `key=value` lines terminated by a line `end_header`.
using Header = std::map<std::string, std::string>;

struct HeaderSplit {
  Header header;
  std::size_t data_offset = 0;  // first byte after the terminator line
};

HeaderSplit parse_header(const std::string& bytes, std::string_view magic);
const std::string& header_get(const Header& h, const std::string& key);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

std::string format_double(double v);  // round-trip exact, locale independent
std::string join_sizes(std::span<const std::size_t> values);
std::vector<std::size_t> split_sizes(std::string_view text);

// FNV-1a 64-bit, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace ssmdiff::io
