#pragma once

// Shared helpers for the text-header + little-endian payload file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nvw/errors.hpp"

namespace nvw::detail {

static_assert(std::endian::native == std::endian::little,
              "binary payloads are written with native little-endian layout");

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string format_double(double v);

class HeaderWriter {
 public:
  HeaderWriter(std::string_view magic, int version);
  HeaderWriter& add(std::string_view key, std::string_view value);
  HeaderWriter& add(std::string_view key, double value);
  HeaderWriter& add(std::string_view key, std::uint64_t value);
  std::string finish() const;

 private:
  std::string text_;
};

/// Parsed header. `payload_offset` is the first byte after the "end" line.
struct Header {
  std::map<std::string, std::string> fields;
  std::map<std::string, std::size_t> offsets;  // byte offset of each key's line
  std::size_t payload_offset = 0;

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool has(const std::string& key) const { return fields.count(key) != 0; }
};

Header parse_header(const std::string& bytes, std::string_view magic, int version);

template <typename T>
void append_le(std::string& out, const std::vector<T>& values) {
  const std::size_t n = values.size() * sizeof(T);
  const std::size_t at = out.size();
  out.resize(at + n);
  if (n != 0) {
    std::memcpy(out.data() + at, values.data(), n);
  }
}

template <typename T>
std::vector<T> read_le(const std::string& bytes, std::size_t offset, std::size_t count) {
  if (offset > bytes.size() || (bytes.size() - offset) / sizeof(T) < count) {
    throw FormatError("truncated payload: expected " + std::to_string(count * sizeof(T)) +
                          " bytes",
                      bytes.size());
  }
  std::vector<T> out(count);
  if (count != 0) {
    std::memcpy(out.data(), bytes.data() + offset, count * sizeof(T));
  }
  return out;
}

}  // namespace nvw::detail
