#include "io_util.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nvw::detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write " + tmp.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

HeaderWriter::HeaderWriter(std::string_view magic, int version) {
  text_.append(magic);
  text_ += ' ';
  text_ += std::to_string(version);
  text_ += '\n';
}

HeaderWriter& HeaderWriter::add(std::string_view key, std::string_view value) {
  text_.append(key);
  text_ += ' ';
  text_.append(value);
  text_ += '\n';
  return *this;
}

HeaderWriter& HeaderWriter::add(std::string_view key, double value) {
  return add(key, format_double(value));
}

HeaderWriter& HeaderWriter::add(std::string_view key, std::uint64_t value) {
  return add(key, std::to_string(value));
}

std::string HeaderWriter::finish() const { return text_ + "end\n"; }

const std::string& Header::get(const std::string& key) const {
  auto it = fields.find(key);
  if (it == fields.end()) {
    throw FormatError("missing header key '" + key + "'", payload_offset);
  }
  return it->second;
}

double Header::get_double(const std::string& key) const {
  const std::string& s = get(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("bad number for '" + key + "': " + s, offsets.at(key));
  }
  return v;
}

std::uint64_t Header::get_uint(const std::string& key) const {
  const std::string& s = get(key);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError("bad integer for '" + key + "': " + s, offsets.at(key));
  }
  return v;
}

Header parse_header(const std::string& bytes, std::string_view magic, int version) {
  Header h;
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) -> bool {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos || nl - pos > 4096) {
      return false;
    }
    line.assign(bytes, pos, nl - pos);
    pos = nl + 1;
    return true;
  };

  std::string line;
  const std::string expected = std::string(magic) + " " + std::to_string(version);
  if (!next_line(line) || line != expected) {
    throw FormatError("expected '" + expected + "' header", 0);
  }
  while (true) {
    const std::size_t line_start = pos;
    if (!next_line(line)) {
      throw FormatError("unterminated header", line_start);
    }
    if (line == "end") {
      break;
    }
    const std::size_t sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) {
      throw FormatError("malformed header line '" + line + "'", line_start);
    }
    std::string key = line.substr(0, sp);
    if (h.fields.count(key) != 0) {
      throw FormatError("duplicate header key '" + key + "'", line_start);
    }
    h.offsets[key] = line_start;
    h.fields[key] = line.substr(sp + 1);
  }
  h.payload_offset = pos;
  return h;
}

}  // namespace nvw::detail
