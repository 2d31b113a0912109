#include "nvw/field_map.hpp"

#include <algorithm>
#include <cmath>

#include "io_util.hpp"
#include "nvw/errors.hpp"
#include "nvw/grid.hpp"

namespace nvw {

std::size_t PixelGrid::column_at(double x) const {
  const double c = (x - origin_um.x) / pitch_um + 0.5 * static_cast<double>(cols - 1);
  return static_cast<std::size_t>(std::clamp(std::lround(c), 0L, static_cast<long>(cols) - 1));
}

std::size_t PixelGrid::row_at(double y) const {
  const double r = (y - origin_um.y) / pitch_um + 0.5 * static_cast<double>(rows - 1);
  return static_cast<std::size_t>(std::clamp(std::lround(r), 0L, static_cast<long>(rows) - 1));
}

void PixelGrid::validate() const {
  if (rows == 0 || cols == 0) {
    throw InvalidArgument("pixel grid is empty");
  }
  if (!(pitch_um > 0.0) || !std::isfinite(pitch_um)) {
    throw InvalidArgument("pixel pitch must be positive");
  }
  if (usable_rows > rows || usable_cols > cols) {
    throw InvalidArgument("usable region exceeds the pixel grid");
  }
}

double FieldMap::max_abs() const {
  double m = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) {
      m = std::max(m, std::abs(v));
    }
  }
  return m;
}

FieldMap FieldMap::normalized() const {
  const double m = max_abs();
  FieldMap out = scaled(m > 0.0 ? 1.0 / m : 1.0);
  out.units = "relative";
  return out;
}

FieldMap FieldMap::scaled(double factor) const {
  FieldMap out = *this;
  for (double& v : out.values) {
    v *= factor;
  }
  return out;
}

std::string encode_field_map(const FieldMap& map) {
  if (map.values.size() != map.rows * map.cols) {
    throw InvalidArgument("field map size does not match rows*cols");
  }
  std::string out = detail::HeaderWriter("NVWMAP", 1)
                        .add("rows", static_cast<std::uint64_t>(map.rows))
                        .add("cols", static_cast<std::uint64_t>(map.cols))
                        .add("pitch_um", map.pitch_um)
                        .add("standoff_um", map.standoff_um)
                        .add("units", map.units)
                        .finish();
  std::vector<float> payload(map.values.begin(), map.values.end());
  detail::append_le(out, payload);
  return out;
}

FieldMap decode_field_map(const std::string& bytes) {
  const detail::Header h = detail::parse_header(bytes, "NVWMAP", 1);
  FieldMap map;
  map.rows = h.get_uint("rows");
  map.cols = h.get_uint("cols");
  map.pitch_um = h.get_double("pitch_um");
  map.standoff_um = h.get_double("standoff_um");
  map.units = h.get("units");
  if (map.rows == 0 || map.cols == 0 || map.rows > (1u << 16) || map.cols > (1u << 16)) {
    throw FormatError("implausible map dimensions", h.offsets.at("rows"));
  }
  const auto payload = detail::read_le<float>(bytes, h.payload_offset, map.rows * map.cols);
  if (bytes.size() != h.payload_offset + payload.size() * sizeof(float)) {
    throw FormatError("trailing bytes after map payload",
                      h.payload_offset + payload.size() * sizeof(float));
  }
  map.values.assign(payload.begin(), payload.end());
  return map;
}

void write_field_map(const std::filesystem::path& path, const FieldMap& map) {
  detail::write_file_atomic(path, encode_field_map(map));
}

FieldMap read_field_map(const std::filesystem::path& path) {
  return decode_field_map(detail::read_file(path));
}

}  // namespace nvw
