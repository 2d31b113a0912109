#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace nvw {

/// Scalar image on a pixel grid, row-major. NaN marks a masked or dead pixel.
struct FieldMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double pitch_um = 0.0;
  double standoff_um = 0.0;
  std::string units = "uT";
  std::vector<double> values;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  /// Largest finite |value|; 0 for an empty or all-masked map.
  double max_abs() const;

  /// Copy scaled so the largest |value| is 1 (units become "relative").
  FieldMap normalized() const;

  FieldMap scaled(double factor) const;
};

/// Header: "NVWMAP 1", then `key value` lines (rows, cols, pitch_um,
/// standoff_um, units), then "end". Payload: rows*cols float32 LE, row-major.
void write_field_map(const std::filesystem::path& path, const FieldMap& map);
FieldMap read_field_map(const std::filesystem::path& path);
std::string encode_field_map(const FieldMap& map);
FieldMap decode_field_map(const std::string& bytes);

}  // namespace nvw
