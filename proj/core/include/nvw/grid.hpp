#pragma once

#include <cstddef>
#include <vector>

#include "nvw/vec3.hpp"

namespace nvw {

/// Camera pixel lattice. `origin_um` is the position of the grid center;
/// columns run along +x and rows along +y. The usable region is a centered
/// sub-rectangle (sensor edges are masked in the real device).
struct PixelGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  double pitch_um = 1.5;
  Vec3 origin_um{};
  std::size_t usable_rows = 0;  // 0 means "all rows"
  std::size_t usable_cols = 0;

  std::size_t size() const { return rows * cols; }
  std::size_t index(std::size_t r, std::size_t c) const { return r * cols + c; }

  double x_um(std::size_t c) const {
    return origin_um.x + (static_cast<double>(c) - 0.5 * static_cast<double>(cols - 1)) * pitch_um;
  }
  double y_um(std::size_t r) const {
    return origin_um.y + (static_cast<double>(r) - 0.5 * static_cast<double>(rows - 1)) * pitch_um;
  }

  /// Pixel center in the sensor plane z = origin.z + standoff.
  Vec3 center(std::size_t r, std::size_t c, double standoff_um) const {
    return {x_um(c), y_um(r), origin_um.z + standoff_um};
  }

  std::size_t effective_usable_rows() const { return usable_rows == 0 ? rows : usable_rows; }
  std::size_t effective_usable_cols() const { return usable_cols == 0 ? cols : usable_cols; }

  bool usable(std::size_t r, std::size_t c) const {
    const std::size_t ur = effective_usable_rows();
    const std::size_t uc = effective_usable_cols();
    const std::size_t r0 = (rows - ur) / 2;
    const std::size_t c0 = (cols - uc) / 2;
    return r >= r0 && r < r0 + ur && c >= c0 && c < c0 + uc;
  }

  /// Row-major usable flags.
  std::vector<unsigned char> usable_mask() const {
    std::vector<unsigned char> mask(size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        mask[index(r, c)] = usable(r, c) ? 1 : 0;
      }
    }
    return mask;
  }

  /// Column nearest to a lateral position (clamped to the grid).
  std::size_t column_at(double x) const;
  std::size_t row_at(double y) const;

  /// Throws InvalidArgument when the grid is empty or inconsistent.
  void validate() const;
};

}  // namespace nvw
