#include "nvw/geom_field.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "io_util.hpp"
#include "nvw/errors.hpp"
#include "nvw/parallel.hpp"

namespace nvw {

void CircuitLayout::validate() const {
  if (segments.empty()) {
    throw GeometryError("layout '" + name + "' has no segments");
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const WireSegment& s = segments[i];
    if (!is_finite(s.start) || !is_finite(s.end)) {
      throw GeometryError("segment " + std::to_string(i) + " has non-finite endpoints");
    }
    if (!(norm(s.end - s.start) > 0.0)) {
      throw GeometryError("segment " + std::to_string(i) + " has zero length");
    }
    if (!(s.width_um > 0.0) || !std::isfinite(s.width_um)) {
      throw GeometryError("segment " + std::to_string(i) + " has non-positive width");
    }
    if (i > 0 && norm(s.start - segments[i - 1].end) > kConnectivityTolUm) {
      throw GeometryError("segment " + std::to_string(i) + " does not start where segment " +
                          std::to_string(i - 1) + " ends");
    }
  }
}

CircuitLayout make_cross_layout(double track_width_um, double center_width_um,
                                double center_extent_um, double arm_length_um, TrackAxis axis) {
  for (double v : {track_width_um, center_width_um, center_extent_um, arm_length_um}) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw GeometryError("cross dimensions must be positive");
    }
  }
  if (center_width_um > track_width_um) {
    throw GeometryError("center width exceeds track width");
  }
  if (center_extent_um >= arm_length_um) {
    throw GeometryError("center extent must be shorter than the arm");
  }

  const double h = 0.5 * arm_length_um;
  const double e = 0.5 * center_extent_um;
  CircuitLayout layout;
  layout.segments = {
      {{0.0, -h, 0.0}, {0.0, -e, 0.0}, track_width_um},
      {{0.0, -e, 0.0}, {0.0, e, 0.0}, center_width_um},
      {{0.0, e, 0.0}, {0.0, h, 0.0}, track_width_um},
  };
  layout.name = "cross_y";
  if (axis == TrackAxis::x) {
    for (WireSegment& s : layout.segments) {
      s.start = rotate_z90(s.start);
      s.end = rotate_z90(s.end);
    }
    layout.name = "cross_x";
  }
  return layout;
}

Vec3 segment_field(const WireSegment& seg, double current_a, Vec3 point_um) {
  const Vec3 axis = seg.end - seg.start;
  const double len = norm(axis);
  const Vec3 u = axis / len;
  const Vec3 r1 = point_um - seg.start;
  const Vec3 r2 = point_um - seg.end;
  const double a1 = dot(r1, u);
  const Vec3 rho = r1 - u * a1;
  const double d = norm(rho);
  if (d < kSingularityGuardUm) {
    if (a1 >= -kSingularityGuardUm && a1 <= len + kSingularityGuardUm) {
      throw SingularityError("field requested on a wire centerline");
    }
    return {};
  }
  const double bracket = a1 / norm(r1) - dot(r2, u) / norm(r2);
  const double d_m = d * 1e-6;
  const double scale = kMu0 * current_a / (4.0 * std::numbers::pi * d_m) * bracket / d;
  return cross(u, rho) * scale;
}

FieldSample field_at_point(const CircuitLayout& layout, double current_a, Vec3 point_um) {
  Vec3 b{};
  for (const WireSegment& seg : layout.segments) {
    b += segment_field(seg, current_a, point_um);
  }
  return {b, point_um};
}

double project(Vec3 B, Vec3 axis) {
  if (!(std::abs(norm(axis) - 1.0) <= 1e-9)) {
    throw InvalidArgument("projection axis is not a unit vector");
  }
  return dot(B, axis);
}

std::array<Vec3, 4> nv_axes() {
  const double k = 1.0 / std::sqrt(3.0);
  return {Vec3{k, k, k}, Vec3{k, -k, -k}, Vec3{-k, k, -k}, Vec3{-k, -k, k}};
}

Vec3 default_sensing_axis() { return nv_axes()[0]; }

FieldMap field_map(const CircuitLayout& layout, double current_a, const PixelGrid& grid,
                   double standoff_um, Vec3 axis, unsigned workers) {
  grid.validate();
  if (!(standoff_um > 0.0)) {
    throw InvalidArgument("standoff must be positive");
  }
  project(Vec3{}, axis);  // axis check

  FieldMap map;
  map.rows = grid.rows;
  map.cols = grid.cols;
  map.pitch_um = grid.pitch_um;
  map.standoff_um = standoff_um;
  map.units = "uT";
  map.values.assign(grid.size(), 0.0);
  parallel_for(grid.rows, workers, [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t c = 0; c < grid.cols; ++c) {
        const Vec3 b = field_at_point(layout, current_a, grid.center(r, c, standoff_um)).B;
        map.values[grid.index(r, c)] = dot(b, axis) * 1e6;
      }
    }
  });
  return map;
}

CircuitLayout parse_layout(const std::string& text, const std::string& name) {
  CircuitLayout layout;
  layout.name = name;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t line_start = pos;
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) {
      nl = text.size();
    }
    std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (const std::size_t hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::istringstream ss(line);
    WireSegment s;
    ss >> s.start.x >> s.start.y >> s.start.z >> s.end.x >> s.end.y >> s.end.z >> s.width_um;
    std::string rest;
    if (ss.fail() || (ss >> rest)) {
      throw FormatError("layout line needs 'x0 y0 z0 x1 y1 z1 width'", line_start);
    }
    layout.segments.push_back(s);
  }
  layout.validate();
  return layout;
}

CircuitLayout read_layout(const std::filesystem::path& path) {
  return parse_layout(detail::read_file(path), path.stem().string());
}

std::string format_layout(const CircuitLayout& layout) {
  std::string out = "# " + layout.name + "\n# x0 y0 z0 x1 y1 z1 width (um)\n";
  for (const WireSegment& s : layout.segments) {
    for (double v : {s.start.x, s.start.y, s.start.z, s.end.x, s.end.y, s.end.z}) {
      out += detail::format_double(v);
      out += ' ';
    }
    out += detail::format_double(s.width_um);
    out += '\n';
  }
  return out;
}

}  // namespace nvw
