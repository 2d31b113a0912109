#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "nvw/field_map.hpp"
#include "nvw/grid.hpp"
#include "nvw/vec3.hpp"

namespace nvw {

inline constexpr double kMu0 = 1.25663706212e-6;  // T m / A
inline constexpr double kSingularityGuardUm = 1e-6;
inline constexpr double kConnectivityTolUm = 1e-9;

struct WireSegment {
  Vec3 start;  // um
  Vec3 end;    // um
  double width_um = 10.0;
};

struct CircuitLayout {
  std::string name;
  std::vector<WireSegment> segments;

  /// Throws GeometryError on degenerate segments, bad widths or gaps.
  void validate() const;
};

struct FieldSample {
  Vec3 B;         // T
  Vec3 position;  // um
};

enum class TrackAxis { x, y };

/// One arm of the test cross: a straight path through the origin along
/// `axis`, with a narrowed section of length `center_extent` at the middle.
CircuitLayout make_cross_layout(double track_width_um, double center_width_um,
                                double center_extent_um, double arm_length_um, TrackAxis axis);

/// Field of a single straight segment carrying `current_a` from start to end.
Vec3 segment_field(const WireSegment& seg, double current_a, Vec3 point_um);

FieldSample field_at_point(const CircuitLayout& layout, double current_a, Vec3 point_um);

/// B . axis. Throws InvalidArgument unless |axis| = 1 within 1e-9.
double project(Vec3 B, Vec3 axis);

/// The four <111> axes of a (100)-cut crystal (component product +1).
std::array<Vec3, 4> nv_axes();
Vec3 default_sensing_axis();

/// Projected field in uT at every pixel center in the
/// plane z = standoff. Rows are partitioned across `workers`; output does
/// not depend on the partitioning.
FieldMap field_map(const CircuitLayout& layout, double current_a, const PixelGrid& grid,
                   double standoff_um, Vec3 axis, unsigned workers = 1);

/// Text layout: one `x0 y0 z0 x1 y1 z1 width` line per segment (um), `#` comments.
CircuitLayout parse_layout(const std::string& text, const std::string& name = "layout");
CircuitLayout read_layout(const std::filesystem::path& path);
std::string format_layout(const CircuitLayout& layout);

}  // namespace nvw
