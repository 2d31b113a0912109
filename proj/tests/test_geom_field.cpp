#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "nvw/errors.hpp"
#include "nvw/geom_field.hpp"

using namespace nvw;

namespace {

CircuitLayout long_wire(double z_um = 10.0, double half_len = 1e6) {
  CircuitLayout l;
  l.name = "wire";
  l.segments = {{{0.0, -half_len, z_um}, {0.0, half_len, z_um}, 10.0}};
  return l;
}

// Brute-force midpoint-rule Biot-Savart over many short elements.
Vec3 dense_field(const CircuitLayout& layout, double current, Vec3 p, int per_um) {
  Vec3 b{};
  for (const WireSegment& s : layout.segments) {
    const Vec3 d = s.end - s.start;
    const int n = std::max(1, static_cast<int>(norm(d) * per_um));
    const Vec3 dl = d / n;
    for (int i = 0; i < n; ++i) {
      const Vec3 mid = s.start + dl * (i + 0.5);
      const Vec3 r = p - mid;
      const double rn = norm(r);
      b += cross(dl, r) * (kMu0 * current / (4.0 * std::numbers::pi) / (rn * rn * rn) * 1e6);
    }
  }
  return b;
}

}  // namespace

TEST(SegmentField, InfiniteWireLimit) {
  const FieldSample s = field_at_point(long_wire(), 0.02, {0.0, 0.0, 0.0});
  EXPECT_NEAR(norm(s.B), 400e-6, 400e-6 * 1e-6);
  EXPECT_NEAR(std::abs(s.B.x), norm(s.B), 1e-15);
}

TEST(SegmentField, ZeroCurrentGivesZero) {
  const FieldSample s = field_at_point(make_cross_layout(10, 5, 15, 225, TrackAxis::y), 0.0,
                                       {3.0, 7.0, 10.0});
  EXPECT_EQ(s.B, (Vec3{0.0, 0.0, 0.0}));
}

TEST(SegmentField, AntisymmetricInCurrent) {
  const CircuitLayout l = make_cross_layout(10, 5, 15, 225, TrackAxis::y);
  const Vec3 p{4.0, -3.0, 10.0};
  const Vec3 a = field_at_point(l, 0.013, p).B;
  const Vec3 b = field_at_point(l, -0.013, p).B;
  EXPECT_EQ(a, -b);
}

TEST(SegmentField, Superposition) {
  CircuitLayout two;
  two.segments = {{{0, 0, 0}, {0, 50, 0}, 5}, {{0, 50, 0}, {40, 50, 0}, 5}};
  CircuitLayout first;
  first.segments = {two.segments[0]};
  CircuitLayout second;
  second.segments = {two.segments[1]};
  const Vec3 p{12.0, 20.0, 8.0};
  const Vec3 sum = field_at_point(first, 0.01, p).B + field_at_point(second, 0.01, p).B;
  const Vec3 both = field_at_point(two, 0.01, p).B;
  EXPECT_NEAR(norm(sum - both), 0.0, 1e-12 * norm(both));
}

TEST(SegmentField, InverseDistanceDecay) {
  const Vec3 axis = default_sensing_axis();
  const double b1 = project(field_at_point(long_wire(0.0), 0.01, {0, 0, 10}).B, axis);
  const double b2 = project(field_at_point(long_wire(0.0), 0.01, {0, 0, 20}).B, axis);
  EXPECT_NEAR(b1 / b2, 2.0, 1e-3);
}

TEST(SegmentField, ConvergesToInfiniteWire) {
  const double d = 10.0;
  const double expected = kMu0 * 0.02 / (2.0 * std::numbers::pi * d * 1e-6);
  const double b = norm(field_at_point(long_wire(0.0, 0.5e6), 0.02, {0, 0, d}).B);
  EXPECT_LT(std::abs(b - expected) / expected, 1e-6);
}

TEST(SegmentField, MatchesDenseSummation) {
  const CircuitLayout l = make_cross_layout(10, 5, 15, 60, TrackAxis::y);
  for (const Vec3 p : {Vec3{5, 0, 10}, Vec3{-12, 20, 10}, Vec3{3, -29, 4}}) {
    const Vec3 exact = field_at_point(l, 0.004, p).B;
    const Vec3 dense = dense_field(l, 0.004, p, 200);
    EXPECT_LT(norm(exact - dense) / norm(exact), 1e-5);
  }
}

TEST(SegmentField, SingularityOnCenterline) {
  EXPECT_THROW(field_at_point(long_wire(0.0), 0.01, {0.0, 3.0, 0.0}), SingularityError);
  // collinear but beyond the segment: finite
  CircuitLayout s;
  s.segments = {{{0, 0, 0}, {0, 10, 0}, 5}};
  EXPECT_NO_THROW(field_at_point(s, 0.01, {0, 20, 0}));
}

TEST(SegmentField, RotationEquivariance) {
  const CircuitLayout ly = make_cross_layout(10, 5, 15, 225, TrackAxis::y);
  const CircuitLayout lx = make_cross_layout(10, 5, 15, 225, TrackAxis::x);
  const Vec3 axis = default_sensing_axis();
  // rotate the axis too; the rotated axis is another unit vector
  const Vec3 raxis = rotate_z90(axis);
  for (const Vec3 p : {Vec3{5, 0, 10}, Vec3{-17, 40, 10}, Vec3{30, -2, 25}}) {
    const double a = project(field_at_point(ly, 0.004, p).B, axis);
    const double b = project(field_at_point(lx, 0.004, rotate_z90(p)).B, raxis);
    EXPECT_NEAR(a, b, 1e-12 * std::max(1e-12, std::abs(a)));
  }
}

TEST(Project, UnitAxis) {
  EXPECT_DOUBLE_EQ(project({1e-6, 0, 0}, {1, 0, 0}), 1e-6);
  EXPECT_THROW(project({1, 0, 0}, {1, 1, 0}), InvalidArgument);
}

TEST(Project, AxisAlongWireSeesNothing) {
  const Vec3 b = field_at_point(long_wire(0.0), 0.01, {3, 0, 10}).B;
  EXPECT_NEAR(project(b, {0, 1, 0}), 0.0, 1e-18);
}

TEST(NvAxes, TetrahedralSet) {
  const auto axes = nv_axes();
  for (const Vec3& a : axes) {
    EXPECT_NEAR(norm(a), 1.0, 1e-15);
    EXPECT_GT(a.x * a.y * a.z, 0.0);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      EXPECT_NEAR(dot(axes[i], axes[j]), -1.0 / 3.0, 1e-15);
    }
  }
  EXPECT_EQ(default_sensing_axis(), axes[0]);
}

TEST(CrossLayout, ThreeSegmentsAlongY) {
  const CircuitLayout l = make_cross_layout(10, 5, 15, 225, TrackAxis::y);
  ASSERT_EQ(l.segments.size(), 3u);
  EXPECT_DOUBLE_EQ(l.segments[1].width_um, 5.0);
  EXPECT_DOUBLE_EQ(l.segments[1].start.y, -7.5);
  EXPECT_DOUBLE_EQ(l.segments[1].end.y, 7.5);
  for (const WireSegment& s : l.segments) {
    EXPECT_EQ(s.start.x, 0.0);
    EXPECT_EQ(s.end.x, 0.0);
  }
  EXPECT_NO_THROW(l.validate());
}

TEST(CrossLayout, UniformTrackWhenNotNarrowed) {
  const CircuitLayout l = make_cross_layout(10, 10, 15, 225, TrackAxis::x);
  for (const WireSegment& s : l.segments) {
    EXPECT_EQ(s.width_um, 10.0);
    EXPECT_EQ(s.start.y, 0.0);
  }
}

TEST(CrossLayout, XIsRotatedY) {
  const CircuitLayout ly = make_cross_layout(10, 5, 15, 225, TrackAxis::y);
  const CircuitLayout lx = make_cross_layout(10, 5, 15, 225, TrackAxis::x);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(lx.segments[i].start, rotate_z90(ly.segments[i].start));
    EXPECT_EQ(lx.segments[i].end, rotate_z90(ly.segments[i].end));
  }
}

TEST(CrossLayout, RejectsBadDimensions) {
  EXPECT_THROW(make_cross_layout(0, 5, 15, 225, TrackAxis::y), GeometryError);
  EXPECT_THROW(make_cross_layout(10, -1, 15, 225, TrackAxis::y), GeometryError);
  EXPECT_THROW(make_cross_layout(5, 10, 15, 225, TrackAxis::y), GeometryError);
}

TEST(Layout, ValidateCatchesGaps) {
  CircuitLayout l;
  l.segments = {{{0, 0, 0}, {0, 10, 0}, 5}, {{0, 10.001, 0}, {0, 20, 0}, 5}};
  EXPECT_THROW(l.validate(), GeometryError);
  l.segments[1].start.y = 10.0;
  EXPECT_NO_THROW(l.validate());
  l.segments[0].width_um = 0.0;
  EXPECT_THROW(l.validate(), GeometryError);
}

TEST(Layout, TextRoundTrip) {
  const CircuitLayout l = make_cross_layout(10, 5, 15, 225, TrackAxis::x);
  const CircuitLayout back = parse_layout(format_layout(l));
  ASSERT_EQ(back.segments.size(), l.segments.size());
  for (std::size_t i = 0; i < l.segments.size(); ++i) {
    EXPECT_EQ(back.segments[i].start, l.segments[i].start);
    EXPECT_EQ(back.segments[i].end, l.segments[i].end);
    EXPECT_EQ(back.segments[i].width_um, l.segments[i].width_um);
  }
}

TEST(Layout, ParseErrorNamesOffset) {
  const std::string text = "# comment\n0 0 0 0 10 0 5\n0 10 0 oops 20 0 5\n";
  try {
    parse_layout(text);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), text.find("0 10 0 oops"));
  }
}

TEST(FieldMap, MaximumNextToTrack) {
  PixelGrid grid;
  grid.rows = 300;
  grid.cols = 300;
  grid.pitch_um = 1.5;
  const CircuitLayout l = make_cross_layout(10, 5, 15, 450, TrackAxis::y);
  const FieldMap m = field_map(l, 0.004, grid, 10.0, default_sensing_axis());
  std::size_t best = 0;
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    if (std::abs(m.values[i]) > std::abs(m.values[best])) {
      best = i;
    }
  }
  const double x = grid.x_um(best % grid.cols);
  EXPECT_LE(std::abs(x), 10.0 + 2 * 1.5);
  // direct evaluation at that pixel
  const Vec3 p = grid.center(best / grid.cols, best % grid.cols, 10.0);
  EXPECT_NEAR(m.values[best], project(field_at_point(l, 0.004, p).B, default_sensing_axis()) * 1e6,
              1e-9);
}

TEST(FieldMap, LinearInCurrent) {
  PixelGrid grid;
  grid.rows = 40;
  grid.cols = 40;
  const CircuitLayout l = make_cross_layout(10, 5, 15, 450, TrackAxis::x);
  const FieldMap a = field_map(l, 0.004, grid, 10.0, default_sensing_axis());
  const FieldMap b = field_map(l, 0.008, grid, 10.0, default_sensing_axis());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    EXPECT_NEAR(b.values[i], 2.0 * a.values[i], 1e-12 * std::abs(b.values[i]));
  }
}

TEST(FieldMap, PartitionInvariant) {
  PixelGrid grid;
  grid.rows = 37;
  grid.cols = 23;
  const CircuitLayout l = make_cross_layout(10, 5, 15, 450, TrackAxis::y);
  const FieldMap a = field_map(l, 0.004, grid, 10.0, default_sensing_axis(), 1);
  const FieldMap b = field_map(l, 0.004, grid, 10.0, default_sensing_axis(), 5);
  EXPECT_EQ(a.values, b.values);
}

TEST(FieldMap, RejectsEmptyGridAndBadStandoff) {
  PixelGrid grid;
  const CircuitLayout l = make_cross_layout(10, 5, 15, 450, TrackAxis::y);
  EXPECT_THROW(field_map(l, 0.004, grid, 10.0, default_sensing_axis()), InvalidArgument);
  grid.rows = grid.cols = 4;
  EXPECT_THROW(field_map(l, 0.004, grid, 0.0, default_sensing_axis()), InvalidArgument);
}

TEST(FieldMap, NormalizedPeaksAtOne) {
  PixelGrid grid;
  grid.rows = grid.cols = 20;
  const FieldMap m = field_map(make_cross_layout(10, 5, 15, 450, TrackAxis::y), 0.004, grid,
                               10.0, default_sensing_axis())
                         .normalized();
  EXPECT_DOUBLE_EQ(m.max_abs(), 1.0);
  EXPECT_EQ(m.units, "relative");
}

TEST(FieldMapFile, RoundTripAndErrors) {
  FieldMap m;
  m.rows = 2;
  m.cols = 3;
  m.pitch_um = 1.5;
  m.standoff_um = 10;
  m.values = {1, -2, 3.5, std::nan(""), 0, 7};
  const std::string bytes = encode_field_map(m);
  const FieldMap back = decode_field_map(bytes);
  EXPECT_EQ(back.rows, 2u);
  EXPECT_EQ(back.units, "uT");
  EXPECT_TRUE(std::isnan(back.values[3]));
  EXPECT_EQ(back.values[5], 7.0);
  EXPECT_THROW(decode_field_map(bytes.substr(0, bytes.size() - 1)), FormatError);
  std::string bad = bytes;
  bad.replace(bad.find("cols 3"), 6, "cols x");
  try {
    decode_field_map(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), bytes.find("cols 3"));
  }
}
