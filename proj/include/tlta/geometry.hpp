#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <set>
#include <span>
#include <vector>

namespace tlta::geometry {

// Tolerance for every geometric predicate, in metres.
inline constexpr double kEpsilon = 1e-9;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }

double distance(Point a, Point b);
double point_segment_distance(Point p, Point a, Point b);
double segment_segment_distance(Point a, Point b, Point c, Point d);
// Closed-segment intersection, endpoints and collinear overlap included.
bool segments_intersect(Point a, Point b, Point c, Point d);

/// Axial hex coordinate. Ordered lexicographically by (q, r) so cell sets
/// iterate deterministically.
struct CellId {
  int q = 0;
  int r = 0;

  friend auto operator<=>(const CellId&, const CellId&) = default;
};

using CellSet = std::set<CellId>;

/// The six axial neighbours in fixed order:
/// (1,0), (1,-1), (0,-1), (-1,0), (-1,1), (0,1).
std::vector<CellId> neighbors(CellId cell);
int hex_distance(CellId a, CellId b);
// Cells on the straight hex line from a to b, both ends included.
std::vector<CellId> hex_line(CellId a, CellId b);

/// Simple, closed, non-degenerate polygon. Construction validates; a
/// Polygon value is always usable by the predicates below.
class Polygon {
public:
  explicit Polygon(std::vector<Point> vertices);

  std::span<const Point> vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  Point vertex(std::size_t i) const { return vertices_[i % vertices_.size()]; }

  // Shoelace area, always positive.
  double area() const;
  Point centroid() const;

  friend bool operator==(const Polygon&, const Polygon&) = default;

private:
  std::vector<Point> vertices_;
};

double signed_area(std::span<const Point> ring);

/// Even-odd test with the boundary counted as inside.
bool point_in_polygon(Point p, const Polygon& poly);
bool point_on_boundary(Point p, const Polygon& poly);
// Distance from p to the polygon boundary.
double boundary_distance(Point p, const Polygon& poly);

Polygon scale_polygon(const Polygon& poly, double factor);

/// Pointy-top hexagonal grid in axial coordinates. A cell belongs to the
/// grid when its hex distance from (0,0) is at most `extent`.
class HexGrid {
public:
  HexGrid(double cell_radius, int extent, Point origin = {});

  double cell_radius() const { return cell_radius_; }
  int extent() const { return extent_; }
  Point origin() const { return origin_; }

  bool contains(CellId cell) const;
  Point center(CellId cell) const;
  // Corners in counter-clockwise order starting at 30 degrees.
  std::array<Point, 6> corners(CellId cell) const;
  bool hex_contains(CellId cell, Point p) const;

  /// Cell whose hex contains p. Throws OutOfGrid outside the extent.
  CellId cell_of_position(Point p) const;
  bool covers(Point p) const;

  // All cells of the grid in (q, r) order.
  std::vector<CellId> cells() const;

private:
  double cell_radius_;
  int extent_;
  Point origin_;
};

bool cell_intersects_polygon(const HexGrid& grid, CellId cell, const Polygon& poly);

/// Connected, hole-free set of cells whose union contains pz.
CellSet cover_cells(const Polygon& pz, const HexGrid& grid);

/// Minimum distance between the boundary of poly and the union of the cell
/// hexes; zero when the boundary touches or crosses any hex.
double dist_polygon_to_cells(const Polygon& poly, const CellSet& cells, const HexGrid& grid);

struct ZoneOptions {
  double op_scale = 1.0;
  int outer_layers = 1;
  // Control configuration: op is the sp outline itself instead of a scaled pz.
  bool op_from_sp = false;
};

inline constexpr double kOpScaleStep = 0.05;

/// Compiled protected-zone geometry.
struct ZoneMap {
  Polygon pz;
  CellSet cover;
  CellSet c1;
  CellSet c0;
  std::vector<CellSet> outer_layers;  // c-1, c-2, ...
  std::vector<Point> sp;              // closed outline of the c1 region
  Polygon op;
  double op_scale = 1.0;
  double requested_op_scale = 1.0;

  bool inside_sp(CellId cell) const { return cover.contains(cell); }

  friend bool operator==(const ZoneMap&, const ZoneMap&) = default;
};

ZoneMap compile_zones(const Polygon& pz, const HexGrid& grid, const ZoneOptions& options);

/// Outline of a cell region as one closed ring (edges between a member
/// cell and a non-member cell). Requires a connected, hole-free region.
std::vector<Point> region_outline(const CellSet& region, const HexGrid& grid);

}  // namespace tlta::geometry
