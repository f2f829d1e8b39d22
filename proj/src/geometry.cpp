#include "tlta/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <numbers>
#include <string>
#include <utility>

#include "tlta/error.hpp"

namespace tlta::geometry {

namespace {

constexpr std::array<CellId, 6> kDirections{{{1, 0}, {1, -1}, {0, -1}, {-1, 0}, {-1, 1}, {0, 1}}};

// Neighbour across the edge running from corner i to corner i+1.
constexpr std::array<CellId, 6> kEdgeNeighbor{{{0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}, {1, 0}}};

const double kSqrt3 = std::sqrt(3.0);

double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }
double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }

int sign(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

CellId cube_round(double fq, double fr) {
  const double fs = -fq - fr;
  double rq = std::round(fq);
  double rr = std::round(fr);
  const double rs = std::round(fs);
  const double dq = std::abs(rq - fq);
  const double dr = std::abs(rr - fr);
  const double ds = std::abs(rs - fs);
  if (dq > dr && dq > ds) {
    rq = -rr - rs;
  } else if (dr > ds) {
    rr = -rq - rs;
  }
  return {static_cast<int>(rq), static_cast<int>(rr)};
}

std::vector<CellSet> components(const CellSet& cells) {
  std::vector<CellSet> out;
  CellSet seen;
  for (const CellId& start : cells) {
    if (seen.contains(start)) continue;
    CellSet comp;
    std::deque<CellId> queue{start};
    seen.insert(start);
    while (!queue.empty()) {
      const CellId c = queue.front();
      queue.pop_front();
      comp.insert(c);
      for (const CellId& n : neighbors(c)) {
        if (cells.contains(n) && !seen.contains(n)) {
          seen.insert(n);
          queue.push_back(n);
        }
      }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

// Joins every component to the main one along shortest hex lines.
CellSet bridge(CellSet cells, const CellSet& main) {
  CellSet joined = main;
  for (;;) {
    const auto parts = components(cells);
    if (parts.size() <= 1) return cells;
    int best = std::numeric_limits<int>::max();
    std::pair<CellId, CellId> link;
    for (const CellSet& part : parts) {
      if (part.contains(*joined.begin())) continue;
      for (const CellId& a : joined) {
        for (const CellId& b : part) {
          const int d = hex_distance(a, b);
          if (d < best) {
            best = d;
            link = {a, b};
          }
        }
      }
    }
    for (const CellId& c : hex_line(link.first, link.second)) cells.insert(c);
    for (const CellSet& part : components(cells)) {
      if (part.contains(*main.begin())) joined = part;
    }
  }
}

// Adds every non-member cell that cannot reach the grid rim without
// crossing the region.
CellSet fill_holes(CellSet cells, const HexGrid& grid) {
  CellSet outside;
  std::deque<CellId> queue;
  for (const CellId& c : grid.cells()) {
    if (hex_distance(c, {0, 0}) == grid.extent() && !cells.contains(c)) {
      outside.insert(c);
      queue.push_back(c);
    }
  }
  while (!queue.empty()) {
    const CellId c = queue.front();
    queue.pop_front();
    for (const CellId& n : neighbors(c)) {
      if (grid.contains(n) && !cells.contains(n) && !outside.contains(n)) {
        outside.insert(n);
        queue.push_back(n);
      }
    }
  }
  for (const CellId& c : grid.cells()) {
    if (!outside.contains(c)) cells.insert(c);
  }
  return cells;
}

bool segment_touches_hex(const HexGrid& grid, CellId cell, Point a, Point b) {
  if (grid.hex_contains(cell, a) || grid.hex_contains(cell, b)) return true;
  const auto k = grid.corners(cell);
  for (std::size_t i = 0; i < 6; ++i) {
    if (segments_intersect(a, b, k[i], k[(i + 1) % 6])) return true;
  }
  return false;
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double point_segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

bool segments_intersect(Point a, Point b, Point c, Point d) {
  const int o1 = sign(cross(a, b, c));
  const int o2 = sign(cross(a, b, d));
  const int o3 = sign(cross(c, d, a));
  const int o4 = sign(cross(c, d, b));
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  return point_segment_distance(c, a, b) <= kEpsilon || point_segment_distance(d, a, b) <= kEpsilon ||
         point_segment_distance(a, c, d) <= kEpsilon || point_segment_distance(b, c, d) <= kEpsilon;
}

double segment_segment_distance(Point a, Point b, Point c, Point d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({point_segment_distance(a, c, d), point_segment_distance(b, c, d),
                   point_segment_distance(c, a, b), point_segment_distance(d, a, b)});
}

std::vector<CellId> neighbors(CellId cell) {
  std::vector<CellId> out;
  out.reserve(6);
  for (const CellId& d : kDirections) out.push_back({cell.q + d.q, cell.r + d.r});
  return out;
}

int hex_distance(CellId a, CellId b) {
  const int dq = a.q - b.q;
  const int dr = a.r - b.r;
  return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
}

std::vector<CellId> hex_line(CellId a, CellId b) {
  const int n = hex_distance(a, b);
  std::vector<CellId> out;
  if (n == 0) return {a};
  // Nudge keeps the interpolated points off cell edges.
  const double aq = a.q + 1e-6, ar = a.r + 1e-6;
  const double bq = b.q + 1e-6, br = b.r + 1e-6;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    out.push_back(cube_round(aq + (bq - aq) * t, ar + (br - ar) * t));
  }
  return out;
}

double signed_area(std::span<const Point> ring) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point p = ring[i];
    const Point q = ring[(i + 1) % ring.size()];
    acc += p.x * q.y - q.x * p.y;
  }
  return 0.5 * acc;
}

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) {
    throw Error(ErrorCode::InvalidPolygon, "polygon needs at least 3 vertices, got " + std::to_string(n));
  }
  for (const Point& p : vertices_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error(ErrorCode::InvalidPolygon, "non-finite vertex");
  }
  if (std::abs(signed_area(vertices_)) <= kEpsilon) {
    throw Error(ErrorCode::InvalidPolygon, "polygon has zero area");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = vertices_[i];
    const Point b = vertices_[(i + 1) % n];
    if (distance(a, b) <= kEpsilon) throw Error(ErrorCode::InvalidPolygon, "repeated vertex");
    // Adjacent edges may only share their common vertex.
    const Point c = vertices_[(i + 2) % n];
    if (std::abs(cross(a, b, c)) <= kEpsilon * distance(a, b) && dot(b - a, c - b) < 0.0) {
      throw Error(ErrorCode::InvalidPolygon, "polygon folds back on itself");
    }
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_intersect(a, b, vertices_[j], vertices_[(j + 1) % n])) {
        throw Error(ErrorCode::InvalidPolygon, "polygon is self-intersecting (edges " + std::to_string(i) + " and " +
                                                   std::to_string(j) + ")");
      }
    }
  }
}

double Polygon::area() const { return std::abs(signed_area(vertices_)); }

Point Polygon::centroid() const {
  double cx = 0.0, cy = 0.0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = vertices_[i];
    const Point q = vertices_[(i + 1) % n];
    const double w = p.x * q.y - q.x * p.y;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  const double a6 = 6.0 * signed_area(vertices_);
  return {cx / a6, cy / a6};
}

double boundary_distance(Point p, const Polygon& poly) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    best = std::min(best, point_segment_distance(p, poly.vertex(i), poly.vertex(i + 1)));
  }
  return best;
}

bool point_on_boundary(Point p, const Polygon& poly) { return boundary_distance(p, poly) <= kEpsilon; }

bool point_in_polygon(Point p, const Polygon& poly) {
  if (point_on_boundary(p, poly)) return true;
  bool inside = false;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Point a = poly.vertex(i);
    const Point b = poly.vertex(i + 1);
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

Polygon scale_polygon(const Polygon& poly, double factor) {
  const Point c = poly.centroid();
  std::vector<Point> out;
  out.reserve(poly.size());
  for (const Point& p : poly.vertices()) out.push_back(c + factor * (p - c));
  return Polygon(std::move(out));
}

HexGrid::HexGrid(double cell_radius, int extent, Point origin)
    : cell_radius_(cell_radius), extent_(extent), origin_(origin) {
  if (!(cell_radius > 0.0) || !std::isfinite(cell_radius)) {
    throw Error(ErrorCode::ConfigError, "grid cell_radius must be positive");
  }
  if (extent < 1) throw Error(ErrorCode::ConfigError, "grid extent must be at least 1");
}

bool HexGrid::contains(CellId cell) const { return hex_distance(cell, {0, 0}) <= extent_; }

Point HexGrid::center(CellId cell) const {
  return {origin_.x + cell_radius_ * kSqrt3 * (cell.q + cell.r / 2.0), origin_.y + cell_radius_ * 1.5 * cell.r};
}

std::array<Point, 6> HexGrid::corners(CellId cell) const {
  const Point c = center(cell);
  std::array<Point, 6> out;
  for (int i = 0; i < 6; ++i) {
    const double angle = std::numbers::pi / 180.0 * (30.0 + 60.0 * i);
    out[i] = {c.x + cell_radius_ * std::cos(angle), c.y + cell_radius_ * std::sin(angle)};
  }
  return out;
}

bool HexGrid::hex_contains(CellId cell, Point p) const {
  const auto k = corners(cell);
  for (int i = 0; i < 6; ++i) {
    const Point a = k[i];
    const Point b = k[(i + 1) % 6];
    if (cross(a, b, p) < -kEpsilon * distance(a, b)) return false;
  }
  return true;
}

CellId HexGrid::cell_of_position(Point p) const {
  const double x = (p.x - origin_.x) / cell_radius_;
  const double y = (p.y - origin_.y) / cell_radius_;
  const CellId cell = cube_round(kSqrt3 / 3.0 * x - y / 3.0, 2.0 / 3.0 * y);
  if (!contains(cell)) {
    throw Error(ErrorCode::OutOfGrid, "position (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                          ") is outside the grid extent");
  }
  return cell;
}

bool HexGrid::covers(Point p) const {
  const double x = (p.x - origin_.x) / cell_radius_;
  const double y = (p.y - origin_.y) / cell_radius_;
  return contains(cube_round(kSqrt3 / 3.0 * x - y / 3.0, 2.0 / 3.0 * y));
}

std::vector<CellId> HexGrid::cells() const {
  std::vector<CellId> out;
  for (int q = -extent_; q <= extent_; ++q) {
    for (int r = std::max(-extent_, -q - extent_); r <= std::min(extent_, -q + extent_); ++r) out.push_back({q, r});
  }
  return out;
}

bool cell_intersects_polygon(const HexGrid& grid, CellId cell, const Polygon& poly) {
  if (point_in_polygon(grid.center(cell), poly)) return true;
  const auto k = grid.corners(cell);
  for (const Point& c : k) {
    if (point_in_polygon(c, poly)) return true;
  }
  for (const Point& v : poly.vertices()) {
    if (grid.hex_contains(cell, v)) return true;
  }
  for (std::size_t i = 0; i < poly.size(); ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      if (segments_intersect(poly.vertex(i), poly.vertex(i + 1), k[j], k[(j + 1) % 6])) return true;
    }
  }
  return false;
}

CellSet cover_cells(const Polygon& pz, const HexGrid& grid) {
  if (pz.area() <= kEpsilon) throw Error(ErrorCode::InvalidPolygon, "protected zone area below tolerance");
  // Every vertex and a dense sample of every edge must fall on the grid.
  const double step = grid.cell_radius() / 4.0;
  for (std::size_t i = 0; i < pz.size(); ++i) {
    const Point a = pz.vertex(i);
    const Point b = pz.vertex(i + 1);
    const int n = std::max(1, static_cast<int>(std::ceil(distance(a, b) / step)));
    for (int s = 0; s < n; ++s) {
      const Point p = a + (static_cast<double>(s) / n) * (b - a);
      if (!grid.covers(p)) {
        throw Error(ErrorCode::OutOfGrid, "protected zone leaves the grid near (" + std::to_string(p.x) + ", " +
                                              std::to_string(p.y) + ")");
      }
    }
  }

  CellSet raw;
  for (const CellId& c : grid.cells()) {
    if (cell_intersects_polygon(grid, c, pz)) raw.insert(c);
  }
  if (raw.empty()) throw Error(ErrorCode::OutOfGrid, "protected zone does not intersect the grid");

  const auto parts = components(raw);
  if (parts.size() > 1) {
    const CellId home = grid.cell_of_position(pz.centroid());
    const CellSet* main = nullptr;
    for (const CellSet& part : parts) {
      if (part.contains(home)) main = &part;
    }
    if (main == nullptr) {
      main = &*std::max_element(parts.begin(), parts.end(),
                                [](const CellSet& a, const CellSet& b) { return a.size() < b.size(); });
    }
    raw = bridge(raw, *main);
  }
  return fill_holes(std::move(raw), grid);
}

double dist_polygon_to_cells(const Polygon& poly, const CellSet& cells, const HexGrid& grid) {
  double best = std::numeric_limits<double>::infinity();
  for (const CellId& cell : cells) {
    const auto k = grid.corners(cell);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point a = poly.vertex(i);
      const Point b = poly.vertex(i + 1);
      if (segment_touches_hex(grid, cell, a, b)) return 0.0;
      for (std::size_t j = 0; j < 6; ++j) {
        best = std::min(best, segment_segment_distance(a, b, k[j], k[(j + 1) % 6]));
      }
    }
  }
  return best;
}

std::vector<Point> region_outline(const CellSet& region, const HexGrid& grid) {
  using Key = std::pair<std::int64_t, std::int64_t>;
  auto key = [](Point p) -> Key {
    return {std::llround(p.x * 1e6), std::llround(p.y * 1e6)};
  };
  std::map<Key, std::pair<Point, Key>> next;  // edge start -> (start point, end key)
  for (const CellId& cell : region) {
    const auto k = grid.corners(cell);
    for (std::size_t i = 0; i < 6; ++i) {
      const CellId n{cell.q + kEdgeNeighbor[i].q, cell.r + kEdgeNeighbor[i].r};
      if (region.contains(n)) continue;
      const auto [it, fresh] = next.emplace(key(k[i]), std::make_pair(k[i], key(k[(i + 1) % 6])));
      if (!fresh) throw Error(ErrorCode::InvariantBreach, "cell region outline is not a simple ring");
    }
  }
  if (next.empty()) return {};
  std::vector<Point> ring;
  const Key first = next.begin()->first;
  Key at = first;
  do {
    const auto it = next.find(at);
    if (it == next.end()) throw Error(ErrorCode::InvariantBreach, "cell region outline is open");
    ring.push_back(it->second.first);
    at = it->second.second;
  } while (at != first && ring.size() <= next.size());
  if (ring.size() != next.size()) {
    throw Error(ErrorCode::InvariantBreach, "cell region outline has more than one ring");
  }
  return ring;
}

namespace {

bool op_clears_cells(const Polygon& op, const CellSet& c1, const HexGrid& grid) {
  for (const CellId& c : c1) {
    if (!point_in_polygon(grid.center(c), op) || point_on_boundary(grid.center(c), op)) return false;
  }
  return dist_polygon_to_cells(op, c1, grid) > kEpsilon;
}

}  // namespace

ZoneMap compile_zones(const Polygon& pz, const HexGrid& grid, const ZoneOptions& options) {
  if (!(options.op_scale >= 1.0)) throw Error(ErrorCode::ConfigError, "op_scale must be at least 1");
  if (options.outer_layers < 1) throw Error(ErrorCode::ConfigError, "outer layer count must be at least 1");

  CellSet cover = cover_cells(pz, grid);

  CellSet c1;
  for (const CellId& c : cover) {
    for (const CellId& n : neighbors(c)) {
      if (!cover.contains(n)) {
        c1.insert(c);
        break;
      }
    }
  }

  CellSet c0;
  for (const CellId& c : c1) {
    for (const CellId& n : neighbors(c)) {
      if (grid.contains(n) && !cover.contains(n)) c0.insert(n);
    }
  }
  if (c0.empty()) throw Error(ErrorCode::NoPerimeter, "protected zone covers the whole grid; no c0 layer");

  std::vector<CellSet> outer;
  CellSet visited = cover;
  visited.insert(c0.begin(), c0.end());
  const CellSet* previous = &c0;
  for (int k = 0; k < options.outer_layers; ++k) {
    CellSet layer;
    for (const CellId& c : *previous) {
      for (const CellId& n : neighbors(c)) {
        if (grid.contains(n) && !visited.contains(n)) layer.insert(n);
      }
    }
    visited.insert(layer.begin(), layer.end());
    outer.push_back(std::move(layer));
    previous = &outer.back();
  }

  std::vector<Point> sp = region_outline(cover, grid);

  if (options.op_from_sp) {
    Polygon op{sp};
    return ZoneMap{pz, std::move(cover), std::move(c1), std::move(c0), std::move(outer), std::move(sp),
                   std::move(op), options.op_scale, options.op_scale};
  }

  for (int step = 0;; ++step) {
    const double scale = options.op_scale + step * kOpScaleStep;
    Polygon op = scale_polygon(pz, scale);
    for (const Point& v : op.vertices()) {
      if (!grid.covers(v)) {
        throw Error(ErrorCode::OpOutOfGrid, "outbound perimeter cannot enclose c1 inside the grid (scale " +
                                                std::to_string(scale) + ")");
      }
    }
    if (op_clears_cells(op, c1, grid)) {
      return ZoneMap{pz, std::move(cover), std::move(c1), std::move(c0), std::move(outer), std::move(sp),
                     std::move(op), scale, options.op_scale};
    }
  }
}

}  // namespace tlta::geometry
