#pragma once
// Brute-force reference implementations, written independently of the
// library code they check.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "tlta/geometry.hpp"

namespace oracle {

using tlta::geometry::CellId;
using tlta::geometry::HexGrid;
using tlta::geometry::Point;

inline double shoelace(const std::vector<Point>& ring) {
  double s = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % ring.size()];
    s += a.x * b.y - b.x * a.y;
  }
  return std::abs(s) / 2.0;
}

inline double seg_dist(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 == 0.0 ? 0.0 : ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Winding number, boundary counted as inside.
inline bool winding_inside(Point p, const std::vector<Point>& ring, double eps = 1e-9) {
  int wn = 0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point a = ring[i];
    const Point b = ring[(i + 1) % ring.size()];
    if (seg_dist(p, a, b) <= eps) return true;
    const double side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
    if (a.y <= p.y) {
      if (b.y > p.y && side > 0) ++wn;
    } else if (b.y <= p.y && side < 0) {
      --wn;
    }
  }
  return wn != 0;
}

// Pointy-top hex centre, axial coordinates.
inline Point centre(double radius, CellId c) {
  return {radius * std::sqrt(3.0) * (c.q + c.r / 2.0), radius * 1.5 * c.r};
}

inline std::vector<Point> hex(double radius, CellId c) {
  const Point o = centre(radius, c);
  std::vector<Point> out;
  for (int i = 0; i < 6; ++i) {
    const double a = M_PI / 180.0 * (60.0 * i + 30.0);
    out.push_back({o.x + radius * std::cos(a), o.y + radius * std::sin(a)});
  }
  return out;
}

inline int axial_distance(CellId a, CellId b) {
  const int dq = a.q - b.q, dr = a.r - b.r;
  return (std::abs(dq) + std::abs(dr) + std::abs(dq + dr)) / 2;
}

inline std::vector<CellId> all_cells(int extent) {
  std::vector<CellId> out;
  for (int q = -extent; q <= extent; ++q)
    for (int r = -extent; r <= extent; ++r)
      if (axial_distance({q, r}, {0, 0}) <= extent) out.push_back({q, r});
  return out;
}

// Cell whose centre is nearest to p.
inline CellId nearest_centre(double radius, int extent, Point p) {
  CellId best{};
  double d = std::numeric_limits<double>::infinity();
  for (CellId c : all_cells(extent)) {
    const Point o = centre(radius, c);
    const double e = std::hypot(p.x - o.x, p.y - o.y);
    if (e < d) {
      d = e;
      best = c;
    }
  }
  return best;
}

// Sutherland-Hodgman: subject polygon clipped by a convex CCW window.
inline std::vector<Point> clip(std::vector<Point> subject, const std::vector<Point>& window) {
  for (std::size_t i = 0; i < window.size() && !subject.empty(); ++i) {
    const Point a = window[i];
    const Point b = window[(i + 1) % window.size()];
    auto inside = [&](Point p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x) >= 0; };
    auto cut = [&](Point p, Point q) {
      const double d1 = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
      const double d2 = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
      const double t = d1 / (d1 - d2);
      return Point{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)};
    };
    std::vector<Point> out;
    for (std::size_t j = 0; j < subject.size(); ++j) {
      const Point p = subject[j];
      const Point q = subject[(j + 1) % subject.size()];
      if (inside(q)) {
        if (!inside(p)) out.push_back(cut(p, q));
        out.push_back(q);
      } else if (inside(p)) {
        out.push_back(cut(p, q));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

struct Layers {
  std::set<CellId> cover, c1, c0, cm1;
};

inline const CellId kDirs[6] = {{1, 0}, {1, -1}, {0, -1}, {-1, 0}, {-1, 1}, {0, 1}};

// Cells whose hex overlaps the polygon with positive area, hole-filled,
// then peeled into layers by BFS distance from the cover.
inline Layers zones(const std::vector<Point>& poly, double radius, int extent) {
  Layers out;
  std::set<CellId> grid;
  for (CellId c : all_cells(extent)) grid.insert(c);
  for (CellId c : grid)
    if (shoelace(clip(poly, hex(radius, c))) > 1e-6) out.cover.insert(c);

  // Flood from the ring just outside the grid; unreached non-cover cells are holes.
  std::set<CellId> seen;
  std::deque<CellId> queue;
  for (CellId c : all_cells(extent + 1))
    if (!grid.contains(c)) {
      seen.insert(c);
      queue.push_back(c);
    }
  while (!queue.empty()) {
    const CellId c = queue.front();
    queue.pop_front();
    for (CellId d : kDirs) {
      const CellId n{c.q + d.q, c.r + d.r};
      if (grid.contains(n) && !out.cover.contains(n) && seen.insert(n).second) queue.push_back(n);
    }
  }
  for (CellId c : grid)
    if (!seen.contains(c)) out.cover.insert(c);

  std::map<CellId, int> dist;
  for (CellId c : out.cover) {
    dist[c] = 0;
    queue.push_back(c);
  }
  while (!queue.empty()) {
    const CellId c = queue.front();
    queue.pop_front();
    for (CellId d : kDirs) {
      const CellId n{c.q + d.q, c.r + d.r};
      if (grid.contains(n) && !dist.contains(n)) {
        dist[n] = dist[c] + 1;
        queue.push_back(n);
      }
    }
  }
  for (const auto& [c, d] : dist) {
    if (d == 1) out.c0.insert(c);
    if (d == 2) out.cm1.insert(c);
  }
  for (CellId c : out.cover)
    for (CellId d : kDirs)
      if (!out.cover.contains({c.q + d.q, c.r + d.r})) {
        out.c1.insert(c);
        break;
      }
  return out;
}

// Star-shaped simple polygon around `centre` with radii in [rmin, rmax].
inline std::vector<Point> random_star(std::mt19937_64& rng, Point centre, double rmin, double rmax,
                                      int min_vertices = 3) {
  std::uniform_int_distribution<int> count(min_vertices, 12);
  std::uniform_real_distribution<double> radius(rmin, rmax);
  std::uniform_real_distribution<double> jitter(0.1, 0.9);
  const int n = count(rng);
  std::vector<Point> out;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * (i + jitter(rng)) / n;
    const double r = radius(rng);
    out.push_back({centre.x + r * std::cos(a), centre.y + r * std::sin(a)});
  }
  return out;
}

}  // namespace oracle
