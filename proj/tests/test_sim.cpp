#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <sstream>

#include "scenarios.hpp"
#include "tlta/sim.hpp"

using namespace tlta;
using namespace tlta::sim;
using geometry::Point;
using JsonRec = nlohmann::json;

namespace {

std::vector<JsonRec> records(const std::string& log, const std::string& kind) {
  std::vector<JsonRec> out;
  std::istringstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    JsonRec j = JsonRec::parse(line);
    if (j["kind"] == kind) out.push_back(std::move(j));
  }
  return out;
}

const std::vector<scenario::Waypoint> kTrace{{0.0, {0, 0}}, {10.0, {100, 0}}, {20.0, {100, 50}}};

}  // namespace

TEST_CASE("position interpolation") {
  for (const auto& w : kTrace) {
    const Point p = position_at(kTrace, w.t);
    CHECK(p.x == w.p.x);
    CHECK(p.y == w.p.y);
  }
  CHECK(position_at(kTrace, 5.0).x == doctest::Approx(50.0));
  CHECK(position_at(kTrace, 15.0).y == doctest::Approx(25.0));
  CHECK(position_at(kTrace, -3.0).x == 0.0);
  CHECK(position_at(kTrace, 99.0).y == 50.0);

  // Never faster than the fastest leg.
  double prev_t = 0.0;
  Point prev = position_at(kTrace, 0.0);
  for (double t = 0.01; t <= 20.0; t += 0.01) {
    const Point p = position_at(kTrace, t);
    CHECK(geometry::distance(p, prev) <= 10.0 * (t - prev_t) + 1e-9);
    prev = p;
    prev_t = t;
  }
}

TEST_CASE("gps noise") {
  std::mt19937_64 rng(3);
  const Point exact = gps_fix({12, -7}, 0.0, rng);
  CHECK(exact.x == 12.0);
  CHECK(exact.y == -7.0);

  double sx = 0, sxx = 0, sy = 0, syy = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const Point p = gps_fix({0, 0}, 5.0, rng);
    sx += p.x;
    sxx += p.x * p.x;
    sy += p.y;
    syy += p.y * p.y;
  }
  const double std_x = std::sqrt(sxx / n - (sx / n) * (sx / n));
  const double std_y = std::sqrt(syy / n - (sy / n) * (sy / n));
  CHECK(std_x > 4.5);
  CHECK(std_x < 5.5);
  CHECK(std_y > 4.5);
  CHECK(std_y < 5.5);
}

TEST_CASE("message drops and latency") {
  const auto msg = protocol::make_message("a", "b", protocol::Deregister{"a"});
  std::mt19937_64 lrng(1), drng(2);
  const LatencyModel latency{from_seconds(0.01), from_seconds(0.05)};

  DropModel tenth(0.1, {});
  int dropped = 0;
  for (int i = 0; i < 10000; ++i) {
    const Delivery d = deliver(msg, latency, tenth, lrng, drng);
    if (d.dropped) {
      ++dropped;
    } else {
      CHECK(d.at >= latency.min);
      CHECK(d.at <= latency.max);
    }
  }
  CHECK(dropped / 10000.0 == doctest::Approx(0.1).epsilon(0.2));

  DropModel all(1.0, {});
  for (int i = 0; i < 100; ++i) CHECK(deliver(msg, latency, all, lrng, drng).dropped);

  DropModel none(0.0, {});
  const LatencyModel instant{};
  const Delivery d = deliver(msg, instant, none, lrng, drng);
  CHECK_FALSE(d.dropped);
  CHECK(d.at == SimTime{0});

  // A capped per-kind rule drops exactly that many.
  DropModel capped(0.0, {{"Deregister", 1.0, 3}});
  int n = 0;
  for (int i = 0; i < 10; ++i) n += deliver(msg, latency, capped, lrng, drng).dropped;
  CHECK(n == 3);
}

TEST_CASE("handover detection") {
  const geometry::HexGrid grid(100.0, 6);
  const geometry::ZoneMap zone =
      geometry::compile_zones(geometry::Polygon({{-20, -20}, {20, -20}, {20, 20}, {-20, 20}}), grid, {1.3, 1, false});

  // Straight walk east across one edge: exactly one trigger.
  geometry::CellId serving{2, 0};
  int triggers = 0;
  for (double x = grid.center({2, 0}).x; x <= grid.center({3, 0}).x; x += 0.5) {
    if (auto t = detect_handover(grid, zone, serving, {x, 0.0})) {
      ++triggers;
      CHECK(t->source == geometry::CellId{2, 0});
      CHECK(t->target == geometry::CellId{3, 0});
      CHECK_FALSE(t->sp_crossing);
      serving = t->target;
    }
  }
  CHECK(triggers == 1);

  // Moving inside one cell never triggers.
  for (double a = 0; a < 6.3; a += 0.1) {
    const Point c = grid.center({2, 0});
    CHECK_FALSE(detect_handover(grid, zone, {2, 0}, {c.x + 40 * std::cos(a), c.y + 40 * std::sin(a)}).has_value());
  }

  // Entering the covered cell from c0 is an sp crossing.
  const auto in = detect_handover(grid, zone, {1, 0}, {0, 0});
  REQUIRE(in.has_value());
  CHECK(in->sp_crossing);
}

TEST_CASE("substreams are independent") {
  auto a1 = substream(7, "gps");
  auto a2 = substream(7, "gps");
  auto b = substream(7, "latency");
  auto c = substream(8, "gps");
  const auto x = a1();
  CHECK(x == a2());
  CHECK(x != b());
  CHECK(x != c());
}

TEST_CASE("runs are a pure function of scenario and seed") {
  const auto s = shipped::load("journey");
  const RunResult a = run_scenario(s, 42);
  const RunResult b = run_scenario(s, 42);
  CHECK(a.log == b.log);
  CHECK(a.metrics.to_json() == b.metrics.to_json());
  CHECK(a.summary == b.summary);

  const RunResult other = run_scenario(s, 43);
  CHECK(other.log != a.log);
  CHECK(other.phase_history == a.phase_history);
}

TEST_CASE("spoofed fixes carry the offset") {
  const auto s = shipped::load("gps_spoof");
  REQUIRE(s.config.attacks.size() == 1);
  const auto& attack = s.config.attacks[0];
  const RunResult r = run_scenario(s, s.config.seed);
  double dx = 0, dy = 0;
  int n = 0;
  for (const JsonRec& f : records(r.log, "fix")) {
    const double t = f["t"].get<double>() / 1e6;
    if (t < attack.start + 0.5 || t > attack.end - 0.5) continue;
    dx += f["detail"]["fix"][0].get<double>() - f["detail"]["true"][0].get<double>();
    dy += f["detail"]["fix"][1].get<double>() - f["detail"]["true"][1].get<double>();
    ++n;
  }
  REQUIRE(n >= 10);
  const double tol = 4.0 * s.config.engine.gps_sigma / std::sqrt(n);
  CHECK(std::abs(dx / n - attack.offset.x) < tol);
  CHECK(std::abs(dy / n - attack.offset.y) < tol);
  CHECK(r.metrics.violation_count("FunctionalEnforcement") >= 1);
}

TEST_CASE("suppressed handovers are logged") {
  const auto s = shipped::load("handover_suppression");
  const RunResult r = run_scenario(s, s.config.seed);
  CHECK_FALSE(records(r.log, "ho_suppressed").empty());
  CHECK(r.metrics.handovers_suppressed >= 1);
  CHECK(r.metrics.registrations == 0);
}

TEST_CASE("zone document") {
  const auto s = shipped::load("journey");
  const RunResult r = run_scenario(s, 1);
  const auto doc = zone_to_json(r.zone);
  CHECK(doc.dump() == zone_to_json(r.zone).dump());
  CHECK(doc.contains("op_scale"));
}
