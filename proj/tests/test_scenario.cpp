#include <doctest.h>

#include <fstream>
#include <sstream>

#include "scenarios.hpp"
#include "tlta/error.hpp"

using namespace tlta;
using namespace tlta::scenario;

namespace {

std::string text_of(const std::string& name) {
  std::ifstream in(shipped::path(name));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Message of the ConfigError raised by resolving `text`.
std::string config_error(const std::string& text) {
  try {
    resolve(parse_scenario(text));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    return e.what();
  }
  FAIL("scenario accepted");
  return {};
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("every shipped scenario round-trips") {
  for (const char* name : shipped::kAll) {
    CAPTURE(name);
    const ScenarioConfig c = load_scenario(shipped::path(name));
    CHECK(c.name == name);
    CHECK(parse_scenario(write_scenario(c)) == c);
    const ResolvedScenario r = resolve(c);
    CHECK(r.warnings.empty());
  }
}

TEST_CASE("errors name the offending field") {
  const std::string base = text_of("journey");
  CHECK(config_error(replace(base, "pz: [[-200, -120], [200, -120], [200, 120], [-200, 120]]", "pz: [[0, 0], [1, 1]]"))
            .find("service.pz") != std::string::npos);
  CHECK(config_error(replace(base, "debounce_k: 2", "debounce_k: 0")).find("engine.debounce_k") != std::string::npos);
  CHECK(config_error(replace(base, "camera: Disable", "camera: Sometimes")).find("service.p_pz") != std::string::npos);
  CHECK(config_error(replace(base, "schema_version: 1", "schema_version: 9")).find("schema_version") !=
        std::string::npos);
  CHECK(config_error(replace(base, "- [25.5, 200, 0]", "- [-1.0, 200, 0]")).find("mts[0].trace[1]") !=
        std::string::npos);
  CHECK(config_error(replace(base, "service: exhibit-content}\n      - {t: 42.0",
                             "service: nothing}\n      - {t: 42.0"))
            .find("mts[0].uses[0].service") != std::string::npos);
  CHECK(config_error(replace(base, "digest: sha256", "digest: md5")).find("digest") != std::string::npos);
  CHECK(config_error(base + "attacks:\n  - {kind: GpsSpoof, target: nobody}\n").find("attacks[0].target") !=
        std::string::npos);
  CHECK(config_error(base + "attacks:\n  - {kind: Teleport, target: visitor}\n").find("Teleport") !=
        std::string::npos);
  CHECK(config_error("not: [valid").find("YAML") != std::string::npos);
  CHECK_THROWS_AS(load_scenario("/nonexistent/x.scenario"), Error);
}

TEST_CASE("fleets expand into staggered terminals") {
  const ResolvedScenario r = shipped::load("bottleneck");
  REQUIRE(r.config.fleets.size() == 1);
  const FleetSpec& f = r.config.fleets[0];
  CHECK(r.mts.size() == r.config.mts.size() + static_cast<std::size_t>(f.count));
  const MtSpec& first = r.mts[r.config.mts.size()];
  const MtSpec& third = r.mts[r.config.mts.size() + 2];
  CHECK(first.id == f.prefix + "1");
  CHECK(third.id == f.prefix + "3");
  CHECK(third.trace[0].t == doctest::Approx(f.routes[2 % f.routes.size()][0].t + 2 * f.stagger));
}

TEST_CASE("off-grid waypoints are clipped with a warning") {
  std::string text = replace(text_of("journey"), "- [55.5, -840, 0]", "- [55.5, -5000, 0]");
  const ResolvedScenario r = resolve(parse_scenario(text));
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].find("mts[0].trace[7]") != std::string::npos);
  CHECK(r.grid.covers(r.mts[0].trace[7].p));
}
