#include "tlta/tlta.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "tlta/error.hpp"
#include "tlta/log_verify.hpp"
#include "tlta/scenario.hpp"
#include "tlta/sim.hpp"

struct tlta_scenario {
  tlta::scenario::ResolvedScenario resolved;
};

struct tlta_result {
  std::string log;
  std::string metrics;
  std::string summary;
};

namespace {

thread_local std::string g_last_error;

tlta_status fail(tlta_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

tlta_status status_of(tlta::ErrorCode code) {
  using tlta::ErrorCode;
  switch (code) {
    case ErrorCode::InvalidPolygon:
    case ErrorCode::OutOfGrid:
    case ErrorCode::OpOutOfGrid:
    case ErrorCode::NoPerimeter: return TLTA_ERR_GEOMETRY;
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidManifest:
    case ErrorCode::UnknownFunction:
    case ErrorCode::AlreadyIssued: return TLTA_ERR_CONFIG;
    case ErrorCode::Io: return TLTA_ERR_IO;
    default: return TLTA_ERR_INVARIANT;
  }
}

template <class F>
tlta_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return TLTA_OK;
  } catch (const tlta::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TLTA_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TLTA_ERR_INTERNAL, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

tlta_status load_from(tlta::scenario::ScenarioConfig config, tlta_scenario** out) {
  auto resolved = tlta::scenario::resolve(config);
  *out = new tlta_scenario{std::move(resolved)};
  return TLTA_OK;
}

}  // namespace

extern "C" {

const char* tlta_last_error(void) { return g_last_error.c_str(); }

const char* tlta_version(void) { return "1.0.0"; }

tlta_status tlta_scenario_load(const char* path, tlta_scenario** out) {
  if (path == nullptr || out == nullptr) return fail(TLTA_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { load_from(tlta::scenario::load_scenario(path), out); });
}

tlta_status tlta_scenario_from_string(const char* yaml, tlta_scenario** out) {
  if (yaml == nullptr || out == nullptr) return fail(TLTA_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] { load_from(tlta::scenario::parse_scenario(yaml), out); });
}

void tlta_scenario_free(tlta_scenario* scenario) { delete scenario; }

uint64_t tlta_scenario_default_seed(const tlta_scenario* scenario) {
  return scenario == nullptr ? 0 : scenario->resolved.config.seed;
}

const char* tlta_scenario_name(const tlta_scenario* scenario) {
  return scenario == nullptr ? "" : scenario->resolved.config.name.c_str();
}

size_t tlta_scenario_warning_count(const tlta_scenario* scenario) {
  return scenario == nullptr ? 0 : scenario->resolved.warnings.size();
}

const char* tlta_scenario_warning(const tlta_scenario* scenario, size_t index) {
  if (scenario == nullptr || index >= scenario->resolved.warnings.size()) return "";
  return scenario->resolved.warnings[index].c_str();
}

tlta_status tlta_run(const tlta_scenario* scenario, uint64_t seed, tlta_result** out) {
  if (scenario == nullptr || out == nullptr) return fail(TLTA_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    tlta::sim::RunResult r = tlta::sim::run_scenario(scenario->resolved, seed);
    *out = new tlta_result{std::move(r.log), r.metrics.to_json().dump(2) + "\n", std::move(r.summary)};
  });
}

const char* tlta_result_log(const tlta_result* result) { return result == nullptr ? "" : result->log.c_str(); }

const char* tlta_result_metrics_json(const tlta_result* result) {
  return result == nullptr ? "" : result->metrics.c_str();
}

const char* tlta_result_summary(const tlta_result* result) {
  return result == nullptr ? "" : result->summary.c_str();
}

void tlta_result_free(tlta_result* result) { delete result; }

tlta_status tlta_compile_zone_scenario(const tlta_scenario* scenario, char** zone_json) {
  if (scenario == nullptr || zone_json == nullptr) return fail(TLTA_ERR_INVALID_ARGUMENT, "null argument");
  *zone_json = nullptr;
  return guarded([&] {
    const auto& r = scenario->resolved;
    const auto zone = tlta::geometry::compile_zones(
        r.request.pz, r.grid,
        tlta::geometry::ZoneOptions{r.request.op_scale, r.request.outer_layers, r.request.op_from_sp});
    *zone_json = dup_string(tlta::sim::zone_to_json(zone).dump(2));
  });
}

tlta_status tlta_compile_zone_polygon(const double* xy, size_t n_vertices, double cell_radius, int extent,
                                      double op_scale, int outer_layers, char** zone_json) {
  if (xy == nullptr || zone_json == nullptr) return fail(TLTA_ERR_INVALID_ARGUMENT, "null argument");
  *zone_json = nullptr;
  return guarded([&] {
    std::vector<tlta::geometry::Point> pts;
    for (size_t i = 0; i < n_vertices; ++i) pts.push_back({xy[2 * i], xy[2 * i + 1]});
    const tlta::geometry::Polygon pz(std::move(pts));
    const tlta::geometry::HexGrid grid(cell_radius, extent);
    const auto zone = tlta::geometry::compile_zones(pz, grid, tlta::geometry::ZoneOptions{op_scale, outer_layers, false});
    *zone_json = dup_string(tlta::sim::zone_to_json(zone).dump(2));
  });
}

void tlta_string_free(char* s) { std::free(s); }

tlta_status tlta_verify_log(const char* path, char** message) {
  if (path == nullptr) return fail(TLTA_ERR_INVALID_ARGUMENT, "null argument");
  if (message != nullptr) *message = nullptr;
  g_last_error.clear();
  std::ifstream in(path);
  if (!in) return fail(TLTA_ERR_IO, std::string("cannot read log '") + path + "'");
  tlta::logcheck::VerifyResult r;
  try {
    r = tlta::logcheck::verify_log(in);
  } catch (const std::exception& e) {
    return fail(TLTA_ERR_INTERNAL, e.what());
  }
  if (r.status == tlta::logcheck::VerifyStatus::Ok) return TLTA_OK;
  if (message != nullptr) *message = dup_string(r.message);
  return fail(r.status == tlta::logcheck::VerifyStatus::Truncated ? TLTA_ERR_TRUNCATED : TLTA_ERR_INVARIANT,
              r.message);
}

}  // extern "C"
