#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>

#include "tlta/tlta.h"

#ifndef TLTA_SCENARIO_DIR
#  error "TLTA_SCENARIO_DIR must point at the shipped scenarios"
#endif

namespace {

const std::string kJourney = std::string(TLTA_SCENARIO_DIR) + "/journey.scenario";

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto p = std::filesystem::temp_directory_path() / ("tlta-capi-" + name);
  std::ofstream(p) << contents;
  return p;
}

}  // namespace

TEST_CASE("load, run and inspect") {
  tlta_scenario* s = nullptr;
  REQUIRE(tlta_scenario_load(kJourney.c_str(), &s) == TLTA_OK);
  CHECK(std::string(tlta_scenario_name(s)) == "journey");
  CHECK(tlta_scenario_default_seed(s) == 42);
  CHECK(tlta_scenario_warning_count(s) == 0);
  CHECK(std::string(tlta_scenario_warning(s, 5)).empty());

  tlta_result* a = nullptr;
  tlta_result* b = nullptr;
  REQUIRE(tlta_run(s, 42, &a) == TLTA_OK);
  REQUIRE(tlta_run(s, 42, &b) == TLTA_OK);
  CHECK(std::string(tlta_result_log(a)) == tlta_result_log(b));
  const auto metrics = nlohmann::json::parse(tlta_result_metrics_json(a));
  CHECK(metrics.is_object());
  CHECK(std::string(tlta_result_summary(a)).find("journey") != std::string::npos);

  const auto log = temp_file("journey.jsonl", tlta_result_log(a));
  char* msg = nullptr;
  CHECK(tlta_verify_log(log.c_str(), &msg) == TLTA_OK);
  CHECK(msg == nullptr);

  char* zone = nullptr;
  REQUIRE(tlta_compile_zone_scenario(s, &zone) == TLTA_OK);
  CHECK(nlohmann::json::parse(zone)["counts"]["cover"] == 11);
  tlta_string_free(zone);

  tlta_result_free(a);
  tlta_result_free(b);
  tlta_scenario_free(s);
  std::filesystem::remove(log);
}

TEST_CASE("errors map to status codes") {
  tlta_scenario* s = nullptr;
  CHECK(tlta_scenario_load("/nonexistent.scenario", &s) == TLTA_ERR_CONFIG);
  CHECK(s == nullptr);
  CHECK(std::string(tlta_last_error()).find("nonexistent") != std::string::npos);
  CHECK(tlta_scenario_from_string("schema_version: 1\n", &s) == TLTA_ERR_CONFIG);
  CHECK(tlta_scenario_load(nullptr, &s) == TLTA_ERR_INVALID_ARGUMENT);
  CHECK(tlta_run(nullptr, 1, nullptr) == TLTA_ERR_INVALID_ARGUMENT);

  const double two[] = {0, 0, 1, 1};
  char* zone = nullptr;
  CHECK(tlta_compile_zone_polygon(two, 2, 100, 5, 1.3, 1, &zone) == TLTA_ERR_GEOMETRY);
  CHECK(zone == nullptr);

  const double sq[] = {-20, -20, 20, -20, 20, 20, -20, 20};
  REQUIRE(tlta_compile_zone_polygon(sq, 4, 100, 5, 1.0, 1, &zone) == TLTA_OK);
  const auto doc = nlohmann::json::parse(zone);
  CHECK(doc["counts"]["cover"] == 1);
  CHECK(doc["counts"]["c0"] == 6);
  CHECK(doc["op_scale"].get<double>() > 1.0);
  tlta_string_free(zone);
  CHECK(std::string(tlta_last_error()).empty());
}

TEST_CASE("log verification statuses") {
  tlta_scenario* s = nullptr;
  REQUIRE(tlta_scenario_load(kJourney.c_str(), &s) == TLTA_OK);
  tlta_result* r = nullptr;
  REQUIRE(tlta_run(s, 1, &r) == TLTA_OK);
  std::string log = tlta_result_log(r);
  tlta_result_free(r);
  tlta_scenario_free(s);

  char* msg = nullptr;
  const auto cut = temp_file("cut.jsonl", log.substr(0, log.size() / 2));
  CHECK(tlta_verify_log(cut.c_str(), &msg) == TLTA_ERR_TRUNCATED);
  tlta_string_free(msg);

  const auto at = log.find("\"kind\":\"deliver\"");
  REQUIRE(at != std::string::npos);
  const auto start = log.rfind('\n', at) + 1;
  log.erase(start, log.find('\n', at) + 1 - start);
  const auto broken = temp_file("broken.jsonl", log);
  CHECK(tlta_verify_log(broken.c_str(), &msg) == TLTA_ERR_INVARIANT);
  REQUIRE(msg != nullptr);
  CHECK(std::string(msg).find("conservation") != std::string::npos);
  tlta_string_free(msg);

  CHECK(tlta_verify_log("/nonexistent.jsonl", nullptr) == TLTA_ERR_IO);
  std::filesystem::remove(cut);
  std::filesystem::remove(broken);
}

TEST_CASE("version") { CHECK(std::string(tlta_version()).size() > 0); }
