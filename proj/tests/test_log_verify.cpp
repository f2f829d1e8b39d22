#include <doctest.h>

#include <sstream>

#include "scenarios.hpp"
#include "tlta/log_verify.hpp"
#include "tlta/sim.hpp"

using namespace tlta;
using namespace tlta::logcheck;

namespace {

std::vector<std::string> lines_of(const std::string& log) {
  std::vector<std::string> out;
  std::istringstream in(log);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::size_t find_line(const std::vector<std::string>& lines, const std::string& needle) {
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (lines[i].find(needle) != std::string::npos) return i;
  FAIL("line not found: " << needle);
  return 0;
}

const std::string& journey_log() {
  static const std::string log = sim::run_scenario(shipped::load("journey"), 42).log;
  return log;
}

}  // namespace

TEST_CASE("honest logs verify") {
  const VerifyResult r = verify_log_text(journey_log());
  CHECK(r.status == VerifyStatus::Ok);
  CHECK(r.message.empty());
  CHECK(r.lines == lines_of(journey_log()).size());
}

TEST_CASE("a deleted delivery breaks conservation") {
  auto lines = lines_of(journey_log());
  lines.erase(lines.begin() + static_cast<long>(find_line(lines, "\"kind\":\"deliver\"")));
  const VerifyResult r = verify_log_text(join(lines));
  CHECK(r.status == VerifyStatus::Violation);
  CHECK(r.message.find("conservation") != std::string::npos);
}

TEST_CASE("swapped lines break causality") {
  auto lines = lines_of(journey_log());
  const std::size_t i = find_line(lines, "\"kind\":\"register\"");
  std::swap(lines[i], lines[i + 1]);
  const VerifyResult r = verify_log_text(join(lines));
  CHECK(r.status == VerifyStatus::Violation);
  CHECK(r.message.find("causality") != std::string::npos);
}

TEST_CASE("registration without a verdict is caught") {
  auto lines = lines_of(journey_log());
  const std::size_t i = find_line(lines, "\"verdict\":\"Accept\"");
  const auto at = lines[i].find("\"verdict\":\"Accept\"");
  lines[i].replace(at, 18, "\"verdict\":\"Reject(Forged)\"");
  const VerifyResult r = verify_log_text(join(lines));
  CHECK(r.status == VerifyStatus::Violation);
  CHECK(r.message.find("registration without accepted attestation") != std::string::npos);
}

TEST_CASE("a policy that disagrees with the phase is caught") {
  auto lines = lines_of(journey_log());
  const std::size_t i = find_line(lines, "\"policy\":\"P_pz\"");
  lines[i].replace(lines[i].find("\"policy\":\"P_pz\""), 15, "\"policy\":\"P_sp\"");
  const VerifyResult r = verify_log_text(join(lines));
  CHECK(r.status == VerifyStatus::Violation);
  CHECK(r.message.find("coupling") != std::string::npos);
}

TEST_CASE("incomplete logs are truncated") {
  auto lines = lines_of(journey_log());
  lines.pop_back();
  CHECK(verify_log_text(join(lines)).status == VerifyStatus::Truncated);

  auto cut = journey_log();
  cut.resize(cut.size() / 2);
  CHECK(verify_log_text(cut).status == VerifyStatus::Truncated);
  CHECK(verify_log_text("").status == VerifyStatus::Truncated);
}

TEST_CASE("every shipped scenario verifies") {
  for (const char* name : shipped::kAll) {
    CAPTURE(name);
    const auto s = shipped::load(name);
    const VerifyResult r = verify_log_text(sim::run_scenario(s, s.config.seed).log);
    CHECK(r.status == VerifyStatus::Ok);
    CHECK(r.message == "");
  }
}
