#pragma once

#include <cstdint>
#include <istream>
#include <string>

namespace tlta::logcheck {

enum class VerifyStatus { Ok, Truncated, Violation };

struct VerifyResult {
  VerifyStatus status = VerifyStatus::Ok;
  std::string message;  // first problem found; empty when Ok
  std::uint64_t lines = 0;
};

/// Replays an event log and checks ordering, message conservation,
/// registration-requires-attestation, phase legality and phase/policy
/// coupling. A log without its closing "end" record is Truncated.
VerifyResult verify_log(std::istream& in);
VerifyResult verify_log_text(const std::string& text);

}  // namespace tlta::logcheck
