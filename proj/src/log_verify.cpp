#include "tlta/log_verify.hpp"

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "tlta/device.hpp"

namespace tlta::logcheck {

namespace {

using Json = nlohmann::ordered_json;
using device::DevicePhase;

std::string expected_policy(DevicePhase phase) {
  switch (phase) {
    case DevicePhase::LteActiveSp:
    case DevicePhase::Deregistering: return "P_sp";
    case DevicePhase::EnforcingPz: return "P_pz";
    default: return "default";
  }
}

struct DeviceTrack {
  DevicePhase phase = DevicePhase::Normal;
  std::string policy = "default";
};

class Checker {
public:
  // Returns an error message for the first violation on this line.
  std::optional<std::string> line(const Json& rec, std::uint64_t n);
  std::optional<std::string> finish();

private:
  std::optional<std::string> close_event();

  std::optional<std::tuple<std::int64_t, std::uint64_t, std::uint64_t>> last_;
  std::map<std::uint64_t, std::string> open_sends_;  // id -> kind
  std::set<std::uint64_t> closed_;
  std::uint64_t sent_ = 0;
  std::uint64_t delivered_ = 0;
  std::uint64_t dropped_ = 0;
  // transaction -> eNB that recorded the nonce
  std::map<std::string, std::string> nonces_;
  std::set<std::string> accepted_;
  // (mt, transaction) pairs whose HoAck reached the MT
  std::set<std::pair<std::string, std::string>> ho_acked_;
  std::map<std::string, DeviceTrack> devices_;
  std::set<std::string> touched_;
};

std::optional<std::string> Checker::close_event() {
  for (const std::string& mt : touched_) {
    const DeviceTrack& d = devices_[mt];
    if (d.policy != expected_policy(d.phase)) {
      return "phase/policy coupling: " + mt + " is " + std::string(device::to_string(d.phase)) + " but enforces " +
             d.policy;
    }
  }
  touched_.clear();
  return std::nullopt;
}

std::optional<std::string> Checker::line(const Json& rec, std::uint64_t n) {
  const auto key = std::make_tuple(rec.at("t").get<std::int64_t>(), rec.at("seq").get<std::uint64_t>(),
                                   rec.at("sub").get<std::uint64_t>());
  if (last_ && !(*last_ < key)) {
    return "causality: line " + std::to_string(n) + " does not follow its predecessor in (t, seq, sub) order";
  }
  if (last_ && (std::get<0>(*last_) != std::get<0>(key) || std::get<1>(*last_) != std::get<1>(key))) {
    if (auto err = close_event()) return err;
  }
  last_ = key;

  const std::string kind = rec.at("kind").get<std::string>();
  const std::string entity = rec.at("entity").get<std::string>();
  const Json& d = rec.at("detail");
  const std::string where = " (line " + std::to_string(n) + ")";

  if (kind == "send") {
    const auto id = d.at("id").get<std::uint64_t>();
    if (open_sends_.contains(id) || closed_.contains(id)) return "conservation: message " + std::to_string(id) + " sent twice" + where;
    open_sends_[id] = d.at("kind").get<std::string>();
    ++sent_;
    const Json& body = d.at("body");
    if (d.at("kind") == "AttestationSubmit") {
      const std::string tx = body.at("transaction").get<std::string>();
      if (!ho_acked_.contains({entity, tx})) {
        return "ordering: AttestationSubmit for " + tx + " sent before its HoAck reached " + entity + where;
      }
    }
  } else if (kind == "deliver" || kind == "drop") {
    const auto id = d.at("id").get<std::uint64_t>();
    const auto it = open_sends_.find(id);
    if (it == open_sends_.end()) {
      return "conservation: " + kind + " of message " + std::to_string(id) + " without a matching open send" + where;
    }
    open_sends_.erase(it);
    closed_.insert(id);
    if (kind == "deliver") {
      ++delivered_;
      if (d.at("kind") == "HoAck" && d.contains("transaction")) {
        ho_acked_.insert({d.at("dst").get<std::string>(), d.at("transaction").get<std::string>()});
      }
    } else {
      ++dropped_;
    }
  } else if (kind == "nonce") {
    nonces_[d.at("transaction").get<std::string>()] = entity;
  } else if (kind == "verify") {
    if (d.at("verdict") == "Accept") {
      const std::string tx = d.at("transaction").get<std::string>();
      if (!nonces_.contains(tx)) return "attestation: Accept for " + tx + " without an issued nonce" + where;
      accepted_.insert(tx);
    }
  } else if (kind == "register") {
    const std::string tx = d.at("transaction").get<std::string>();
    const std::string issuer = d.at("nonce_issuer").get<std::string>();
    if (!accepted_.contains(tx)) return "registration without accepted attestation for " + tx + where;
    const auto it = nonces_.find(tx);
    if (it == nonces_.end() || it->second != issuer) {
      return "registration for " + tx + " names nonce issuer " + issuer + " that issued no nonce for it" + where;
    }
  } else if (kind == "phase") {
    DeviceTrack& dev = devices_[entity];
    const auto from = device::phase_from_string(d.at("from").get<std::string>());
    const auto to = device::phase_from_string(d.at("to").get<std::string>());
    if (!from || !to) return "phase: unknown phase name" + where;
    if (*from != dev.phase) {
      return "phase: " + entity + " leaves " + std::string(device::to_string(*from)) + " but was " +
             std::string(device::to_string(dev.phase)) + where;
    }
    if (!device::transition_legal(*from, *to)) {
      return "phase: illegal transition " + std::string(device::to_string(*from)) + " -> " +
             std::string(device::to_string(*to)) + " for " + entity + where;
    }
    dev.phase = *to;
    touched_.insert(entity);
  } else if (kind == "policy") {
    devices_[entity].policy = d.at("policy").get<std::string>();
    touched_.insert(entity);
  } else if (kind == "end") {
    if (auto err = close_event()) return err;
    if (d.at("sent").get<std::uint64_t>() != sent_ || d.at("delivered").get<std::uint64_t>() != delivered_ ||
        d.at("dropped").get<std::uint64_t>() != dropped_) {
      return "conservation: end record counts disagree with the log" + where;
    }
  }
  return std::nullopt;
}

std::optional<std::string> Checker::finish() {
  if (!open_sends_.empty()) {
    const auto& [id, kind] = *open_sends_.begin();
    return "conservation: " + kind + " message " + std::to_string(id) + " was sent but never delivered or dropped (" +
           std::to_string(open_sends_.size()) + " open)";
  }
  return std::nullopt;
}

}  // namespace

VerifyResult verify_log(std::istream& in) {
  VerifyResult result;
  std::vector<Json> records;
  std::string text;
  while (std::getline(in, text)) {
    ++result.lines;
    if (text.empty()) continue;
    try {
      Json rec = Json::parse(text);
      if (!rec.is_object() || !rec.contains("t") || !rec.contains("seq") || !rec.contains("sub") ||
          !rec.contains("kind") || !rec.contains("entity") || !rec.contains("detail")) {
        throw std::runtime_error("missing fields");
      }
      records.push_back(std::move(rec));
    } catch (const std::exception&) {
      result.status = VerifyStatus::Truncated;
      result.message = "line " + std::to_string(result.lines) + " is not a complete log record";
      return result;
    }
  }
  if (records.empty() || records.front().at("kind") != "header") {
    result.status = VerifyStatus::Truncated;
    result.message = "log has no header record";
    return result;
  }
  if (records.back().at("kind") != "end") {
    result.status = VerifyStatus::Truncated;
    result.message = "log has no end record";
    return result;
  }

  Checker checker;
  try {
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (auto err = checker.line(records[i], i + 1)) {
        result.status = VerifyStatus::Violation;
        result.message = *err;
        return result;
      }
    }
    if (auto err = checker.finish()) {
      result.status = VerifyStatus::Violation;
      result.message = *err;
    }
  } catch (const nlohmann::json::exception& e) {
    result.status = VerifyStatus::Violation;
    result.message = std::string("malformed record: ") + e.what();
  }
  return result;
}

VerifyResult verify_log_text(const std::string& text) {
  std::istringstream in(text);
  return verify_log(in);
}

}  // namespace tlta::logcheck
