#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "tlta/device.hpp"
#include "tlta/geometry.hpp"
#include "tlta/protocol.hpp"
#include "tlta/scenario.hpp"
#include "tlta/time.hpp"

namespace tlta::sim {

using geometry::CellId;

using protocol::Json;

enum class EventKind { MessageDelivery, LocationPoll, TimerFire, TraceWaypoint, AttackAction };
std::string_view to_string(EventKind kind);

/// Independent generator for one named consumer. Streams with different
/// names never share state, so adding a consumer leaves the others intact.
std::mt19937_64 substream(std::uint64_t seed, std::string_view name);

/// Piecewise-linear interpolation, clamped to the first/last waypoint.
geometry::Point position_at(const std::vector<scenario::Waypoint>& trace, double t);

/// true_pos plus independent Gaussian noise per axis.
geometry::Point gps_fix(geometry::Point true_pos, double sigma, std::mt19937_64& rng);

struct HandoverTrigger {
  CellId source;
  CellId target;
  bool sp_crossing = false;  // entering the covered region from outside
};

/// Trigger when the true position has left the serving hex. Positions on
/// the serving hex's boundary never trigger.
std::optional<HandoverTrigger> detect_handover(const geometry::HexGrid& grid, const geometry::ZoneMap& zone,
                                               CellId current, geometry::Point true_pos);

struct LatencyModel {
  SimTime min{};
  SimTime max{};
  SimTime sample(std::mt19937_64& rng) const;
};

/// Global drop probability plus per-kind rules (each with an optional cap).
class DropModel {
public:
  DropModel(double probability, std::vector<scenario::DropRule> rules);
  // Reason string when the message should be dropped.
  std::optional<std::string> should_drop(protocol::MessageKind kind, std::mt19937_64& rng);

private:
  double probability_;
  std::vector<scenario::DropRule> rules_;
  std::vector<int> used_;
};

struct Delivery {
  bool dropped = false;
  std::string reason;
  SimTime at{};
};

Delivery deliver(const protocol::Message& msg, const LatencyModel& latency, DropModel& drops,
                 std::mt19937_64& latency_rng, std::mt19937_64& drop_rng);

struct Violation {
  SimTime t{};
  std::string mt;
  std::string kind;  // FunctionalEnforcement or AccessControl
  Json detail;
};

struct MessageCounts {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
};

struct MetricsReport {
  std::string scenario;
  std::uint64_t seed = 0;
  // entity -> kind -> counts, keyed by sender; `received` keyed by receiver.
  std::map<std::string, std::map<std::string, MessageCounts>> by_sender;
  std::map<std::string, std::map<std::string, std::uint64_t>> received;
  std::map<std::string, MessageCounts> by_kind;
  std::uint64_t registrations = 0;
  std::uint64_t refreshes = 0;
  std::uint64_t deregistrations = 0;
  std::uint64_t expirations = 0;
  std::uint64_t attestations_accepted = 0;
  std::map<std::string, std::uint64_t> attestations_rejected;  // by reason
  std::map<std::string, std::uint64_t> judder;                 // fresh registrations per MT
  std::vector<Violation> violations;
  std::uint64_t fixes_issued = 0;
  std::uint64_t fixes_dropped = 0;
  std::map<std::string, std::uint64_t> drops_by_reason;
  std::uint64_t handovers_attested = 0;
  std::uint64_t handovers_plain = 0;
  std::uint64_t handovers_suppressed = 0;
  std::uint64_t handovers_aborted = 0;
  // "enb0->enb1" -> attestation messages (request, nonce transfer, submit, ack)
  std::map<std::string, std::uint64_t> attestation_pairs;
  std::map<std::string, std::vector<std::string>> phases;
  std::uint64_t discarded_events = 0;
  std::vector<std::string> warnings;

  std::uint64_t judder_max() const;
  std::uint64_t violation_count(std::string_view kind) const;
  Json to_json() const;
};

struct RunResult {
  std::string log;  // JSON lines, one record per line
  MetricsReport metrics;
  std::string summary;
  geometry::ZoneMap zone;
  std::map<std::string, std::vector<device::DevicePhase>> phase_history;
};

/// Runs the resolved scenario to quiescence. A pure function of its inputs.
RunResult run_scenario(const scenario::ResolvedScenario& scenario, std::uint64_t seed);

/// ZoneMap as a structured document (cells, layers, perimeters, scales).
Json zone_to_json(const geometry::ZoneMap& zone);

}  // namespace tlta::sim
