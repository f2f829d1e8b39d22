#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tlta/geometry.hpp"
#include "tlta/protocol.hpp"
#include "tlta/trust.hpp"

namespace tlta::scenario {

inline constexpr int kSchemaVersion = 1;

struct Waypoint {
  double t = 0.0;  // seconds
  geometry::Point p;
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

struct GridConfig {
  double cell_radius = 100.0;
  int extent = 10;
  geometry::Point origin;
  friend bool operator==(const GridConfig&, const GridConfig&) = default;
};

struct ServiceConfig {
  std::string id = "service";
  std::string tltsr = "tltsr";
  std::vector<geometry::Point> pz;
  double op_scale = 1.3;
  std::string op_mode = "scaled";  // "scaled" or "sp"
  int outer_layers = 1;
  std::vector<std::string> functions;
  std::vector<std::string> services;
  protocol::Policy p_sp{protocol::PolicyId::Sp, {}, {}};
  protocol::Policy p_pz{protocol::PolicyId::Pz, {}, {}};
  bool notify_tltsr_on_exit = false;
  friend bool operator==(const ServiceConfig&, const ServiceConfig&) = default;
};

struct DropRule {
  std::string kind;
  double probability = 1.0;
  int max_count = -1;  // -1: unlimited
  friend bool operator==(const DropRule&, const DropRule&) = default;
};

struct EngineConfig {
  double poll_period = 1.0;
  int debounce_k = 2;
  double gps_sigma = 5.0;
  double latency_min = 0.010;
  double latency_max = 0.050;
  double drop_probability = 0.0;
  std::vector<DropRule> drop_rules;
  double radio_tick = 0.1;
  double policy_timeout = 10.0;
  double dereg_timeout = 10.0;
  double handover_timeout = 1.0;
  double expire_after = 3600.0;
  // Events later than the last trace end plus this many seconds are discarded.
  double horizon = 21.0;
  // Negative: k * poll_period + latency_max.
  double violation_grace = -1.0;
  bool collaborative_authz = false;
  friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

struct ComponentSpec {
  std::string name;
  std::string digest;  // hex
  std::uint32_t pcr = 0;
  friend bool operator==(const ComponentSpec&, const ComponentSpec&) = default;
};

struct RimSpec {
  std::string component;
  std::string digest;
  std::string issuer;
  friend bool operator==(const RimSpec&, const RimSpec&) = default;
};

struct Use {
  double t = 0.0;
  std::string service;
  friend bool operator==(const Use&, const Use&) = default;
};

struct MtSpec {
  std::string id;
  std::vector<std::string> manifest;  // component names; empty means all
  std::vector<Waypoint> trace;
  std::vector<Use> uses;
  friend bool operator==(const MtSpec&, const MtSpec&) = default;
};

struct FleetSpec {
  std::string prefix;
  int count = 0;
  double stagger = 1.0;
  std::vector<std::vector<Waypoint>> routes;
  friend bool operator==(const FleetSpec&, const FleetSpec&) = default;
};

enum class AttackKind { ShieldedCrossing, HandoverSuppression, TamperedLte, NonceReplay, GpsSpoof };
std::string_view to_string(AttackKind kind);

struct AttackSpec {
  AttackKind kind = AttackKind::ShieldedCrossing;
  std::string target;
  double start = 0.0;
  double end = 1e18;
  geometry::Point offset;
  int replay_count = 1;
  double replay_interval = 1.0;
  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

struct ScenarioConfig {
  int schema_version = kSchemaVersion;
  std::string name;
  std::uint64_t seed = 1;
  std::string digest = std::string(trust::kDigestAlgorithm);
  std::string trust_root = "rim-root";
  GridConfig grid;
  ServiceConfig service;
  EngineConfig engine;
  std::vector<ComponentSpec> components;
  std::vector<RimSpec> rims;
  std::vector<MtSpec> mts;
  std::vector<FleetSpec> fleets;
  std::vector<AttackSpec> attacks;
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Parses YAML text. Throws ConfigError naming the offending field.
ScenarioConfig parse_scenario(const std::string& text);
/// Throws ConfigError when the file is missing or unreadable.
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string write_scenario(const ScenarioConfig& config);

/// Scenario with fleets expanded into individual MTs and every cross
/// reference resolved.
struct ResolvedScenario {
  ScenarioConfig config;
  geometry::HexGrid grid;
  protocol::ServiceRequest request;
  std::vector<MtSpec> mts;  // explicit MTs then fleet members
  std::vector<trust::Component> components;
  trust::RimSet rims;
  std::vector<std::string> warnings;
};

/// Validates and resolves. Throws ConfigError (field named in the message).
/// Waypoints off the grid are pulled back onto it with a warning.
ResolvedScenario resolve(const ScenarioConfig& config);

}  // namespace tlta::scenario
