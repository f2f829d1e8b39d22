#include "tlta/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

#include "tlta/error.hpp"

namespace tlta::scenario {

namespace {

using geometry::Point;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::ConfigError, field + ": " + what);
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(field, "expected a value of the right type");
  }
}

template <class T>
void read(const YAML::Node& parent, const char* key, T& out, const std::string& path) {
  const YAML::Node node = parent[key];
  if (node) out = scalar<T>(node, path + "." + key);
}

std::string join(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

Point read_point(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() != 2) fail(field, "expected [x, y]");
  return {scalar<double>(node[0], field), scalar<double>(node[1], field)};
}

std::vector<Point> read_points(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) fail(field, "expected a list of [x, y] points");
  std::vector<Point> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(read_point(node[i], join(field, i)));
  return out;
}

std::vector<Waypoint> read_trace(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) fail(field, "expected a list of [t, x, y] waypoints");
  std::vector<Waypoint> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const YAML::Node w = node[i];
    const std::string f = join(field, i);
    if (!w.IsSequence() || w.size() != 3) fail(f, "expected [t, x, y]");
    out.push_back({scalar<double>(w[0], f), {scalar<double>(w[1], f), scalar<double>(w[2], f)}});
  }
  return out;
}

std::vector<std::string> read_strings(const YAML::Node& node, const std::string& field) {
  std::vector<std::string> out;
  if (!node) return out;
  if (!node.IsSequence()) fail(field, "expected a list");
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(scalar<std::string>(node[i], join(field, i)));
  return out;
}

protocol::Policy read_policy(const YAML::Node& node, protocol::PolicyId id, const std::string& field) {
  protocol::Policy p{id, {}, {}};
  if (!node) return p;
  if (const YAML::Node functions = node["functions"]) {
    if (!functions.IsMap()) fail(field + ".functions", "expected a map of function: Enable|Disable");
    for (const auto& kv : functions) {
      const auto name = scalar<std::string>(kv.first, field + ".functions");
      const auto rule = scalar<std::string>(kv.second, field + ".functions." + name);
      if (rule == "Enable") {
        p.function_rules[name] = protocol::Rule::Enable;
      } else if (rule == "Disable") {
        p.function_rules[name] = protocol::Rule::Disable;
      } else {
        fail(field + ".functions." + name, "expected Enable or Disable, got '" + rule + "'");
      }
    }
  }
  for (const auto& g : read_strings(node["grants"], field + ".grants")) p.access_grants.insert(g);
  return p;
}

AttackKind attack_kind(const std::string& name, const std::string& field) {
  for (AttackKind k : {AttackKind::ShieldedCrossing, AttackKind::HandoverSuppression, AttackKind::TamperedLte,
                       AttackKind::NonceReplay, AttackKind::GpsSpoof}) {
    if (to_string(k) == name) return k;
  }
  fail(field, "unknown attack kind '" + name + "'");
}

// ---- emit helpers

void emit_point(YAML::Emitter& out, Point p) { out << YAML::Flow << YAML::BeginSeq << p.x << p.y << YAML::EndSeq; }

void emit_trace(YAML::Emitter& out, const std::vector<Waypoint>& trace) {
  out << YAML::BeginSeq;
  for (const Waypoint& w : trace) out << YAML::Flow << YAML::BeginSeq << w.t << w.p.x << w.p.y << YAML::EndSeq;
  out << YAML::EndSeq;
}

void emit_policy(YAML::Emitter& out, const protocol::Policy& p) {
  out << YAML::BeginMap << YAML::Key << "functions" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, rule] : p.function_rules) {
    out << YAML::Key << name << YAML::Value << std::string(protocol::to_string(rule));
  }
  out << YAML::EndMap << YAML::Key << "grants" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (const auto& g : p.access_grants) out << g;
  out << YAML::EndSeq << YAML::EndMap;
}

// Moves an off-grid point toward the grid origin until it is covered.
Point pull_onto_grid(Point p, const geometry::HexGrid& grid) {
  const Point o = grid.origin();
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (grid.covers(o + mid * (p - o))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return o + lo * (p - o);
}

}  // namespace

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::ShieldedCrossing: return "ShieldedCrossing";
    case AttackKind::HandoverSuppression: return "HandoverSuppression";
    case AttackKind::TamperedLte: return "TamperedLte";
    case AttackKind::NonceReplay: return "NonceReplay";
    case AttackKind::GpsSpoof: return "GpsSpoof";
  }
  return "?";
}

ScenarioConfig parse_scenario(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("scenario is not valid YAML: ") + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorCode::ConfigError, "scenario must be a mapping");

  ScenarioConfig c;
  if (!root["schema_version"]) fail("schema_version", "missing");
  read(root, "schema_version", c.schema_version, "");
  if (c.schema_version != kSchemaVersion) {
    fail("schema_version", "unsupported version " + std::to_string(c.schema_version));
  }
  read(root, "name", c.name, "");
  read(root, "seed", c.seed, "");
  read(root, "digest", c.digest, "");
  read(root, "trust_root", c.trust_root, "");

  if (const YAML::Node g = root["grid"]) {
    read(g, "cell_radius", c.grid.cell_radius, "grid");
    read(g, "extent", c.grid.extent, "grid");
    if (g["origin"]) c.grid.origin = read_point(g["origin"], "grid.origin");
  }

  const YAML::Node s = root["service"];
  if (!s) fail("service", "missing");
  read(s, "id", c.service.id, "service");
  read(s, "tltsr", c.service.tltsr, "service");
  if (!s["pz"]) fail("service.pz", "missing");
  c.service.pz = read_points(s["pz"], "service.pz");
  read(s, "op_scale", c.service.op_scale, "service");
  read(s, "op_mode", c.service.op_mode, "service");
  read(s, "outer_layers", c.service.outer_layers, "service");
  c.service.functions = read_strings(s["functions"], "service.functions");
  c.service.services = read_strings(s["services"], "service.services");
  c.service.p_sp = read_policy(s["p_sp"], protocol::PolicyId::Sp, "service.p_sp");
  c.service.p_pz = read_policy(s["p_pz"], protocol::PolicyId::Pz, "service.p_pz");
  read(s, "notify_tltsr_on_exit", c.service.notify_tltsr_on_exit, "service");

  if (const YAML::Node e = root["engine"]) {
    EngineConfig& en = c.engine;
    read(e, "poll_period", en.poll_period, "engine");
    read(e, "debounce_k", en.debounce_k, "engine");
    read(e, "gps_sigma", en.gps_sigma, "engine");
    read(e, "latency_min", en.latency_min, "engine");
    read(e, "latency_max", en.latency_max, "engine");
    read(e, "drop_probability", en.drop_probability, "engine");
    read(e, "radio_tick", en.radio_tick, "engine");
    read(e, "policy_timeout", en.policy_timeout, "engine");
    read(e, "dereg_timeout", en.dereg_timeout, "engine");
    read(e, "handover_timeout", en.handover_timeout, "engine");
    read(e, "expire_after", en.expire_after, "engine");
    read(e, "horizon", en.horizon, "engine");
    read(e, "violation_grace", en.violation_grace, "engine");
    read(e, "collaborative_authz", en.collaborative_authz, "engine");
    if (const YAML::Node rules = e["drop_rules"]) {
      for (std::size_t i = 0; i < rules.size(); ++i) {
        const std::string f = join("engine.drop_rules", i);
        DropRule r;
        read(rules[i], "kind", r.kind, f);
        read(rules[i], "probability", r.probability, f);
        read(rules[i], "max_count", r.max_count, f);
        en.drop_rules.push_back(r);
      }
    }
  }

  if (const YAML::Node comps = root["components"]) {
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string f = join("components", i);
      ComponentSpec cs;
      read(comps[i], "name", cs.name, f);
      read(comps[i], "digest", cs.digest, f);
      read(comps[i], "pcr", cs.pcr, f);
      c.components.push_back(cs);
    }
  }
  if (const YAML::Node rims = root["rims"]) {
    for (std::size_t i = 0; i < rims.size(); ++i) {
      const std::string f = join("rims", i);
      RimSpec r;
      read(rims[i], "component", r.component, f);
      read(rims[i], "digest", r.digest, f);
      r.issuer = c.trust_root;
      read(rims[i], "issuer", r.issuer, f);
      c.rims.push_back(r);
    }
  }
  if (const YAML::Node mts = root["mts"]) {
    for (std::size_t i = 0; i < mts.size(); ++i) {
      const std::string f = join("mts", i);
      MtSpec m;
      read(mts[i], "id", m.id, f);
      m.manifest = read_strings(mts[i]["manifest"], f + ".manifest");
      if (!mts[i]["trace"]) fail(f + ".trace", "missing");
      m.trace = read_trace(mts[i]["trace"], f + ".trace");
      if (const YAML::Node uses = mts[i]["uses"]) {
        for (std::size_t j = 0; j < uses.size(); ++j) {
          Use u;
          read(uses[j], "t", u.t, join(f + ".uses", j));
          read(uses[j], "service", u.service, join(f + ".uses", j));
          m.uses.push_back(u);
        }
      }
      c.mts.push_back(std::move(m));
    }
  }
  if (const YAML::Node fleets = root["fleets"]) {
    for (std::size_t i = 0; i < fleets.size(); ++i) {
      const std::string f = join("fleets", i);
      FleetSpec fs;
      read(fleets[i], "prefix", fs.prefix, f);
      read(fleets[i], "count", fs.count, f);
      read(fleets[i], "stagger", fs.stagger, f);
      const YAML::Node routes = fleets[i]["routes"];
      if (!routes || !routes.IsSequence()) fail(f + ".routes", "expected a list of traces");
      for (std::size_t j = 0; j < routes.size(); ++j) fs.routes.push_back(read_trace(routes[j], join(f + ".routes", j)));
      c.fleets.push_back(std::move(fs));
    }
  }
  if (const YAML::Node attacks = root["attacks"]) {
    for (std::size_t i = 0; i < attacks.size(); ++i) {
      const std::string f = join("attacks", i);
      AttackSpec a;
      std::string kind;
      read(attacks[i], "kind", kind, f);
      a.kind = attack_kind(kind, f + ".kind");
      read(attacks[i], "target", a.target, f);
      read(attacks[i], "start", a.start, f);
      read(attacks[i], "end", a.end, f);
      if (attacks[i]["offset"]) a.offset = read_point(attacks[i]["offset"], f + ".offset");
      read(attacks[i], "replay_count", a.replay_count, f);
      read(attacks[i], "replay_interval", a.replay_interval, f);
      c.attacks.push_back(a);
    }
  }
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read scenario file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string write_scenario(const ScenarioConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "schema_version" << YAML::Value << c.schema_version;
  out << YAML::Key << "name" << YAML::Value << c.name;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "digest" << YAML::Value << c.digest;
  out << YAML::Key << "trust_root" << YAML::Value << c.trust_root;

  out << YAML::Key << "grid" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "cell_radius" << YAML::Value << c.grid.cell_radius;
  out << YAML::Key << "extent" << YAML::Value << c.grid.extent;
  out << YAML::Key << "origin" << YAML::Value;
  emit_point(out, c.grid.origin);
  out << YAML::EndMap;

  const ServiceConfig& s = c.service;
  out << YAML::Key << "service" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << s.id;
  out << YAML::Key << "tltsr" << YAML::Value << s.tltsr;
  out << YAML::Key << "pz" << YAML::Value << YAML::BeginSeq;
  for (Point p : s.pz) emit_point(out, p);
  out << YAML::EndSeq;
  out << YAML::Key << "op_scale" << YAML::Value << s.op_scale;
  out << YAML::Key << "op_mode" << YAML::Value << s.op_mode;
  out << YAML::Key << "outer_layers" << YAML::Value << s.outer_layers;
  out << YAML::Key << "functions" << YAML::Value << YAML::Flow << s.functions;
  out << YAML::Key << "services" << YAML::Value << YAML::Flow << s.services;
  out << YAML::Key << "p_sp" << YAML::Value;
  emit_policy(out, s.p_sp);
  out << YAML::Key << "p_pz" << YAML::Value;
  emit_policy(out, s.p_pz);
  out << YAML::Key << "notify_tltsr_on_exit" << YAML::Value << s.notify_tltsr_on_exit;
  out << YAML::EndMap;

  const EngineConfig& e = c.engine;
  out << YAML::Key << "engine" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "poll_period" << YAML::Value << e.poll_period;
  out << YAML::Key << "debounce_k" << YAML::Value << e.debounce_k;
  out << YAML::Key << "gps_sigma" << YAML::Value << e.gps_sigma;
  out << YAML::Key << "latency_min" << YAML::Value << e.latency_min;
  out << YAML::Key << "latency_max" << YAML::Value << e.latency_max;
  out << YAML::Key << "drop_probability" << YAML::Value << e.drop_probability;
  out << YAML::Key << "drop_rules" << YAML::Value << YAML::BeginSeq;
  for (const DropRule& r : e.drop_rules) {
    out << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << r.kind << YAML::Key << "probability"
        << YAML::Value << r.probability << YAML::Key << "max_count" << YAML::Value << r.max_count << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "radio_tick" << YAML::Value << e.radio_tick;
  out << YAML::Key << "policy_timeout" << YAML::Value << e.policy_timeout;
  out << YAML::Key << "dereg_timeout" << YAML::Value << e.dereg_timeout;
  out << YAML::Key << "handover_timeout" << YAML::Value << e.handover_timeout;
  out << YAML::Key << "expire_after" << YAML::Value << e.expire_after;
  out << YAML::Key << "horizon" << YAML::Value << e.horizon;
  out << YAML::Key << "violation_grace" << YAML::Value << e.violation_grace;
  out << YAML::Key << "collaborative_authz" << YAML::Value << e.collaborative_authz;
  out << YAML::EndMap;

  out << YAML::Key << "components" << YAML::Value << YAML::BeginSeq;
  for (const ComponentSpec& cs : c.components) {
    out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << cs.name << YAML::Key << "digest" << YAML::Value
        << cs.digest << YAML::Key << "pcr" << YAML::Value << cs.pcr << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "rims" << YAML::Value << YAML::BeginSeq;
  for (const RimSpec& r : c.rims) {
    out << YAML::BeginMap << YAML::Key << "component" << YAML::Value << r.component << YAML::Key << "digest"
        << YAML::Value << r.digest << YAML::Key << "issuer" << YAML::Value << r.issuer << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "mts" << YAML::Value << YAML::BeginSeq;
  for (const MtSpec& m : c.mts) {
    out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << m.id;
    out << YAML::Key << "manifest" << YAML::Value << YAML::Flow << m.manifest;
    out << YAML::Key << "trace" << YAML::Value;
    emit_trace(out, m.trace);
    out << YAML::Key << "uses" << YAML::Value << YAML::BeginSeq;
    for (const Use& u : m.uses) {
      out << YAML::Flow << YAML::BeginMap << YAML::Key << "t" << YAML::Value << u.t << YAML::Key << "service"
          << YAML::Value << u.service << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "fleets" << YAML::Value << YAML::BeginSeq;
  for (const FleetSpec& f : c.fleets) {
    out << YAML::BeginMap << YAML::Key << "prefix" << YAML::Value << f.prefix << YAML::Key << "count" << YAML::Value
        << f.count << YAML::Key << "stagger" << YAML::Value << f.stagger;
    out << YAML::Key << "routes" << YAML::Value << YAML::BeginSeq;
    for (const auto& r : f.routes) emit_trace(out, r);
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "attacks" << YAML::Value << YAML::BeginSeq;
  for (const AttackSpec& a : c.attacks) {
    out << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << std::string(to_string(a.kind));
    out << YAML::Key << "target" << YAML::Value << a.target;
    out << YAML::Key << "start" << YAML::Value << a.start << YAML::Key << "end" << YAML::Value << a.end;
    out << YAML::Key << "offset" << YAML::Value;
    emit_point(out, a.offset);
    out << YAML::Key << "replay_count" << YAML::Value << a.replay_count;
    out << YAML::Key << "replay_interval" << YAML::Value << a.replay_interval << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ResolvedScenario resolve(const ScenarioConfig& c) {
  if (c.digest != trust::kDigestAlgorithm) fail("digest", "only sha256 is supported, got '" + c.digest + "'");
  if (c.name.empty()) fail("name", "missing");
  if (!(c.grid.cell_radius > 0.0)) fail("grid.cell_radius", "must be positive");
  if (c.grid.extent < 0) fail("grid.extent", "must be non-negative");

  const EngineConfig& e = c.engine;
  if (!(e.poll_period > 0.0)) fail("engine.poll_period", "must be positive");
  if (e.debounce_k < 1) fail("engine.debounce_k", "must be at least 1");
  if (e.gps_sigma < 0.0) fail("engine.gps_sigma", "must be non-negative");
  if (e.latency_min < 0.0 || e.latency_max < e.latency_min) fail("engine.latency_max", "need 0 <= min <= max");
  if (e.drop_probability < 0.0 || e.drop_probability > 1.0) fail("engine.drop_probability", "must be in [0, 1]");
  if (!(e.radio_tick > 0.0)) fail("engine.radio_tick", "must be positive");
  if (!(e.horizon > 0.0)) fail("engine.horizon", "must be positive");
  for (std::size_t i = 0; i < e.drop_rules.size(); ++i) {
    const DropRule& r = e.drop_rules[i];
    if (!protocol::message_kind_from_string(r.kind)) {
      fail(join("engine.drop_rules", i) + ".kind", "unknown message kind '" + r.kind + "'");
    }
    if (r.probability < 0.0 || r.probability > 1.0) {
      fail(join("engine.drop_rules", i) + ".probability", "must be in [0, 1]");
    }
  }

  const ServiceConfig& s = c.service;
  if (s.op_mode != "scaled" && s.op_mode != "sp") fail("service.op_mode", "expected 'scaled' or 'sp'");
  if (s.op_scale < 1.0) fail("service.op_scale", "must be at least 1");
  if (s.outer_layers < 1) fail("service.outer_layers", "must be at least 1");

  std::optional<geometry::Polygon> pz;
  try {
    pz.emplace(s.pz);
  } catch (const Error& err) {
    fail("service.pz", err.what());
  }

  const std::set<std::string> functions(s.functions.begin(), s.functions.end());
  const std::set<std::string> services(s.services.begin(), s.services.end());
  if (functions.size() != s.functions.size()) fail("service.functions", "duplicate function name");
  if (services.size() != s.services.size()) fail("service.services", "duplicate service name");
  for (const auto* p : {&s.p_sp, &s.p_pz}) {
    const std::string field = p->id == protocol::PolicyId::Sp ? "service.p_sp" : "service.p_pz";
    for (const auto& [name, rule] : p->function_rules) {
      if (!functions.contains(name)) fail(field + ".functions", "unknown function '" + name + "'");
    }
    for (const auto& g : p->access_grants) {
      if (!services.contains(g)) fail(field + ".grants", "unknown service '" + g + "'");
    }
  }

  protocol::ServiceRequest request{s.tltsr, s.id, *pz, s.p_sp, s.p_pz, s.op_scale, s.outer_layers, s.op_mode == "sp"};
  std::vector<std::string> warnings;
  try {
    warnings = protocol::validate_service_request(request);
  } catch (const Error& err) {
    fail("service", err.what());
  }

  std::vector<trust::Component> components;
  std::set<std::string> component_names;
  for (std::size_t i = 0; i < c.components.size(); ++i) {
    const ComponentSpec& cs = c.components[i];
    const std::string f = join("components", i);
    if (cs.name.empty()) fail(f + ".name", "missing");
    if (!component_names.insert(cs.name).second) fail(f + ".name", "duplicate component '" + cs.name + "'");
    if (cs.pcr >= trust::kPcrCount) fail(f + ".pcr", "out of range");
    try {
      components.push_back({cs.name, trust::Digest::from_hex(cs.digest), cs.pcr});
    } catch (const Error& err) {
      fail(f + ".digest", err.what());
    }
  }
  if (components.empty()) fail("components", "at least one boot component is required");

  trust::RimSet rims;
  for (std::size_t i = 0; i < c.rims.size(); ++i) {
    const RimSpec& r = c.rims[i];
    const std::string f = join("rims", i);
    if (!component_names.contains(r.component)) fail(f + ".component", "unknown component '" + r.component + "'");
    try {
      rims.push_back({r.component, trust::Digest::from_hex(r.digest), r.issuer});
    } catch (const Error& err) {
      fail(f + ".digest", err.what());
    }
  }

  std::optional<geometry::HexGrid> grid;
  try {
    grid.emplace(c.grid.cell_radius, c.grid.extent, c.grid.origin);
  } catch (const Error& err) {
    fail("grid", err.what());
  }

  std::vector<MtSpec> mts = c.mts;
  for (std::size_t i = 0; i < c.fleets.size(); ++i) {
    const FleetSpec& f = c.fleets[i];
    const std::string field = join("fleets", i);
    if (f.prefix.empty()) fail(field + ".prefix", "missing");
    if (f.count < 0) fail(field + ".count", "must be non-negative");
    if (f.routes.empty()) fail(field + ".routes", "at least one route is required");
    for (int n = 0; n < f.count; ++n) {
      MtSpec m;
      m.id = f.prefix + std::to_string(n + 1);
      m.trace = f.routes[static_cast<std::size_t>(n) % f.routes.size()];
      for (Waypoint& w : m.trace) w.t += n * f.stagger;
      mts.push_back(std::move(m));
    }
  }
  if (mts.empty()) fail("mts", "scenario has no mobile terminals");

  std::set<std::string> mt_ids;
  for (std::size_t i = 0; i < mts.size(); ++i) {
    MtSpec& m = mts[i];
    const std::string f = i < c.mts.size() ? join("mts", i) : "fleet member '" + m.id + "'";
    if (m.id.empty()) fail(f + ".id", "missing");
    if (!mt_ids.insert(m.id).second) fail(f + ".id", "duplicate mt id '" + m.id + "'");
    if (m.id == protocol::kTltac || m.id == protocol::kAgw || m.id == protocol::kAgps || m.id == s.tltsr ||
        protocol::cell_of_enb(m.id)) {
      fail(f + ".id", "'" + m.id + "' collides with a network entity id");
    }
    for (const auto& name : m.manifest) {
      if (!component_names.contains(name)) fail(f + ".manifest", "unknown component '" + name + "'");
    }
    if (m.trace.size() < 2) fail(f + ".trace", "needs at least two waypoints");
    for (std::size_t j = 0; j < m.trace.size(); ++j) {
      if (j > 0 && !(m.trace[j].t > m.trace[j - 1].t)) fail(join(f + ".trace", j), "times must strictly increase");
      if (m.trace[j].t < 0.0) fail(join(f + ".trace", j), "time must be non-negative");
      if (!grid->covers(m.trace[j].p)) {
        m.trace[j].p = pull_onto_grid(m.trace[j].p, *grid);
        warnings.push_back(join(f + ".trace", j) + " lies off the grid; clipped to (" +
                           std::to_string(m.trace[j].p.x) + ", " + std::to_string(m.trace[j].p.y) + ")");
      }
    }
    for (std::size_t j = 0; j < m.uses.size(); ++j) {
      if (!services.contains(m.uses[j].service)) {
        fail(join(f + ".uses", j) + ".service", "unknown service '" + m.uses[j].service + "'");
      }
    }
  }

  for (std::size_t i = 0; i < c.attacks.size(); ++i) {
    const AttackSpec& a = c.attacks[i];
    const std::string f = join("attacks", i);
    if (!mt_ids.contains(a.target)) fail(f + ".target", "unknown mt '" + a.target + "'");
    if (!(a.end >= a.start)) fail(f + ".end", "must not precede start");
    if (a.kind == AttackKind::NonceReplay && (a.replay_count < 1 || !(a.replay_interval > 0.0))) {
      fail(f, "NonceReplay needs replay_count >= 1 and replay_interval > 0");
    }
    if (a.kind == AttackKind::TamperedLte && !component_names.contains(std::string(trust::kLteComponent))) {
      fail(f, "TamperedLte needs an LTE boot component");
    }
  }

  return ResolvedScenario{c, *grid, std::move(request), std::move(mts), std::move(components), std::move(rims),
                          std::move(warnings)};
}

}  // namespace tlta::scenario
