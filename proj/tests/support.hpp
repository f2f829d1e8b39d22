#pragma once
// A single-cell protected zone with every network entity wired to a
// DirectNetwork and one terminal camped on a c0 cell.

#include <map>
#include <memory>

#include "tlta/device.hpp"
#include "tlta/protocol.hpp"
#include "tlta/trust.hpp"

namespace fixture {

using namespace tlta;
using geometry::CellId;
using geometry::Point;

inline protocol::Policy policy(protocol::PolicyId id, bool camera, std::set<std::string> grants) {
  protocol::Policy p{id, {}, std::move(grants)};
  p.function_rules["camera"] = camera ? protocol::Rule::Enable : protocol::Rule::Disable;
  p.function_rules["microphone"] = protocol::Rule::Enable;
  return p;
}

inline std::vector<trust::Component> components() {
  return {{"bootloader", trust::Digest::of("bootloader image"), 0},
          {"kernel", trust::Digest::of("kernel image"), 1},
          {"LTE", trust::Digest::of("lte enforcer"), 8}};
}

struct World {
  geometry::HexGrid grid{100.0, 3};
  protocol::ServiceRequest request{"tltsr",
                                   "svc",
                                   geometry::Polygon({{-20, -20}, {20, -20}, {20, 20}, {-20, 20}}),
                                   policy(protocol::PolicyId::Sp, true, {}),
                                   policy(protocol::PolicyId::Pz, false, {"content"}),
                                   1.3,
                                   1,
                                   false};
  protocol::ServiceConfiguration config = protocol::configure_service(request, grid);
  trust::RimSet rims;
  trust::CredentialRegistry registry{"root", 3};
  protocol::DirectNetwork net;
  std::map<CellId, std::unique_ptr<protocol::ENodeB>> enbs;
  protocol::Tltac tltac{request, config.zone};
  protocol::Agps agps;
  protocol::PassiveEntity agw{"agw"};
  protocol::PassiveEntity tltsr{"tltsr"};
  std::map<std::string, std::unique_ptr<device::MobileTerminal>> mts;

  explicit World(std::uint64_t seed = 1, device::DeviceOptions options = {}) : net(seed) {
    for (const auto& c : components()) rims.push_back({c.name, c.digest, "root"});
    for (const CellId& c : grid.cells()) {
      enbs[c] = std::make_unique<protocol::ENodeB>(c, protocol::VerifierContext{&rims, &registry});
      net.add(*enbs[c]);
    }
    net.add(tltac);
    net.add(agps);
    net.add(agw);
    net.add(tltsr);
    for (const auto& m : config.node_configs) net.send(m);
    net.run();
    net.clear_trace();
    options_ = options;
  }

  // Boots a terminal (optionally with a tampered enforcer) camped on `cell`.
  device::MobileTerminal& add_mt(const std::string& id, CellId cell, bool tampered = false) {
    auto cs = components();
    if (tampered) cs[2].digest = trust::Digest::of("patched enforcer");
    device::DeviceConfig cfg;
    cfg.mt_id = id;
    cfg.functions = {"camera", "microphone"};
    cfg.services = {"content"};
    cfg.platform = trust::secure_boot(cs, rims, "root");
    cfg.credential = registry.issue(id);
    cfg.secret = *registry.secret(cfg.credential.key_id);
    auto mt = std::make_unique<device::MobileTerminal>(cfg, options_);
    mt->set_grid(&grid);
    mt->attach(cell);
    net.add(*mt);
    return *(mts[id] = std::move(mt));
  }

  protocol::ENodeB& enb(CellId c) { return *enbs.at(c); }

  // Kinds of the messages in the current trace, in send order.
  std::vector<protocol::MessageKind> kinds() const {
    std::vector<protocol::MessageKind> out;
    for (const auto& m : net.trace()) out.push_back(m.kind());
    return out;
  }

private:
  device::DeviceOptions options_;
};

}  // namespace fixture
