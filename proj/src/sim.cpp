#include "tlta/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <queue>
#include <set>
#include <sstream>

#include "tlta/error.hpp"

namespace tlta::sim {

namespace {

using device::DevicePhase;
using device::MobileTerminal;
using geometry::Point;
using protocol::Message;
using protocol::MessageKind;

Json point_json(Point p) { return Json::array({p.x, p.y}); }
Json cells_json(const geometry::CellSet& cells) {
  Json out = Json::array();
  for (CellId c : cells) out.push_back(Json::array({c.q, c.r}));
  return out;
}

SimTime seconds(double s) { return from_seconds(s); }

std::string reason_of(const std::string& verdict) {
  // "Reject(Reason)" -> "Reason"
  const auto open = verdict.find('(');
  if (open == std::string::npos) return verdict;
  return verdict.substr(open + 1, verdict.size() - open - 2);
}

struct MtRuntime {
  std::unique_ptr<MobileTerminal> device;
  scenario::MtSpec spec;
  double start = 0.0;
  double end = 0.0;
  bool attached = false;
  // Violation episodes: onset time when the condition began, and whether
  // the episode was already reported.
  std::optional<SimTime> fe_onset;
  bool fe_reported = false;
  std::optional<SimTime> ac_onset;
  bool ac_reported = false;
};

class Engine final : public protocol::Context {
public:
  Engine(const scenario::ResolvedScenario& sc, std::uint64_t seed);

  RunResult run();

  SimTime now() const override { return now_; }
  void send(Message msg) override;
  void schedule_timer(const std::string& entity, SimTime delay, std::string tag) override;
  void command_handover(const std::string& mt, const std::string& transaction) override;
  void record(std::string_view kind, const std::string& entity, Json detail) override;
  std::mt19937_64& nonce_rng() override { return rng_nonces_; }

private:
  struct Event {
    SimTime at;
    std::uint64_t seq;
    EventKind kind;
    std::function<void()> action;
    std::optional<Message> message;  // set for deliveries
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const { return a.at != b.at ? a.at > b.at : a.seq > b.seq; }
  };

  void schedule(SimTime at, EventKind kind, std::function<void()> action, std::optional<Message> msg = {});
  void log(std::string_view kind, const std::string& entity, Json detail);
  void drop(const Message& msg, const std::string& reason);
  void on_delivery(const Message& msg);
  bool muted(const std::string& mt) const;
  bool attack_active(scenario::AttackKind kind, const std::string& mt, const scenario::AttackSpec** spec = nullptr) const;

  void setup();
  void radio_tick();
  void poll(MtRuntime& rt);
  void detect_violations(MtRuntime& rt, Point true_pos);
  void check_coupling(const MtRuntime& rt) const;
  MtRuntime* runtime(const std::string& id);

  const scenario::ResolvedScenario& sc_;
  const scenario::ScenarioConfig& cfg_;
  std::uint64_t seed_;

  std::mt19937_64 rng_noise_;
  std::mt19937_64 rng_latency_;
  std::mt19937_64 rng_drop_;
  std::mt19937_64 rng_nonces_;

  LatencyModel latency_;
  DropModel drops_;

  trust::CredentialRegistry credentials_;
  std::optional<protocol::ServiceConfiguration> service_;
  std::unique_ptr<protocol::Tltac> tltac_;
  protocol::Agps agps_;
  protocol::PassiveEntity agw_{std::string(protocol::kAgw)};
  std::unique_ptr<protocol::PassiveEntity> tltsr_;
  std::map<CellId, std::unique_ptr<protocol::ENodeB>> enbs_;
  std::vector<MtRuntime> mts_;
  std::map<std::string, protocol::Entity*> entities_;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  SimTime now_{};
  std::uint64_t next_seq_ = 1;
  std::uint64_t current_seq_ = 0;
  std::uint64_t sub_ = 0;
  std::uint64_t next_msg_id_ = 1;
  std::uint64_t events_run_ = 0;
  SimTime tick_{};
  SimTime last_trace_end_{};
  SimTime horizon_end_{};
  SimTime grace_{};

  std::set<std::string> dirty_;
  std::map<std::string, std::string> tx_pair_;
  std::map<std::string, std::set<CellId>> suppressed_logged_;
  std::set<std::string> replay_captured_;

  std::ostringstream out_;
  MetricsReport m_;
};

Engine::Engine(const scenario::ResolvedScenario& sc, std::uint64_t seed)
    : sc_(sc),
      cfg_(sc.config),
      seed_(seed),
      rng_noise_(substream(seed, "noise")),
      rng_latency_(substream(seed, "latency")),
      rng_drop_(substream(seed, "drop")),
      rng_nonces_(substream(seed, "nonces")),
      latency_{seconds(cfg_.engine.latency_min), seconds(cfg_.engine.latency_max)},
      drops_(cfg_.engine.drop_probability, cfg_.engine.drop_rules),
      credentials_(cfg_.trust_root, substream(seed, "credentials")()) {
  m_.scenario = cfg_.name;
  m_.seed = seed;
  m_.warnings = sc.warnings;
  tick_ = seconds(cfg_.engine.radio_tick);
  const double grace = cfg_.engine.violation_grace >= 0.0
                           ? cfg_.engine.violation_grace
                           : cfg_.engine.debounce_k * cfg_.engine.poll_period + cfg_.engine.latency_max;
  grace_ = seconds(grace);
}

void Engine::schedule(SimTime at, EventKind kind, std::function<void()> action, std::optional<Message> msg) {
  if (at < now_) throw Error(ErrorCode::InvariantBreach, "event scheduled in the past");
  queue_.push(Event{at, next_seq_++, kind, std::move(action), std::move(msg)});
}

void Engine::log(std::string_view kind, const std::string& entity, Json detail) {
  Json line{{"t", now_.count()},
            {"seq", current_seq_},
            {"sub", sub_++},
            {"kind", kind},
            {"entity", entity},
            {"detail", std::move(detail)}};
  out_ << line.dump() << '\n';
}

MtRuntime* Engine::runtime(const std::string& id) {
  for (auto& rt : mts_) {
    if (rt.spec.id == id) return &rt;
  }
  return nullptr;
}

bool Engine::attack_active(scenario::AttackKind kind, const std::string& mt, const scenario::AttackSpec** spec) const {
  const double t = to_seconds(now_);
  for (const auto& a : cfg_.attacks) {
    if (a.kind == kind && a.target == mt && t >= a.start && t < a.end) {
      if (spec != nullptr) *spec = &a;
      return true;
    }
  }
  return false;
}

bool Engine::muted(const std::string& mt) const {
  return attack_active(scenario::AttackKind::ShieldedCrossing, mt);
}

void Engine::send(Message msg) {
  msg.id = next_msg_id_++;
  msg.sent_at = now_;
  const std::string kind(protocol::to_string(msg.kind()));
  log("send", msg.src, protocol::summarize(msg));
  ++m_.by_sender[msg.src][kind].sent;
  ++m_.by_kind[kind].sent;

  const std::string tx = protocol::transaction_of(msg);
  switch (msg.kind()) {
    case MessageKind::AttestationRequest: {
      const auto& req = std::get<protocol::AttestationRequest>(msg.payload);
      tx_pair_[tx] = msg.src + "->" + req.target_enb;
      ++m_.attestation_pairs[tx_pair_[tx]];
      break;
    }
    case MessageKind::NonceTransfer:
    case MessageKind::AttestationSubmit:
    case MessageKind::AttestationAck:
      if (auto it = tx_pair_.find(tx); it != tx_pair_.end()) ++m_.attestation_pairs[it->second];
      break;
    default: break;
  }

  if (msg.kind() == MessageKind::AttestationSubmit && !replay_captured_.contains(msg.src)) {
    const scenario::AttackSpec* spec = nullptr;
    if (attack_active(scenario::AttackKind::NonceReplay, msg.src, &spec)) {
      replay_captured_.insert(msg.src);
      log("attack", msg.src, {{"attack", "NonceReplay"}, {"action", "captured"}, {"message", msg.id}});
      for (int i = 1; i <= spec->replay_count; ++i) {
        Message copy = msg;
        schedule(now_ + seconds(i * spec->replay_interval), EventKind::AttackAction, [this, copy, i] {
          log("attack", copy.src, {{"attack", "NonceReplay"}, {"action", "replay"}, {"attempt", i}});
          send(copy);
        });
      }
    }
  }

  if (muted(msg.src)) {
    drop(msg, "shielded");
    return;
  }
  const Delivery d = deliver(msg, latency_, drops_, rng_latency_, rng_drop_);
  if (d.dropped) {
    drop(msg, d.reason);
    return;
  }
  schedule(d.at, EventKind::MessageDelivery, [this, msg] { on_delivery(msg); }, msg);
}

void Engine::drop(const Message& msg, const std::string& reason) {
  const std::string kind(protocol::to_string(msg.kind()));
  log("drop", msg.dst,
      {{"id", msg.id}, {"kind", kind}, {"src", msg.src}, {"dst", msg.dst}, {"reason", reason}});
  ++m_.by_sender[msg.src][kind].dropped;
  ++m_.by_kind[kind].dropped;
  ++m_.drops_by_reason[reason];
}

void Engine::on_delivery(const Message& msg) {
  if (muted(msg.dst)) {
    drop(msg, "shielded");
    return;
  }
  const auto it = entities_.find(msg.dst);
  if (it == entities_.end()) {
    drop(msg, "unknown_destination");
    return;
  }
  const std::string kind(protocol::to_string(msg.kind()));
  Json detail{{"id", msg.id}, {"kind", kind}, {"src", msg.src}, {"dst", msg.dst}};
  if (const std::string tx = protocol::transaction_of(msg); !tx.empty()) detail["transaction"] = tx;
  log("deliver", msg.dst, std::move(detail));
  ++m_.by_sender[msg.src][kind].delivered;
  ++m_.by_kind[kind].delivered;
  ++m_.received[msg.dst][kind];
  it->second->on_message(msg, *this);
}

void Engine::schedule_timer(const std::string& entity, SimTime delay, std::string tag) {
  schedule(now_ + delay, EventKind::TimerFire, [this, entity, t = std::move(tag)] {
    if (const auto it = entities_.find(entity); it != entities_.end()) it->second->on_timer(t, *this);
  });
}

void Engine::command_handover(const std::string& mt, const std::string& transaction) {
  const SimTime at = now_ + latency_.sample(rng_latency_);
  schedule(at, EventKind::TimerFire, [this, mt, transaction] {
    MtRuntime* rt = runtime(mt);
    if (rt == nullptr) return;
    if (muted(mt)) {
      log("drop_command", mt, {{"transaction", transaction}, {"reason", "shielded"}});
      return;
    }
    rt->device->on_handover_command(transaction, *this);
  });
}

void Engine::record(std::string_view kind, const std::string& entity, Json detail) {
  if (kind == "verify") {
    const std::string verdict = detail.at("verdict").get<std::string>();
    if (verdict == "Accept") {
      ++m_.attestations_accepted;
    } else {
      ++m_.attestations_rejected[reason_of(verdict)];
    }
  } else if (kind == "register") {
    if (detail.at("fresh").get<bool>()) {
      ++m_.registrations;
      ++m_.judder[detail.at("mt").get<std::string>()];
    } else {
      ++m_.refreshes;
    }
  } else if (kind == "deregister") {
    ++m_.deregistrations;
  } else if (kind == "expire") {
    ++m_.expirations;
  } else if (kind == "handover") {
    if (detail.at("attested").get<bool>()) {
      ++m_.handovers_attested;
    } else {
      ++m_.handovers_plain;
    }
  } else if (kind == "handover_aborted") {
    ++m_.handovers_aborted;
  } else if (kind == "fix_dropped") {
    ++m_.fixes_dropped;
  } else if (kind == "phase") {
    m_.phases[entity].push_back(detail.at("to").get<std::string>());
    dirty_.insert(entity);
  } else if (kind == "policy") {
    dirty_.insert(entity);
  } else if (kind == "warning" && detail.contains("reason")) {
    m_.warnings.push_back(entity + ": " + detail.at("reason").get<std::string>());
  }
  log(kind, entity, std::move(detail));
}

void Engine::check_coupling(const MtRuntime& rt) const {
  const MobileTerminal& mt = *rt.device;
  device::FunctionState expected = device::default_state(cfg_.service.functions, cfg_.service.services);
  switch (mt.phase()) {
    case DevicePhase::LteActiveSp:
    case DevicePhase::Deregistering: expected = device::apply_policy(expected, *mt.lte().p_sp); break;
    case DevicePhase::EnforcingPz: expected = device::apply_policy(expected, *mt.lte().p_pz); break;
    default: break;
  }
  if (mt.functions() != expected) {
    throw Error(ErrorCode::InvariantBreach, rt.spec.id + ": function state does not match phase " +
                                                std::string(device::to_string(mt.phase())));
  }
}

void Engine::setup() {
  log("header", "sim",
      {{"scenario", cfg_.name},
       {"seed", seed_},
       {"schema_version", cfg_.schema_version},
       {"grid", {{"cell_radius", cfg_.grid.cell_radius}, {"extent", cfg_.grid.extent}}},
       {"mts", sc_.mts.size()},
       {"warnings", sc_.warnings}});

  service_.emplace(protocol::configure_service(sc_.request, sc_.grid));
  protocol::TltacOptions topt;
  topt.notify_tltsr_on_exit = cfg_.service.notify_tltsr_on_exit;
  topt.expire_after = seconds(cfg_.engine.expire_after);
  tltac_ = std::make_unique<protocol::Tltac>(sc_.request, service_->zone, topt);
  tltsr_ = std::make_unique<protocol::PassiveEntity>(cfg_.service.tltsr);
  entities_[tltac_->id()] = tltac_.get();
  entities_[agps_.id()] = &agps_;
  entities_[agw_.id()] = &agw_;
  entities_[tltsr_->id()] = tltsr_.get();

  const protocol::VerifierContext verifier{&sc_.rims, &credentials_};
  for (CellId c : sc_.grid.cells()) {
    auto enb = std::make_unique<protocol::ENodeB>(c, verifier);
    entities_[enb->id()] = enb.get();
    enbs_.emplace(c, std::move(enb));
  }

  const geometry::ZoneMap& zone = service_->zone;
  Json counts{{"cover", zone.cover.size()}, {"c1", zone.c1.size()}, {"c0", zone.c0.size()}};
  for (std::size_t i = 0; i < zone.outer_layers.size(); ++i) {
    counts["c-" + std::to_string(i + 1)] = zone.outer_layers[i].size();
  }
  log("zone", std::string(protocol::kTltac),
      {{"counts", counts}, {"op_scale", zone.op_scale}, {"requested_op_scale", zone.requested_op_scale}});

  device::DeviceOptions dopt;
  dopt.debounce_k = cfg_.engine.debounce_k;
  dopt.policy_timeout = seconds(cfg_.engine.policy_timeout);
  dopt.dereg_timeout = seconds(cfg_.engine.dereg_timeout);
  dopt.handover_timeout = seconds(cfg_.engine.handover_timeout);
  dopt.attestation_timeout = seconds(cfg_.engine.policy_timeout);
  dopt.collaborative_authz = cfg_.engine.collaborative_authz;

  mts_.reserve(sc_.mts.size());
  for (const scenario::MtSpec& spec : sc_.mts) {
    std::vector<trust::Component> manifest;
    for (const trust::Component& c : sc_.components) {
      if (spec.manifest.empty() || std::ranges::find(spec.manifest, c.name) != spec.manifest.end()) {
        manifest.push_back(c);
      }
    }
    const bool tampered = std::ranges::any_of(cfg_.attacks, [&](const scenario::AttackSpec& a) {
      return a.kind == scenario::AttackKind::TamperedLte && a.target == spec.id;
    });
    if (tampered) {
      for (trust::Component& c : manifest) {
        if (c.name == trust::kLteComponent) c.digest = trust::Digest::of(c.digest.hex() + "/tampered");
      }
      log("attack", spec.id, {{"attack", "TamperedLte"}, {"action", "lte_digest_altered"}});
    }

    device::DeviceConfig dc;
    dc.mt_id = spec.id;
    dc.functions = cfg_.service.functions;
    dc.services = cfg_.service.services;
    try {
      dc.platform = trust::secure_boot(manifest, sc_.rims, cfg_.trust_root);
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, "mts '" + spec.id + "'.manifest: " + e.what());
    }
    dc.credential = credentials_.issue(spec.id);
    dc.secret = *credentials_.secret(dc.credential.key_id);
    Json boot{{"state", trust::to_string(dc.platform.state)}, {"log_entries", dc.platform.log.size()}};
    if (dc.platform.failed_at) boot["failed_component"] = dc.platform.log[*dc.platform.failed_at].component_name;
    log("boot", spec.id, std::move(boot));

    MtRuntime rt;
    rt.device = std::make_unique<MobileTerminal>(std::move(dc), dopt);
    rt.device->set_grid(&sc_.grid);
    rt.spec = spec;
    rt.start = spec.trace.front().t;
    rt.end = spec.trace.back().t;
    m_.phases[spec.id] = {"Normal"};
    m_.judder[spec.id] = 0;
    mts_.push_back(std::move(rt));
  }
  for (auto& rt : mts_) entities_[rt.spec.id] = rt.device.get();

  for (Message& msg : service_->node_configs) send(std::move(msg));

  double first = 1e300;
  double last = 0.0;
  for (auto& rt : mts_) {
    first = std::min(first, rt.start);
    last = std::max(last, rt.end);
    MtRuntime* p = &rt;
    schedule(seconds(rt.start), EventKind::TraceWaypoint, [this, p] {
      const Point pos = position_at(p->spec.trace, to_seconds(now_));
      if (sc_.grid.covers(pos)) {
        const CellId cell = sc_.grid.cell_of_position(pos);
        p->device->attach(cell);
        p->attached = true;
        log("attach", p->spec.id, {{"cell", Json::array({cell.q, cell.r})}, {"position", point_json(pos)}});
      }
    });
    const SimTime period = seconds(cfg_.engine.poll_period);
    for (SimTime t = seconds(rt.start); t <= seconds(rt.end); t += period) {
      schedule(t, EventKind::LocationPoll, [this, p] { poll(*p); });
    }
    for (const scenario::Use& u : rt.spec.uses) {
      const std::string service = u.service;
      schedule(seconds(u.t), EventKind::TimerFire, [this, p, service] { p->device->authorize_local(service, *this); });
    }
  }
  last_trace_end_ = seconds(last);
  horizon_end_ = last_trace_end_ + seconds(cfg_.engine.horizon);

  const std::int64_t first_tick = (seconds(first).count() + tick_.count() - 1) / tick_.count();
  schedule(SimTime{first_tick * tick_.count()}, EventKind::TraceWaypoint, [this] { radio_tick(); });

  for (const auto& a : cfg_.attacks) {
    if (a.kind == scenario::AttackKind::TamperedLte || a.kind == scenario::AttackKind::NonceReplay) continue;
    const std::string name(scenario::to_string(a.kind));
    const std::string target = a.target;
    schedule(seconds(a.start), EventKind::AttackAction,
             [this, name, target] { log("attack", target, {{"attack", name}, {"action", "start"}}); });
    if (a.end <= to_seconds(horizon_end_)) {
      schedule(seconds(a.end), EventKind::AttackAction, [this, name, target, kind = a.kind] {
        log("attack", target, {{"attack", name}, {"action", "end"}});
        if (kind != scenario::AttackKind::ShieldedCrossing) return;
        MtRuntime* rt = runtime(target);
        const Point pos = position_at(rt->spec.trace, to_seconds(now_));
        if (!rt->attached || !sc_.grid.covers(pos)) return;
        const CellId cell = sc_.grid.cell_of_position(pos);
        if (rt->device->serving() != cell) {
          rt->device->attach(cell);
          log("reattach", target, {{"cell", Json::array({cell.q, cell.r})}});
        }
      });
    }
  }
}

void Engine::radio_tick() {
  const double t = to_seconds(now_);
  for (auto& rt : mts_) {
    if (t < rt.start || t > rt.end) continue;
    const Point pos = position_at(rt.spec.trace, t);
    if (rt.attached && !rt.device->handover_in_progress() && !muted(rt.spec.id) && rt.device->serving()) {
      if (auto trig = detect_handover(sc_.grid, service_->zone, *rt.device->serving(), pos)) {
        if (trig->sp_crossing && attack_active(scenario::AttackKind::HandoverSuppression, rt.spec.id)) {
          if (suppressed_logged_[rt.spec.id].insert(trig->target).second) {
            ++m_.handovers_suppressed;
            log("ho_suppressed", rt.spec.id,
                {{"source", Json::array({trig->source.q, trig->source.r})},
                 {"target", Json::array({trig->target.q, trig->target.r})}});
          }
        } else {
          rt.device->begin_handover(trig->source, trig->target, *this);
        }
      }
    }
    detect_violations(rt, pos);
  }
  if (now_ + tick_ <= last_trace_end_) schedule(now_ + tick_, EventKind::TraceWaypoint, [this] { radio_tick(); });
}

void Engine::poll(MtRuntime& rt) {
  const Point truth = position_at(rt.spec.trace, to_seconds(now_));
  Point perceived = truth;
  const scenario::AttackSpec* spoof = nullptr;
  if (attack_active(scenario::AttackKind::GpsSpoof, rt.spec.id, &spoof)) perceived = perceived + spoof->offset;
  const Point fix = gps_fix(perceived, cfg_.engine.gps_sigma, rng_noise_);
  ++m_.fixes_issued;
  log("fix", rt.spec.id, {{"fix", point_json(fix)}, {"true", point_json(truth)}});
  rt.device->on_location_fix(fix, *this);
}

void Engine::detect_violations(MtRuntime& rt, Point true_pos) {
  const MobileTerminal& mt = *rt.device;
  const geometry::ZoneMap& zone = service_->zone;
  const bool inside = geometry::point_in_polygon(true_pos, zone.pz);

  std::vector<std::string> enabled;
  if (inside) {
    for (const auto& [name, rule] : sc_.request.p_pz.function_rules) {
      if (rule == protocol::Rule::Disable && mt.functions().functions.at(name) == device::FunctionStatus::Enabled) {
        enabled.push_back(name);
      }
    }
  }
  std::vector<std::string> unlocked;
  const bool registered = tltac_->registry().contains(rt.spec.id);
  if (!inside || !registered) {
    for (const auto& [name, status] : mt.functions().vault) {
      if (status == device::VaultStatus::Unlocked) unlocked.push_back(name);
    }
  }

  auto track = [&](bool condition, std::optional<SimTime>& onset, bool& reported, const char* kind, Json detail) {
    if (!condition) {
      onset.reset();
      reported = false;
      return;
    }
    if (!onset) onset = now_;
    if (!reported && now_ - *onset > grace_) {
      reported = true;
      detail["onset_us"] = onset->count();
      detail["position"] = point_json(true_pos);
      detail["phase"] = device::to_string(mt.phase());
      m_.violations.push_back({now_, rt.spec.id, kind, detail});
      log("violation", rt.spec.id, {{"kind", kind}, {"detail", detail}});
    }
  };
  track(!enabled.empty(), rt.fe_onset, rt.fe_reported, "FunctionalEnforcement", {{"functions", enabled}});
  track(!unlocked.empty(), rt.ac_onset, rt.ac_reported, "AccessControl",
        {{"services", unlocked}, {"inside_pz", inside}, {"registered", registered}});
}

RunResult Engine::run() {
  setup();
  while (!queue_.empty()) {
    if (queue_.top().at > horizon_end_) break;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.at;
    current_seq_ = ev.seq;
    sub_ = 0;
    ++events_run_;
    ev.action();
    for (const std::string& id : dirty_) {
      if (const MtRuntime* rt = runtime(id)) check_coupling(*rt);
    }
    dirty_.clear();
  }

  // Anything still queued lies beyond the horizon. Undelivered messages are
  // closed out as drops so every send has an outcome.
  if (!queue_.empty()) {
    now_ = std::max(now_, horizon_end_);
    current_seq_ = next_seq_++;
    sub_ = 0;
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      ++m_.discarded_events;
      if (ev.message) drop(*ev.message, "horizon");
    }
  } else {
    current_seq_ = next_seq_++;
    sub_ = 0;
  }

  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  for (const auto& [kind, c] : m_.by_kind) {
    sent += c.sent;
    delivered += c.delivered;
    dropped += c.dropped;
  }
  log("end", "sim",
      {{"events", events_run_},
       {"sent", sent},
       {"delivered", delivered},
       {"dropped", dropped},
       {"discarded_events", m_.discarded_events}});

  RunResult result{out_.str(), std::move(m_), {}, service_->zone, {}};
  for (const auto& rt : mts_) result.phase_history[rt.spec.id] = rt.device->phase_history();

  std::ostringstream s;
  const MetricsReport& r = result.metrics;
  s << "scenario: " << r.scenario << "\n";
  s << "seed: " << r.seed << (r.seed == cfg_.seed ? " (scenario default)" : "") << "\n";
  s << "mobile terminals: " << mts_.size() << "\n";
  s << "zone: cover=" << result.zone.cover.size() << " c1=" << result.zone.c1.size()
    << " c0=" << result.zone.c0.size() << " op_scale=" << result.zone.op_scale << "\n";
  s << "messages: sent=" << sent << " delivered=" << delivered << " dropped=" << dropped << "\n";
  s << "registrations: " << r.registrations << " refreshes: " << r.refreshes
    << " deregistrations: " << r.deregistrations << " expirations: " << r.expirations << "\n";
  s << "attestation: accepted=" << r.attestations_accepted;
  for (const auto& [reason, n] : r.attestations_rejected) s << " " << reason << "=" << n;
  s << "\n";
  s << "handovers: attested=" << r.handovers_attested << " plain=" << r.handovers_plain
    << " suppressed=" << r.handovers_suppressed << " aborted=" << r.handovers_aborted << "\n";
  s << "judder (max per MT): " << r.judder_max() << "\n";
  s << "violations: FunctionalEnforcement=" << r.violation_count("FunctionalEnforcement")
    << " AccessControl=" << r.violation_count("AccessControl") << "\n";
  s << "fixes: issued=" << r.fixes_issued << " dropped=" << r.fixes_dropped << "\n";
  if (!r.attestation_pairs.empty()) {
    s << "attestation messages by eNB pair:\n";
    for (const auto& [pair, n] : r.attestation_pairs) s << "  " << pair << ": " << n << "\n";
  }
  for (const auto& w : r.warnings) s << "warning: " << w << "\n";
  result.summary = s.str();
  return result;
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::MessageDelivery: return "MessageDelivery";
    case EventKind::LocationPoll: return "LocationPoll";
    case EventKind::TimerFire: return "TimerFire";
    case EventKind::TraceWaypoint: return "TraceWaypoint";
    case EventKind::AttackAction: return "AttackAction";
  }
  return "?";
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (char c : name) words.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

Point position_at(const std::vector<scenario::Waypoint>& trace, double t) {
  if (trace.empty()) throw Error(ErrorCode::ConfigError, "empty mobility trace");
  if (t <= trace.front().t) return trace.front().p;
  if (t >= trace.back().t) return trace.back().p;
  const auto it = std::ranges::upper_bound(trace, t, {}, &scenario::Waypoint::t);
  const scenario::Waypoint& b = *it;
  const scenario::Waypoint& a = *(it - 1);
  if (t == a.t) return a.p;
  const double f = (t - a.t) / (b.t - a.t);
  return a.p + f * (b.p - a.p);
}

Point gps_fix(Point true_pos, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return true_pos;
  std::normal_distribution<double> noise(0.0, sigma);
  const double dx = noise(rng);
  const double dy = noise(rng);
  return {true_pos.x + dx, true_pos.y + dy};
}

std::optional<HandoverTrigger> detect_handover(const geometry::HexGrid& grid, const geometry::ZoneMap& zone,
                                               CellId current, Point true_pos) {
  if (!grid.covers(true_pos)) return std::nullopt;
  // A position on the serving hex's boundary stays with the serving cell.
  if (grid.contains(current) && grid.hex_contains(current, true_pos)) return std::nullopt;
  const CellId cell = grid.cell_of_position(true_pos);
  if (cell == current) return std::nullopt;
  return HandoverTrigger{current, cell, zone.cover.contains(cell) && !zone.cover.contains(current)};
}

SimTime LatencyModel::sample(std::mt19937_64& rng) const {
  if (max <= min) return min;
  std::uniform_int_distribution<std::int64_t> d(min.count(), max.count());
  return SimTime{d(rng)};
}

DropModel::DropModel(double probability, std::vector<scenario::DropRule> rules)
    : probability_(probability), rules_(std::move(rules)), used_(rules_.size(), 0) {}

std::optional<std::string> DropModel::should_drop(MessageKind kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::string_view name = protocol::to_string(kind);
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const scenario::DropRule& r = rules_[i];
    if (r.kind != name) continue;
    if (r.max_count >= 0 && used_[i] >= r.max_count) continue;
    if (u(rng) < r.probability) {
      ++used_[i];
      return "rule:" + r.kind;
    }
  }
  if (probability_ > 0.0 && u(rng) < probability_) return "random";
  return std::nullopt;
}

Delivery deliver(const Message& msg, const LatencyModel& latency, DropModel& drops, std::mt19937_64& latency_rng,
                 std::mt19937_64& drop_rng) {
  if (auto reason = drops.should_drop(msg.kind(), drop_rng)) return Delivery{true, *reason, msg.sent_at};
  return Delivery{false, {}, msg.sent_at + latency.sample(latency_rng)};
}

std::uint64_t MetricsReport::judder_max() const {
  std::uint64_t best = 0;
  for (const auto& [mt, n] : judder) best = std::max(best, n);
  return best;
}

std::uint64_t MetricsReport::violation_count(std::string_view kind) const {
  return static_cast<std::uint64_t>(std::ranges::count_if(violations, [&](const Violation& v) { return v.kind == kind; }));
}

Json MetricsReport::to_json() const {
  auto counts = [](const MessageCounts& c) {
    return Json{{"sent", c.sent}, {"delivered", c.delivered}, {"dropped", c.dropped}};
  };
  Json senders = Json::object();
  for (const auto& [entity, kinds] : by_sender) {
    Json k = Json::object();
    for (const auto& [kind, c] : kinds) k[kind] = counts(c);
    senders[entity] = k;
  }
  Json kinds = Json::object();
  for (const auto& [kind, c] : by_kind) kinds[kind] = counts(c);
  Json violations_json = Json::array();
  for (const Violation& v : violations) {
    violations_json.push_back({{"t_us", v.t.count()}, {"mt", v.mt}, {"kind", v.kind}, {"detail", v.detail}});
  }
  std::uint64_t total_pairs = 0;
  for (const auto& [pair, n] : attestation_pairs) total_pairs += n;

  return Json{
      {"scenario", scenario},
      {"seed", seed},
      {"messages", {{"by_kind", kinds}, {"by_sender", senders}, {"received", received}}},
      {"registrations", registrations},
      {"refreshes", refreshes},
      {"deregistrations", deregistrations},
      {"expirations", expirations},
      {"attestation", {{"accepted", attestations_accepted}, {"rejected", attestations_rejected}}},
      {"judder", judder},
      {"judder_max", judder_max()},
      {"violations", violations_json},
      {"violation_counts",
       {{"FunctionalEnforcement", violation_count("FunctionalEnforcement")},
        {"AccessControl", violation_count("AccessControl")}}},
      {"fixes", {{"issued", fixes_issued}, {"dropped", fixes_dropped}}},
      {"drops_by_reason", drops_by_reason},
      {"handovers",
       {{"attested", handovers_attested},
        {"plain", handovers_plain},
        {"suppressed", handovers_suppressed},
        {"aborted", handovers_aborted}}},
      {"attestation_pairs", attestation_pairs},
      {"attestation_messages", total_pairs},
      {"phases", phases},
      {"discarded_events", discarded_events},
      {"warnings", warnings},
  };
}

RunResult run_scenario(const scenario::ResolvedScenario& scenario, std::uint64_t seed) {
  Engine engine(scenario, seed);
  return engine.run();
}

Json zone_to_json(const geometry::ZoneMap& zone) {
  Json pz = Json::array();
  for (Point p : zone.pz.vertices()) pz.push_back(point_json(p));
  Json op = Json::array();
  for (Point p : zone.op.vertices()) op.push_back(point_json(p));
  Json sp = Json::array();
  for (Point p : zone.sp) sp.push_back(point_json(p));
  Json layers = Json::array();
  for (const auto& layer : zone.outer_layers) layers.push_back(cells_json(layer));
  Json counts{{"cover", zone.cover.size()}, {"c1", zone.c1.size()}, {"c0", zone.c0.size()}};
  for (std::size_t i = 0; i < zone.outer_layers.size(); ++i) {
    counts["c-" + std::to_string(i + 1)] = zone.outer_layers[i].size();
  }
  return Json{{"pz", pz},
              {"cover", cells_json(zone.cover)},
              {"c1", cells_json(zone.c1)},
              {"c0", cells_json(zone.c0)},
              {"outer_layers", layers},
              {"sp", sp},
              {"op", op},
              {"op_scale", zone.op_scale},
              {"requested_op_scale", zone.requested_op_scale},
              {"counts", counts}};
}

}  // namespace tlta::sim
