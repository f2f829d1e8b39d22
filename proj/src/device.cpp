#include "tlta/device.hpp"

#include <array>
#include <utility>

#include "tlta/error.hpp"

namespace tlta::device {

namespace {

using protocol::Context;
using protocol::Message;
using protocol::PolicyId;

constexpr std::array<std::string_view, 5> kPhaseNames{"Normal", "AwaitingAttestation", "LteActiveSp", "EnforcingPz",
                                                      "Deregistering"};
constexpr std::size_t kFixRing = 8;

std::pair<std::string, std::string> split_tag(const std::string& tag) {
  const auto slash = tag.find('/');
  if (slash == std::string::npos) return {tag, {}};
  return {tag.substr(0, slash), tag.substr(slash + 1)};
}

protocol::Json cell_json(CellId c) { return protocol::Json::array({c.q, c.r}); }

}  // namespace

std::string_view to_string(DevicePhase phase) { return kPhaseNames.at(static_cast<std::size_t>(phase)); }

std::optional<DevicePhase> phase_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kPhaseNames.size(); ++i) {
    if (kPhaseNames[i] == name) return static_cast<DevicePhase>(i);
  }
  return std::nullopt;
}

bool transition_legal(DevicePhase from, DevicePhase to) {
  using enum DevicePhase;
  switch (from) {
    case Normal: return to == AwaitingAttestation;
    case AwaitingAttestation: return to == LteActiveSp || to == Normal;
    case LteActiveSp: return to == EnforcingPz || to == Deregistering;
    case EnforcingPz: return to == LteActiveSp;
    case Deregistering: return to == Normal;
  }
  return false;
}

FunctionState default_state(const std::vector<std::string>& functions, const std::vector<std::string>& services) {
  FunctionState fs;
  for (const auto& f : functions) fs.functions[f] = FunctionStatus::Enabled;
  for (const auto& s : services) fs.vault[s] = VaultStatus::Locked;
  return fs;
}

FunctionState apply_policy(const FunctionState& fs, const protocol::Policy& p) {
  FunctionState out = fs;
  for (const auto& [name, rule] : p.function_rules) {
    auto it = out.functions.find(name);
    if (it == out.functions.end()) {
      throw Error(ErrorCode::UnknownFunction, "policy " + std::string(protocol::to_string(p.id)) +
                                                  " names unknown function '" + name + "'");
    }
    it->second = rule == protocol::Rule::Enable ? FunctionStatus::Enabled : FunctionStatus::Disabled;
  }
  for (const auto& grant : p.access_grants) {
    if (!out.vault.contains(grant)) {
      throw Error(ErrorCode::UnknownFunction, "policy " + std::string(protocol::to_string(p.id)) +
                                                  " grants unknown service '" + grant + "'");
    }
  }
  for (auto& [service, status] : out.vault) {
    status = p.access_grants.contains(service) ? VaultStatus::Unlocked : VaultStatus::Locked;
  }
  return out;
}

protocol::Json to_json(const FunctionState& fs) {
  protocol::Json functions = protocol::Json::object();
  for (const auto& [name, status] : fs.functions) {
    functions[name] = status == FunctionStatus::Enabled ? "Enabled" : "Disabled";
  }
  protocol::Json vault = protocol::Json::object();
  for (const auto& [name, status] : fs.vault) vault[name] = status == VaultStatus::Locked ? "Locked" : "Unlocked";
  return {{"functions", functions}, {"vault", vault}};
}

MobileTerminal::MobileTerminal(DeviceConfig config, DeviceOptions options)
    : config_(std::move(config)), options_(options), fs_(default_state(config_.functions, config_.services)) {
  if (options_.debounce_k < 1) throw Error(ErrorCode::ConfigError, "debounce k must be at least 1");
}

void MobileTerminal::transition(DevicePhase to, std::string_view cause, Context& ctx) {
  if (!transition_legal(phase_, to)) {
    throw Error(ErrorCode::InvariantBreach, id() + ": illegal phase change " + std::string(to_string(phase_)) +
                                                " -> " + std::string(to_string(to)));
  }
  ctx.record("phase", id(), {{"from", to_string(phase_)}, {"to", to_string(to)}, {"cause", cause}});
  phase_ = to;
  history_.push_back(to);
}

void MobileTerminal::enforce(std::optional<PolicyId> policy, Context& ctx) {
  FunctionState base = default_state(config_.functions, config_.services);
  if (policy == PolicyId::Sp) {
    fs_ = apply_policy(base, *lte_.p_sp);
  } else if (policy == PolicyId::Pz) {
    fs_ = apply_policy(base, *lte_.p_pz);
  } else {
    fs_ = std::move(base);
  }
  lte_.current_policy = policy;
  ctx.record("policy", id(),
             {{"policy", policy ? protocol::to_string(*policy) : "default"}, {"state", to_json(fs_)}});
}

void MobileTerminal::take_download(const protocol::PolicyDownload& d) {
  lte_.p_sp = d.p_sp;
  lte_.p_pz = d.p_pz;
  lte_.pz = d.pz;
  lte_.op = d.op;
  lte_.policy_version = d.version;
}

void MobileTerminal::activate(Context& ctx) {
  take_download(*download_);
  download_.reset();
  activation_acked_ = false;
  attesting_transaction_.clear();
  lte_.active = true;
  lte_.pz_in_count = lte_.pz_out_count = lte_.op_out_count = 0;
  lte_.last_fixes.clear();
  transition(DevicePhase::LteActiveSp, "lte_activated", ctx);
  enforce(PolicyId::Sp, ctx);
}

void MobileTerminal::deactivate(std::string_view cause, Context& ctx) {
  lte_ = LteState{};
  transition(DevicePhase::Normal, cause, ctx);
  enforce(std::nullopt, ctx);
}

void MobileTerminal::send_deregister(Context& ctx) {
  ctx.send(protocol::make_message(id(), std::string(protocol::kTltac), protocol::Deregister{id()}));
  ++dereg_round_;
  ctx.schedule_timer(id(), options_.dereg_timeout, "dereg_timeout/" + std::to_string(dereg_round_));
}

void MobileTerminal::begin_handover(CellId source, CellId target, Context& ctx) {
  if (pending_) return;
  const std::string tx = id() + "/ho" + std::to_string(next_transaction_++);
  pending_ = PendingHandover{tx, source, target, false, std::nullopt};
  ctx.send(protocol::make_message(id(), protocol::enb_id(source), protocol::MeasurementReport{tx, source, target}));
  ctx.schedule_timer(id(), options_.handover_timeout, "ho_timeout/" + tx);
}

void MobileTerminal::on_handover_command(const std::string& transaction, Context& ctx) {
  if (!pending_ || pending_->transaction != transaction) return;
  // Plain handover: execute towards the target, completion on HoAck.
  ctx.send(protocol::make_message(id(), protocol::enb_id(pending_->target), protocol::HoExecute{transaction}));
}

void MobileTerminal::on_message(const Message& msg, Context& ctx) {
  if (const auto* m = std::get_if<protocol::AttestationRequest>(&msg.payload)) {
    if (!pending_ || pending_->transaction != m->transaction) {
      ctx.record("warning", id(), {{"reason", "attestation request for unknown handover"}, {"transaction", m->transaction}});
      return;
    }
    pending_->nonce = m->nonce;
    if (phase_ == DevicePhase::Normal) {
      transition(DevicePhase::AwaitingAttestation, "sp_handover", ctx);
      activation_acked_ = false;
      download_.reset();
      pending_->attest = true;
    } else if (phase_ == DevicePhase::LteActiveSp || phase_ == DevicePhase::EnforcingPz) {
      pending_->attest = true;
    }
    if (pending_->attest) attesting_transaction_ = m->transaction;
    ctx.send(protocol::make_message(id(), m->target_enb, protocol::HoExecute{m->transaction}));
    return;
  }

  if (const auto* m = std::get_if<protocol::HoAck>(&msg.payload)) {
    if (!pending_ || pending_->transaction != m->transaction) return;
    serving_ = pending_->target;
    ctx.record("handover", id(),
               {{"transaction", m->transaction},
                {"source", cell_json(pending_->source)},
                {"target", cell_json(pending_->target)},
                {"attested", pending_->attest}});
    if (pending_->attest && pending_->nonce) {
      const auto pkg =
          trust::build_attestation_package(config_.platform, config_.credential, config_.secret, *pending_->nonce);
      ctx.send(protocol::make_message(id(), msg.src, protocol::AttestationSubmit{m->transaction, pkg}));
      ctx.schedule_timer(id(), options_.attestation_timeout, "attestation_timeout/" + m->transaction);
    }
    pending_.reset();
    return;
  }

  if (const auto* m = std::get_if<protocol::AttestationAck>(&msg.payload)) {
    if (attesting_transaction_.empty() || m->transaction != attesting_transaction_) return;
    if (phase_ == DevicePhase::AwaitingAttestation) {
      if (!m->activate_lte) {
        attesting_transaction_.clear();
        transition(DevicePhase::Normal, "attestation_rejected: " + m->verdict, ctx);
        return;
      }
      activation_acked_ = true;
      if (download_) {
        activate(ctx);
      } else {
        ctx.schedule_timer(id(), options_.policy_timeout, "policy_timeout/" + m->transaction);
      }
      return;
    }
    ctx.record("refresh", id(), {{"transaction", m->transaction}, {"verdict", m->verdict}});
    attesting_transaction_.clear();
    return;
  }

  if (const auto* m = std::get_if<protocol::PolicyDownload>(&msg.payload)) {
    if (phase_ == DevicePhase::AwaitingAttestation) {
      download_ = *m;
      if (activation_acked_) activate(ctx);
    } else if (phase_ == DevicePhase::LteActiveSp || phase_ == DevicePhase::EnforcingPz) {
      take_download(*m);
      enforce(lte_.current_policy, ctx);
    } else {
      ctx.record("warning", id(), {{"reason", "unsolicited policy download"}, {"phase", to_string(phase_)}});
    }
    return;
  }

  if (std::holds_alternative<protocol::DeregisterAck>(msg.payload)) {
    if (phase_ == DevicePhase::Deregistering) deactivate("deregistered", ctx);
    return;
  }

  if (const auto* m = std::get_if<protocol::AuthzResponse>(&msg.payload)) {
    ctx.record("authz", id(),
               {{"service", m->service}, {"granted", m->granted}, {"reason", m->reason}, {"mode", "collaborative"}});
    return;
  }
}

void MobileTerminal::on_timer(const std::string& tag, Context& ctx) {
  const auto [kind, arg] = split_tag(tag);
  if (kind == "ho_timeout") {
    if (!pending_ || pending_->transaction != arg) return;
    ctx.record("handover_aborted", id(), {{"transaction", arg}});
    pending_.reset();
    if (phase_ == DevicePhase::AwaitingAttestation && attesting_transaction_ == arg) {
      attesting_transaction_.clear();
      transition(DevicePhase::Normal, "handover_aborted", ctx);
    }
  } else if (kind == "attestation_timeout") {
    if (phase_ == DevicePhase::AwaitingAttestation && attesting_transaction_ == arg && !activation_acked_) {
      ctx.record("warning", id(), {{"reason", "no attestation ack"}, {"transaction", arg}});
      attesting_transaction_.clear();
      transition(DevicePhase::Normal, "attestation_timeout", ctx);
    }
  } else if (kind == "policy_timeout") {
    if (phase_ == DevicePhase::AwaitingAttestation && attesting_transaction_ == arg && activation_acked_ &&
        !download_) {
      ctx.record("warning", id(), {{"reason", "no policy download"}, {"transaction", arg}});
      attesting_transaction_.clear();
      activation_acked_ = false;
      transition(DevicePhase::Normal, "policy_timeout", ctx);
    }
  } else if (kind == "dereg_timeout") {
    if (phase_ != DevicePhase::Deregistering || arg != std::to_string(dereg_round_)) return;
    ctx.record("warning", id(), {{"reason", "no deregister ack"}});
    deactivate("dereg_timeout", ctx);
    if (dereg_retries_ < 1) {
      ++dereg_retries_;
      ctx.send(protocol::make_message(id(), std::string(protocol::kTltac), protocol::Deregister{id()}));
    }
  }
}

std::optional<DevicePhase> MobileTerminal::on_location_fix(geometry::Point fix, Context& ctx) {
  if (grid_ != nullptr && !grid_->covers(fix)) {
    ++fixes_dropped_;
    ctx.record("fix_dropped", id(), {{"x", fix.x}, {"y", fix.y}});
    return std::nullopt;
  }
  if (!lte_.active || (phase_ != DevicePhase::LteActiveSp && phase_ != DevicePhase::EnforcingPz)) return std::nullopt;

  Fix f{ctx.now(), fix, geometry::point_in_polygon(fix, *lte_.pz), geometry::point_in_polygon(fix, *lte_.op)};
  lte_.last_fixes.push_back(f);
  if (lte_.last_fixes.size() > kFixRing) lte_.last_fixes.pop_front();
  if (f.in_pz) {
    ++lte_.pz_in_count;
    lte_.pz_out_count = 0;
  } else {
    ++lte_.pz_out_count;
    lte_.pz_in_count = 0;
  }
  lte_.op_out_count = f.in_op ? 0 : lte_.op_out_count + 1;

  const int k = options_.debounce_k;
  if (phase_ == DevicePhase::LteActiveSp) {
    if (lte_.op_out_count >= k) {
      dereg_retries_ = 0;
      transition(DevicePhase::Deregistering, "op_exit", ctx);
      send_deregister(ctx);
      return phase_;
    }
    if (lte_.pz_in_count >= k) {
      transition(DevicePhase::EnforcingPz, "pz_entry", ctx);
      enforce(PolicyId::Pz, ctx);
      return phase_;
    }
  } else if (lte_.pz_out_count >= k) {
    transition(DevicePhase::LteActiveSp, "pz_exit", ctx);
    enforce(PolicyId::Sp, ctx);
    return phase_;
  }
  return std::nullopt;
}

std::optional<protocol::AuthzDecision> MobileTerminal::authorize_local(const std::string& service, Context& ctx) {
  const bool active = phase_ == DevicePhase::LteActiveSp || phase_ == DevicePhase::EnforcingPz ||
                      phase_ == DevicePhase::Deregistering;
  protocol::AuthzDecision d;
  if (!active) {
    d = {false, "LteInactive"};
  } else if (options_.collaborative_authz) {
    ctx.send(protocol::make_message(id(), std::string(protocol::kTltac),
                                    protocol::AuthzRequest{id(), service, phase_ == DevicePhase::EnforcingPz}));
    return std::nullopt;
  } else if (phase_ != DevicePhase::EnforcingPz) {
    d = {false, "OutsidePz"};
  } else if (!lte_.p_pz->access_grants.contains(service)) {
    d = {false, "NotGranted"};
  } else {
    d = {true, "Granted"};
  }
  ctx.record("authz", id(), {{"service", service}, {"granted", d.granted}, {"reason", d.reason}, {"mode", "local"}});
  return d;
}

}  // namespace tlta::device
