#include "tlta/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <type_traits>

#include "tlta/error.hpp"

namespace tlta::protocol {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::array<std::string_view, kMessageKindCount> kKindNames{
    "MeasurementReport", "HoRequest",     "HoResponse",     "AttestationRequest", "NonceTransfer",
    "HoExecute",         "HoAck",         "AttestationSubmit", "AttestationAck", "Register",
    "RegisterAck",       "PolicyDownload", "AgpsRegister",  "AgpsAssist",         "AuthzRequest",
    "AuthzResponse",     "Deregister",    "DeregisterAck",  "NodeConfigure"};

// ---- field codecs

Json cell_json(CellId c) { return Json::array({c.q, c.r}); }
CellId cell_from(const Json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

Json polygon_json(const geometry::Polygon& p) {
  Json out = Json::array();
  for (const auto& v : p.vertices()) out.push_back(Json::array({v.x, v.y}));
  return out;
}
geometry::Polygon polygon_from(const Json& j) {
  std::vector<geometry::Point> pts;
  for (const Json& v : j) pts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  return geometry::Polygon(std::move(pts));
}

Json policy_json(const Policy& p) {
  Json functions = Json::object();
  for (const auto& [name, rule] : p.function_rules) functions[name] = to_string(rule);
  Json grants = Json::array();
  for (const auto& g : p.access_grants) grants.push_back(g);
  return Json{{"id", to_string(p.id)}, {"functions", functions}, {"grants", grants}};
}
Policy policy_from(const Json& j) {
  Policy p;
  p.id = j.at("id").get<std::string>() == "P_pz" ? PolicyId::Pz : PolicyId::Sp;
  for (const auto& [name, rule] : j.at("functions").items()) {
    p.function_rules[name] = rule.get<std::string>() == "Disable" ? Rule::Disable : Rule::Enable;
  }
  for (const Json& g : j.at("grants")) p.access_grants.insert(g.get<std::string>());
  return p;
}

std::string nonce_hex(const trust::Nonce& n) { return trust::to_hex(n); }

Json package_json(const trust::AttestationPackage& pkg) {
  Json pcrs = Json::array();
  for (const auto& p : pkg.pcr_values) pcrs.push_back(Json::array({p.index, p.value.hex()}));
  Json log = Json::array();
  for (const auto& e : pkg.log) log.push_back(Json::array({e.component_name, e.digest.hex(), e.pcr_index}));
  return Json{{"nonce", nonce_hex(pkg.nonce)},
              {"pcrs", pcrs},
              {"log", log},
              {"credential",
               {{"mt_id", pkg.credential.mt_id}, {"key_id", pkg.credential.key_id}, {"issuer", pkg.credential.issuer}}},
              {"tag", pkg.tag.hex()}};
}
trust::AttestationPackage package_from(const Json& j) {
  trust::AttestationPackage pkg;
  pkg.nonce = trust::nonce_from_hex(j.at("nonce").get<std::string>());
  for (const Json& p : j.at("pcrs")) {
    pkg.pcr_values.push_back({p.at(0).get<std::uint32_t>(), trust::Digest::from_hex(p.at(1).get<std::string>())});
  }
  for (const Json& e : j.at("log")) {
    pkg.log.push_back({e.at(0).get<std::string>(), trust::Digest::from_hex(e.at(1).get<std::string>()),
                       e.at(2).get<std::uint32_t>()});
  }
  const Json& c = j.at("credential");
  pkg.credential = {c.at("mt_id").get<std::string>(), c.at("key_id").get<std::string>(),
                    c.at("issuer").get<std::string>()};
  pkg.tag = trust::Digest::from_hex(j.at("tag").get<std::string>());
  return pkg;
}

// ---- payload codecs

Json body(const MeasurementReport& m) {
  return {{"transaction", m.transaction}, {"source", cell_json(m.source)}, {"target", cell_json(m.target)}};
}
Json body(const HoRequest& m) {
  return {{"transaction", m.transaction},
          {"mt", m.mt},
          {"source", cell_json(m.source)},
          {"target", cell_json(m.target)}};
}
Json body(const HoResponse& m) {
  return {{"transaction", m.transaction}, {"attestation_required", m.attestation_required}};
}
Json body(const AttestationRequest& m) {
  return {{"transaction", m.transaction}, {"nonce", nonce_hex(m.nonce)}, {"target_enb", m.target_enb}};
}
Json body(const NonceTransfer& m) {
  return {{"transaction", m.transaction},
          {"mt", m.mt},
          {"nonce", nonce_hex(m.nonce)},
          {"issued_by", m.issued_by},
          {"issued_at_us", m.issued_at.count()}};
}
Json body(const HoExecute& m) { return {{"transaction", m.transaction}}; }
Json body(const HoAck& m) { return {{"transaction", m.transaction}}; }
Json body(const AttestationSubmit& m) { return {{"transaction", m.transaction}, {"package", package_json(m.package)}}; }
Json body(const AttestationAck& m) {
  return {{"transaction", m.transaction}, {"activate_lte", m.activate_lte}, {"verdict", m.verdict}};
}
Json body(const Register& m) {
  return {{"mt", m.mt},
          {"transaction", m.transaction},
          {"nonce", nonce_hex(m.nonce)},
          {"nonce_issuer", m.nonce_issuer},
          {"verdict", m.verdict}};
}
Json body(const RegisterAck& m) {
  return {{"mt", m.mt}, {"accepted", m.accepted}, {"policy_version", m.policy_version}};
}
Json body(const PolicyDownload& m) {
  return {{"mt", m.mt},
          {"p_sp", policy_json(m.p_sp)},
          {"p_pz", policy_json(m.p_pz)},
          {"pz", polygon_json(m.pz)},
          {"op", polygon_json(m.op)},
          {"version", m.version}};
}
Json body(const AgpsRegister& m) { return {{"mt", m.mt}, {"active", m.active}}; }
Json body(const AgpsAssist& m) { return {{"mt", m.mt}}; }
Json body(const AuthzRequest& m) { return {{"mt", m.mt}, {"service", m.service}, {"in_pz", m.in_pz}}; }
Json body(const AuthzResponse& m) {
  return {{"mt", m.mt}, {"service", m.service}, {"granted", m.granted}, {"reason", m.reason}};
}
Json body(const Deregister& m) { return {{"mt", m.mt}}; }
Json body(const DeregisterAck& m) { return {{"mt", m.mt}, {"removed", m.removed}}; }
Json body(const NodeConfigure& m) {
  Json cover = Json::array();
  for (const CellId& c : m.cover) cover.push_back(cell_json(c));
  return {{"service_id", m.service_id}, {"cell", cell_json(m.cell)}, {"role", m.role}, {"cover", cover}};
}

Payload payload_from(MessageKind kind, const Json& j) {
  auto s = [&](const char* key) { return j.at(key).get<std::string>(); };
  switch (kind) {
    case MessageKind::MeasurementReport:
      return MeasurementReport{s("transaction"), cell_from(j.at("source")), cell_from(j.at("target"))};
    case MessageKind::HoRequest:
      return HoRequest{s("transaction"), s("mt"), cell_from(j.at("source")), cell_from(j.at("target"))};
    case MessageKind::HoResponse:
      return HoResponse{s("transaction"), j.at("attestation_required").get<bool>()};
    case MessageKind::AttestationRequest:
      return AttestationRequest{s("transaction"), trust::nonce_from_hex(s("nonce")), s("target_enb")};
    case MessageKind::NonceTransfer:
      return NonceTransfer{s("transaction"), s("mt"), trust::nonce_from_hex(s("nonce")), s("issued_by"),
                           SimTime{j.at("issued_at_us").get<std::int64_t>()}};
    case MessageKind::HoExecute: return HoExecute{s("transaction")};
    case MessageKind::HoAck: return HoAck{s("transaction")};
    case MessageKind::AttestationSubmit: return AttestationSubmit{s("transaction"), package_from(j.at("package"))};
    case MessageKind::AttestationAck:
      return AttestationAck{s("transaction"), j.at("activate_lte").get<bool>(), s("verdict")};
    case MessageKind::Register:
      return Register{s("mt"), s("transaction"), trust::nonce_from_hex(s("nonce")), s("nonce_issuer"), s("verdict")};
    case MessageKind::RegisterAck:
      return RegisterAck{s("mt"), j.at("accepted").get<bool>(), j.at("policy_version").get<std::uint32_t>()};
    case MessageKind::PolicyDownload:
      return PolicyDownload{s("mt"),
                            policy_from(j.at("p_sp")),
                            policy_from(j.at("p_pz")),
                            polygon_from(j.at("pz")),
                            polygon_from(j.at("op")),
                            j.at("version").get<std::uint32_t>()};
    case MessageKind::AgpsRegister: return AgpsRegister{s("mt"), j.at("active").get<bool>()};
    case MessageKind::AgpsAssist: return AgpsAssist{s("mt")};
    case MessageKind::AuthzRequest: return AuthzRequest{s("mt"), s("service"), j.at("in_pz").get<bool>()};
    case MessageKind::AuthzResponse:
      return AuthzResponse{s("mt"), s("service"), j.at("granted").get<bool>(), s("reason")};
    case MessageKind::Deregister: return Deregister{s("mt")};
    case MessageKind::DeregisterAck: return DeregisterAck{s("mt"), j.at("removed").get<bool>()};
    case MessageKind::NodeConfigure: {
      std::vector<CellId> cover;
      for (const Json& c : j.at("cover")) cover.push_back(cell_from(c));
      return NodeConfigure{s("service_id"), cell_from(j.at("cell")), s("role"), std::move(cover)};
    }
  }
  throw Error(ErrorCode::ConfigError, "unknown message kind");
}

}  // namespace

std::string enb_id(CellId cell) { return "enb(" + std::to_string(cell.q) + "," + std::to_string(cell.r) + ")"; }

std::optional<CellId> cell_of_enb(std::string_view id) {
  if (!id.starts_with("enb(") || !id.ends_with(")")) return std::nullopt;
  const std::string_view inner = id.substr(4, id.size() - 5);
  const auto comma = inner.find(',');
  if (comma == std::string_view::npos) return std::nullopt;
  CellId cell;
  const auto a = std::from_chars(inner.data(), inner.data() + comma, cell.q);
  const auto b = std::from_chars(inner.data() + comma + 1, inner.data() + inner.size(), cell.r);
  if (a.ec != std::errc{} || b.ec != std::errc{}) return std::nullopt;
  return cell;
}

std::string_view to_string(PolicyId id) { return id == PolicyId::Sp ? "P_sp" : "P_pz"; }
std::string_view to_string(Rule rule) { return rule == Rule::Enable ? "Enable" : "Disable"; }

std::vector<std::string> validate_service_request(const ServiceRequest& req) {
  if (req.service_id.empty()) throw Error(ErrorCode::ConfigError, "service.id is empty");
  if (req.p_sp.id != PolicyId::Sp || req.p_pz.id != PolicyId::Pz) {
    throw Error(ErrorCode::ConfigError, "policies must be P_sp and P_pz");
  }
  for (const auto& [name, rule] : req.p_sp.function_rules) {
    if (!req.p_pz.function_rules.contains(name)) {
      throw Error(ErrorCode::ConfigError, "function '" + name + "' appears in P_sp but not in P_pz");
    }
  }
  for (const auto& [name, rule] : req.p_pz.function_rules) {
    if (!req.p_sp.function_rules.contains(name)) {
      throw Error(ErrorCode::ConfigError, "function '" + name + "' appears in P_pz but not in P_sp");
    }
  }
  std::vector<std::string> warnings;
  if (req.p_sp.function_rules == req.p_pz.function_rules && req.p_sp.access_grants == req.p_pz.access_grants) {
    warnings.emplace_back("P_sp and P_pz are identical; the protected zone changes nothing");
  }
  return warnings;
}

std::string_view to_string(MessageKind kind) { return kKindNames.at(static_cast<std::size_t>(kind)); }

std::optional<MessageKind> message_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<MessageKind>(i);
  }
  return std::nullopt;
}

Message make_message(std::string src, std::string dst, Payload payload) {
  if (src == dst) throw Error(ErrorCode::InvariantBreach, "message source equals destination: " + src);
  Message m;
  m.src = std::move(src);
  m.dst = std::move(dst);
  m.payload = std::move(payload);
  return m;
}

std::string encode(const Message& msg) {
  Json j{{"id", msg.id},
         {"kind", to_string(msg.kind())},
         {"src", msg.src},
         {"dst", msg.dst},
         {"sent_at_us", msg.sent_at.count()},
         {"payload", std::visit([](const auto& p) { return body(p); }, msg.payload)}};
  return j.dump();
}

Message decode(std::string_view bytes) {
  const Json j = Json::parse(bytes);
  const auto kind = message_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::ConfigError, "unknown message kind in encoded message");
  Message m;
  m.id = j.at("id").get<std::uint64_t>();
  m.src = j.at("src").get<std::string>();
  m.dst = j.at("dst").get<std::string>();
  m.sent_at = SimTime{j.at("sent_at_us").get<std::int64_t>()};
  m.payload = payload_from(*kind, j.at("payload"));
  return m;
}

Json summarize(const Message& msg) {
  Json detail = std::visit(
      overloaded{
          [](const AttestationSubmit& m) -> Json {
            return {{"transaction", m.transaction},
                    {"nonce", nonce_hex(m.package.nonce)},
                    {"key_id", m.package.credential.key_id},
                    {"log_entries", m.package.log.size()},
                    {"tag", m.package.tag.hex()}};
          },
          [](const PolicyDownload& m) -> Json {
            return {{"mt", m.mt}, {"version", m.version}, {"pz_vertices", m.pz.size()}, {"op_vertices", m.op.size()}};
          },
          [](const NodeConfigure& m) -> Json {
            return {{"service_id", m.service_id},
                    {"cell", cell_json(m.cell)},
                    {"role", m.role},
                    {"cover_cells", m.cover.size()}};
          },
          [](const auto& m) -> Json { return body(m); },
      },
      msg.payload);
  return Json{{"id", msg.id},
              {"kind", to_string(msg.kind())},
              {"src", msg.src},
              {"dst", msg.dst},
              {"body", std::move(detail)}};
}

std::string transaction_of(const Message& msg) {
  return std::visit(
      [](const auto& p) -> std::string {
        if constexpr (requires { p.transaction; }) {
          return p.transaction;
        } else {
          return {};
        }
      },
      msg.payload);
}

// ---------------------------------------------------------------- nonces

const IssuedNonce& NonceLedger::generate(const std::string& enb0, const std::string& transaction, SimTime now,
                                         std::mt19937_64& rng) {
  if (issued_.contains(transaction)) {
    throw Error(ErrorCode::DuplicateTransaction, "transaction '" + transaction + "' already carries a nonce");
  }
  IssuedNonce n;
  const std::uint64_t lo = rng();
  const std::uint64_t hi = rng();
  for (std::size_t i = 0; i < 8; ++i) {
    n.bytes[i] = static_cast<std::uint8_t>(lo >> (8 * i));
    n.bytes[8 + i] = static_cast<std::uint8_t>(hi >> (8 * i));
  }
  n.issued_by = enb0;
  n.issued_at = now;
  n.transaction = transaction;
  return issued_.emplace(transaction, n).first->second;
}

const IssuedNonce* NonceLedger::find(const std::string& transaction) const {
  const auto it = issued_.find(transaction);
  return it == issued_.end() ? nullptr : &it->second;
}

IssuedNonce generate_nonce(NonceLedger& ledger, const std::string& enb0, const std::string& transaction, SimTime now,
                           std::mt19937_64& rng) {
  return ledger.generate(enb0, transaction, now, rng);
}

// ---------------------------------------------------------------- eNB

ENodeB::ENodeB(CellId cell, VerifierContext verifier) : id_(enb_id(cell)), cell_(cell), verifier_(verifier) {}

void ENodeB::on_message(const Message& msg, Context& ctx) {
  std::visit(
      overloaded{
          [&](const NodeConfigure& m) {
            role_ = m.role;
            service_id_ = m.service_id;
            cover_ = geometry::CellSet(m.cover.begin(), m.cover.end());
          },
          [&](const MeasurementReport& m) {
            const std::string target = enb_id(m.target);
            outbound_[m.transaction] = Outbound{msg.src, target};
            ctx.send(make_message(id_, target, HoRequest{m.transaction, msg.src, m.source, m.target}));
          },
          [&](const HoRequest& m) {
            const bool required = armed() && !cover_.contains(m.source);
            inbound_[m.transaction] = Inbound{m.mt, m.source, required, std::nullopt, false, {}};
            ctx.send(make_message(id_, msg.src, HoResponse{m.transaction, required}));
          },
          [&](const HoResponse& m) {
            const auto it = outbound_.find(m.transaction);
            if (it == outbound_.end()) {
              ctx.record("warning", id_, {{"reason", "HoResponse for unknown transaction"}, {"transaction", m.transaction}});
              return;
            }
            const Outbound out = it->second;
            outbound_.erase(it);
            if (!m.attestation_required) {
              ctx.command_handover(out.mt, m.transaction);
              return;
            }
            const IssuedNonce& n = nonces_.generate(id_, m.transaction, ctx.now(), ctx.nonce_rng());
            ctx.record("nonce", id_,
                       {{"transaction", m.transaction}, {"mt", out.mt}, {"nonce", trust::to_hex(n.bytes)}});
            ctx.send(make_message(id_, out.mt, AttestationRequest{m.transaction, n.bytes, out.target_enb}));
            ctx.send(make_message(id_, out.target_enb,
                                  NonceTransfer{m.transaction, out.mt, n.bytes, n.issued_by, n.issued_at}));
          },
          [&](const NonceTransfer& m) {
            auto it = inbound_.find(m.transaction);
            if (it == inbound_.end()) {
              ctx.record("warning", id_, {{"reason", "nonce for unknown transaction"}, {"transaction", m.transaction}});
              return;
            }
            it->second.nonce = m;
            auto waiting = std::move(it->second.waiting);
            it->second.waiting.clear();
            for (const Message& submit : waiting) verify_submit(submit, it->second, ctx);
          },
          [&](const HoExecute& m) { ctx.send(make_message(id_, msg.src, HoAck{m.transaction})); },
          [&](const AttestationSubmit& m) {
            auto it = inbound_.find(m.transaction);
            if (it == inbound_.end() || !it->second.attestation_required) {
              const trust::Verdict v = trust::Verdict::rejected(trust::RejectReason::Replay);
              ctx.record("verify", id_,
                         {{"transaction", m.transaction},
                          {"mt", msg.src},
                          {"verdict", v.str()},
                          {"nonce", trust::to_hex(m.package.nonce)},
                          {"nonce_issuer", ""}});
              ctx.send(make_message(id_, msg.src, AttestationAck{m.transaction, false, v.str()}));
              return;
            }
            if (!it->second.nonce) {
              it->second.waiting.push_back(msg);
              return;
            }
            verify_submit(msg, it->second, ctx);
          },
          [&](const auto&) {
            ctx.record("warning", id_, {{"reason", "unexpected message"}, {"kind", to_string(msg.kind())}});
          },
      },
      msg.payload);
}

void ENodeB::verify_submit(const Message& msg, Inbound& in, Context& ctx) {
  const auto& submit = std::get<AttestationSubmit>(msg.payload);
  trust::Verdict verdict;
  if (in.nonce_consumed) {
    verdict = trust::Verdict::rejected(trust::RejectReason::Replay);
  } else {
    verdict = trust::verify_attestation(submit.package, in.nonce->nonce, *verifier_.rims, *verifier_.registry);
    if (verdict.accepted() && submit.package.credential.mt_id != in.mt) {
      verdict = trust::Verdict::rejected(trust::RejectReason::Forged);
    }
    in.nonce_consumed = true;
    ++verifications_;
  }
  ctx.record("verify", id_,
             {{"transaction", submit.transaction},
              {"mt", in.mt},
              {"verdict", verdict.str()},
              {"nonce", trust::to_hex(in.nonce->nonce)},
              {"nonce_issuer", in.nonce->issued_by}});
  ctx.send(make_message(id_, msg.src, AttestationAck{submit.transaction, verdict.accepted(), verdict.str()}));
  if (verdict.accepted()) {
    ctx.send(make_message(id_, std::string(kTltac),
                          Register{in.mt, submit.transaction, in.nonce->nonce, in.nonce->issued_by, verdict.str()}));
  }
}

// ---------------------------------------------------------------- TLTAC

const Registration* Registry::find(const std::string& mt) const {
  const auto it = registered_.find(mt);
  return it == registered_.end() ? nullptr : &it->second;
}

Tltac::Tltac(ServiceRequest request, geometry::ZoneMap zone, TltacOptions options)
    : request_(std::move(request)), zone_(std::move(zone)), options_(std::move(options)) {}

RegisterAck Tltac::register_mt(const AttestationRecord& record, SimTime now) {
  if (!record.verdict.accepted()) {
    throw Error(ErrorCode::RegistrationDenied,
                "attestation verdict for '" + record.mt_id + "' is " + record.verdict.str());
  }
  Registration reg{now, record.transaction, record.nonce, record.nonce_issuer, policy_version_};
  const bool fresh = !registry_.registered_.contains(record.mt_id);
  registry_.registered_[record.mt_id] = reg;
  registry_.history_.push_back({record.mt_id, fresh ? "register" : "refresh", now});
  return RegisterAck{record.mt_id, true, policy_version_};
}

Message Tltac::download_policy(const std::string& mt_id) const {
  if (!registry_.contains(mt_id)) throw Error(ErrorCode::NotRegistered, "'" + mt_id + "' is not registered");
  return make_message(id_, mt_id,
                      PolicyDownload{mt_id, request_.p_sp, request_.p_pz, zone_.pz, zone_.op, policy_version_});
}

AuthzDecision Tltac::authorize(const std::string& mt_id, const std::string& service, bool in_pz) const {
  if (!registry_.contains(mt_id)) return {false, "NotRegistered"};
  if (!in_pz) return {false, "OutsidePz"};
  if (!request_.p_pz.access_grants.contains(service)) return {false, "NotGranted"};
  return {true, "Granted"};
}

std::vector<Message> Tltac::deregister_mt(const std::string& mt_id, SimTime now) {
  if (!registry_.contains(mt_id)) throw Error(ErrorCode::NotRegistered, "'" + mt_id + "' is not registered");
  registry_.registered_.erase(mt_id);
  registry_.history_.push_back({mt_id, "deregister", now});
  std::vector<Message> out;
  out.push_back(make_message(id_, mt_id, DeregisterAck{mt_id, true}));
  if (options_.agps_initiator == "tltac") out.push_back(make_message(id_, std::string(kAgps), AgpsRegister{mt_id, false}));
  if (options_.notify_tltsr_on_exit) out.push_back(make_message(id_, std::string(kTltsr), Deregister{mt_id}));
  return out;
}

void Tltac::on_message(const Message& msg, Context& ctx) {
  std::visit(
      overloaded{
          [&](const Register& m) {
            AttestationRecord record{m.mt, m.transaction, m.nonce, m.nonce_issuer,
                                     m.verdict == "Accept" ? trust::Verdict::accept()
                                                           : trust::Verdict::rejected(trust::RejectReason::Untrusted)};
            const bool fresh = !registry_.contains(m.mt);
            try {
              register_mt(record, ctx.now());
            } catch (const Error& e) {
              ctx.record("registration_denied", id_, {{"mt", m.mt}, {"error", e.what()}});
              ctx.send(make_message(id_, msg.src, RegisterAck{m.mt, false, policy_version_}));
              return;
            }
            ctx.record("register", id_,
                       {{"mt", m.mt},
                        {"transaction", m.transaction},
                        {"nonce", trust::to_hex(m.nonce)},
                        {"nonce_issuer", m.nonce_issuer},
                        {"verifier", msg.src},
                        {"fresh", fresh}});
            ctx.send(download_policy(m.mt));
            if (options_.agps_initiator == "tltac") {
              ctx.send(make_message(id_, std::string(kAgps), AgpsRegister{m.mt, true}));
            }
            ctx.schedule_timer(id_, options_.expire_after,
                               "expire/" + m.mt + "/" + std::to_string(ctx.now().count()));
          },
          [&](const Deregister& m) {
            try {
              auto out = deregister_mt(m.mt, ctx.now());
              ctx.record("deregister", id_, {{"mt", m.mt}});
              for (auto& reply : out) ctx.send(std::move(reply));
            } catch (const Error&) {
              ctx.record("deregister_unknown", id_, {{"mt", m.mt}});
              ctx.send(make_message(id_, msg.src, DeregisterAck{m.mt, false}));
            }
          },
          [&](const AuthzRequest& m) {
            const AuthzDecision d = authorize(m.mt, m.service, m.in_pz);
            ctx.record("authz_decision", id_,
                       {{"mt", m.mt}, {"service", m.service}, {"in_pz", m.in_pz}, {"granted", d.granted},
                        {"reason", d.reason}});
            ctx.send(make_message(id_, msg.src, AuthzResponse{m.mt, m.service, d.granted, d.reason}));
          },
          [&](const auto&) {
            ctx.record("warning", id_, {{"reason", "unexpected message"}, {"kind", to_string(msg.kind())}});
          },
      },
      msg.payload);
}

void Tltac::on_timer(const std::string& tag, Context& ctx) {
  // expire/<mt>/<registered_at_us>
  if (!tag.starts_with("expire/")) return;
  const auto slash = tag.rfind('/');
  const std::string mt = tag.substr(7, slash - 7);
  const std::int64_t at = std::stoll(tag.substr(slash + 1));
  const Registration* reg = registry_.find(mt);
  if (reg == nullptr || reg->registered_at.count() != at) return;
  registry_.registered_.erase(mt);
  registry_.history_.push_back({mt, "expire", ctx.now()});
  ctx.record("expire", id_, {{"mt", mt}});
  if (options_.agps_initiator == "tltac") ctx.send(make_message(id_, std::string(kAgps), AgpsRegister{mt, false}));
}

void Agps::on_message(const Message& msg, Context& ctx) {
  if (const auto* m = std::get_if<AgpsRegister>(&msg.payload)) {
    if (m->active) {
      registered_.insert(m->mt);
    } else {
      registered_.erase(m->mt);
    }
    ctx.record("agps", id_, {{"mt", m->mt}, {"active", m->active}});
  }
}

// ---------------------------------------------------------------- setup

ServiceConfiguration configure_service(const ServiceRequest& req, const geometry::HexGrid& grid) {
  validate_service_request(req);
  geometry::ZoneMap zone = geometry::compile_zones(
      req.pz, grid, geometry::ZoneOptions{req.op_scale, req.outer_layers, req.op_from_sp});
  ServiceConfiguration out{std::move(zone), {}};
  const std::vector<CellId> cover(out.zone.cover.begin(), out.zone.cover.end());
  for (const CellId& c : out.zone.c1) {
    out.node_configs.push_back(
        make_message(std::string(kAgw), enb_id(c), NodeConfigure{req.service_id, c, "c1", cover}));
  }
  for (const CellId& c : out.zone.c0) {
    out.node_configs.push_back(make_message(std::string(kAgw), enb_id(c), NodeConfigure{req.service_id, c, "c0", {}}));
  }
  return out;
}

// ---------------------------------------------------------------- direct network

DirectNetwork::DirectNetwork(std::uint64_t seed, SimTime hop) : hop_(hop), rng_(seed) {}

void DirectNetwork::add(Entity& entity) { entities_[entity.id()] = &entity; }

Entity* DirectNetwork::find(const std::string& id) const {
  const auto it = entities_.find(id);
  return it == entities_.end() ? nullptr : it->second;
}

void DirectNetwork::send(Message msg) {
  msg.id = next_id_++;
  msg.sent_at = now_;
  trace_.push_back(msg);
  ++in_flight_;
  queue_.push(Pending{now_ + hop_, seq_++,
                      [this, m = std::move(msg)] {
                        --in_flight_;
                        if (Entity* e = find(m.dst)) e->on_message(m, *this);
                      },
                      true});
}

void DirectNetwork::schedule_timer(const std::string& entity, SimTime delay, std::string tag) {
  queue_.push(Pending{now_ + delay, seq_++,
                      [this, entity, t = std::move(tag)] {
                        if (Entity* e = find(entity)) e->on_timer(t, *this);
                      },
                      false});
}

void DirectNetwork::command_handover(const std::string& mt, const std::string& transaction) {
  ++in_flight_;
  queue_.push(Pending{now_ + hop_, seq_++,
                      [this, mt, transaction] {
                        --in_flight_;
                        if (auto* t = dynamic_cast<Terminal*>(find(mt))) t->on_handover_command(transaction, *this);
                      },
                      true});
}

void DirectNetwork::record(std::string_view kind, const std::string& entity, Json detail) {
  records_.emplace_back(std::string(kind), Json{{"entity", entity}, {"t_us", now_.count()}, {"detail", std::move(detail)}});
}

void DirectNetwork::step() {
  Pending p = queue_.top();
  queue_.pop();
  now_ = std::max(now_, p.at);
  p.action();
}

void DirectNetwork::run() {
  while (messages_pending() && !queue_.empty()) step();
}

void DirectNetwork::run_until(SimTime until) {
  while (!queue_.empty() && queue_.top().at <= until) step();
  now_ = std::max(now_, until);
}

std::vector<Message> run_inbound_handover(DirectNetwork& net, Terminal& mt, const ENodeB& enb0, const ENodeB& enb1) {
  net.clear_trace();
  mt.begin_handover(enb0.cell(), enb1.cell(), net);
  net.run();
  return net.trace();
}

}  // namespace tlta::protocol
