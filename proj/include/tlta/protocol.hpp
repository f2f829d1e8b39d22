#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tlta/geometry.hpp"
#include "tlta/time.hpp"
#include "tlta/trust.hpp"

namespace tlta::protocol {

using Json = nlohmann::ordered_json;
using geometry::CellId;

// Well-known entity ids. Base stations are named after their cell.
inline constexpr std::string_view kTltac = "tltac";
inline constexpr std::string_view kAgw = "agw";
inline constexpr std::string_view kAgps = "agps";
inline constexpr std::string_view kTltsr = "tltsr";

std::string enb_id(CellId cell);
std::optional<CellId> cell_of_enb(std::string_view id);

// ---------------------------------------------------------------- policies

enum class PolicyId { Sp, Pz };
enum class Rule { Enable, Disable };

std::string_view to_string(PolicyId id);
std::string_view to_string(Rule rule);

struct Policy {
  PolicyId id = PolicyId::Sp;
  std::map<std::string, Rule> function_rules;
  std::set<std::string> access_grants;

  friend bool operator==(const Policy&, const Policy&) = default;
};

struct ServiceRequest {
  std::string tltsr_id;
  std::string service_id;
  geometry::Polygon pz;
  Policy p_sp;
  Policy p_pz;
  double op_scale = 1.0;
  int outer_layers = 1;
  bool op_from_sp = false;
};

/// Checks that both policies name the same functions. Returns warnings
/// (e.g. identical policies); throws ConfigError on malformed input.
std::vector<std::string> validate_service_request(const ServiceRequest& req);

// ---------------------------------------------------------------- messages

struct MeasurementReport {
  std::string transaction;
  CellId source;
  CellId target;
  friend bool operator==(const MeasurementReport&, const MeasurementReport&) = default;
};
struct HoRequest {
  std::string transaction;
  std::string mt;
  CellId source;
  CellId target;
  friend bool operator==(const HoRequest&, const HoRequest&) = default;
};
struct HoResponse {
  std::string transaction;
  bool attestation_required = false;
  friend bool operator==(const HoResponse&, const HoResponse&) = default;
};
struct AttestationRequest {
  std::string transaction;
  trust::Nonce nonce{};
  std::string target_enb;
  friend bool operator==(const AttestationRequest&, const AttestationRequest&) = default;
};
struct NonceTransfer {
  std::string transaction;
  std::string mt;
  trust::Nonce nonce{};
  std::string issued_by;
  SimTime issued_at{};
  friend bool operator==(const NonceTransfer&, const NonceTransfer&) = default;
};
struct HoExecute {
  std::string transaction;
  friend bool operator==(const HoExecute&, const HoExecute&) = default;
};
struct HoAck {
  std::string transaction;
  friend bool operator==(const HoAck&, const HoAck&) = default;
};
struct AttestationSubmit {
  std::string transaction;
  trust::AttestationPackage package;
  friend bool operator==(const AttestationSubmit&, const AttestationSubmit&) = default;
};
struct AttestationAck {
  std::string transaction;
  bool activate_lte = false;
  std::string verdict;
  friend bool operator==(const AttestationAck&, const AttestationAck&) = default;
};
struct Register {
  std::string mt;
  std::string transaction;
  trust::Nonce nonce{};
  std::string nonce_issuer;
  std::string verdict;
  friend bool operator==(const Register&, const Register&) = default;
};
struct RegisterAck {
  std::string mt;
  bool accepted = false;
  std::uint32_t policy_version = 0;
  friend bool operator==(const RegisterAck&, const RegisterAck&) = default;
};
struct PolicyDownload {
  std::string mt;
  Policy p_sp;
  Policy p_pz;
  geometry::Polygon pz;
  geometry::Polygon op;
  std::uint32_t version = 0;
  friend bool operator==(const PolicyDownload&, const PolicyDownload&) = default;
};
struct AgpsRegister {
  std::string mt;
  bool active = true;
  friend bool operator==(const AgpsRegister&, const AgpsRegister&) = default;
};
struct AgpsAssist {
  std::string mt;
  friend bool operator==(const AgpsAssist&, const AgpsAssist&) = default;
};
struct AuthzRequest {
  std::string mt;
  std::string service;
  bool in_pz = false;
  friend bool operator==(const AuthzRequest&, const AuthzRequest&) = default;
};
struct AuthzResponse {
  std::string mt;
  std::string service;
  bool granted = false;
  std::string reason;
  friend bool operator==(const AuthzResponse&, const AuthzResponse&) = default;
};
struct Deregister {
  std::string mt;
  friend bool operator==(const Deregister&, const Deregister&) = default;
};
struct DeregisterAck {
  std::string mt;
  bool removed = false;
  friend bool operator==(const DeregisterAck&, const DeregisterAck&) = default;
};
struct NodeConfigure {
  std::string service_id;
  CellId cell;
  std::string role;            // "c1" or "c0"
  std::vector<CellId> cover;   // sent to c1 stations only
  friend bool operator==(const NodeConfigure&, const NodeConfigure&) = default;
};

// Alternative order matches MessageKind, so the kind is always the
// payload's type.
using Payload = std::variant<MeasurementReport, HoRequest, HoResponse, AttestationRequest, NonceTransfer, HoExecute,
                             HoAck, AttestationSubmit, AttestationAck, Register, RegisterAck, PolicyDownload,
                             AgpsRegister, AgpsAssist, AuthzRequest, AuthzResponse, Deregister, DeregisterAck,
                             NodeConfigure>;

enum class MessageKind {
  MeasurementReport,
  HoRequest,
  HoResponse,
  AttestationRequest,
  NonceTransfer,
  HoExecute,
  HoAck,
  AttestationSubmit,
  AttestationAck,
  Register,
  RegisterAck,
  PolicyDownload,
  AgpsRegister,
  AgpsAssist,
  AuthzRequest,
  AuthzResponse,
  Deregister,
  DeregisterAck,
  NodeConfigure,
};
inline constexpr std::size_t kMessageKindCount = std::variant_size_v<Payload>;

std::string_view to_string(MessageKind kind);
std::optional<MessageKind> message_kind_from_string(std::string_view name);

struct Message {
  std::uint64_t id = 0;
  std::string src;
  std::string dst;
  Payload payload;
  SimTime sent_at{};

  MessageKind kind() const { return static_cast<MessageKind>(payload.index()); }
  friend bool operator==(const Message&, const Message&) = default;
};

Message make_message(std::string src, std::string dst, Payload payload);

/// Canonical encoding: JSON with a fixed field order. decode(encode(m)) == m.
std::string encode(const Message& msg);
Message decode(std::string_view bytes);
// Compact per-kind summary used in the event log.
Json summarize(const Message& msg);

// Some payloads reference a handover transaction; empty otherwise.
std::string transaction_of(const Message& msg);

// ---------------------------------------------------------------- runtime

/// What an entity sees of the network it runs in.
class Context {
public:
  virtual ~Context() = default;

  virtual SimTime now() const = 0;
  // Assigns id and sent_at.
  virtual void send(Message msg) = 0;
  virtual void schedule_timer(const std::string& entity, SimTime delay, std::string tag) = 0;
  // Radio-layer handover command from the serving cell; not a Message.
  virtual void command_handover(const std::string& mt, const std::string& transaction) = 0;
  virtual void record(std::string_view kind, const std::string& entity, Json detail) = 0;
  virtual std::mt19937_64& nonce_rng() = 0;
};

class Entity {
public:
  virtual ~Entity() = default;
  virtual const std::string& id() const = 0;
  virtual void on_message(const Message& msg, Context& ctx) = 0;
  virtual void on_timer(const std::string& /*tag*/, Context& /*ctx*/) {}
};

/// Mobile side of a handover, implemented by the device.
class Terminal : public Entity {
public:
  virtual void begin_handover(CellId source, CellId target, Context& ctx) = 0;
  virtual void on_handover_command(const std::string& transaction, Context& ctx) = 0;
};

// ---------------------------------------------------------------- nonces

struct IssuedNonce {
  trust::Nonce bytes{};
  std::string issued_by;
  SimTime issued_at{};
  std::string transaction;
};

/// Nonces keyed by handover transaction, one per transaction.
class NonceLedger {
public:
  const IssuedNonce& generate(const std::string& enb0, const std::string& transaction, SimTime now,
                              std::mt19937_64& rng);
  const IssuedNonce* find(const std::string& transaction) const;
  std::size_t size() const { return issued_.size(); }

private:
  std::map<std::string, IssuedNonce> issued_;
};

IssuedNonce generate_nonce(NonceLedger& ledger, const std::string& enb0, const std::string& transaction,
                           SimTime now, std::mt19937_64& rng);

// ---------------------------------------------------------------- entities

struct VerifierContext {
  const trust::RimSet* rims = nullptr;
  const trust::CredentialRegistry* registry = nullptr;
};

class ENodeB final : public Entity {
public:
  ENodeB(CellId cell, VerifierContext verifier);

  const std::string& id() const override { return id_; }
  CellId cell() const { return cell_; }
  const std::string& role() const { return role_; }
  bool armed() const { return role_ == "c1"; }
  void on_message(const Message& msg, Context& ctx) override;

  std::uint64_t verifications() const { return verifications_; }
  const NonceLedger& nonces() const { return nonces_; }

private:
  struct Inbound {
    std::string mt;
    CellId source;
    bool attestation_required = false;
    std::optional<NonceTransfer> nonce;
    bool nonce_consumed = false;
    std::vector<Message> waiting;  // submits that arrived before the nonce
  };
  struct Outbound {
    std::string mt;
    std::string target_enb;
  };

  void verify_submit(const Message& msg, Inbound& in, Context& ctx);

  std::string id_;
  CellId cell_;
  VerifierContext verifier_;
  std::string role_;
  std::string service_id_;
  geometry::CellSet cover_;
  NonceLedger nonces_;
  std::map<std::string, Inbound> inbound_;
  std::map<std::string, Outbound> outbound_;
  std::uint64_t verifications_ = 0;
};

struct AttestationRecord {
  std::string mt_id;
  std::string transaction;
  trust::Nonce nonce{};
  std::string nonce_issuer;
  trust::Verdict verdict;
};

struct Registration {
  SimTime registered_at{};
  std::string transaction;
  trust::Nonce nonce{};
  std::string nonce_issuer;
  std::uint32_t policy_version = 0;
};

struct HistoryEntry {
  std::string mt_id;
  std::string event;  // "register", "refresh", "deregister", "expire"
  SimTime at{};
  friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

class Registry {
public:
  bool contains(const std::string& mt) const { return registered_.contains(mt); }
  const Registration* find(const std::string& mt) const;
  const std::map<std::string, Registration>& entries() const { return registered_; }
  const std::vector<HistoryEntry>& history() const { return history_; }

private:
  friend class Tltac;
  std::map<std::string, Registration> registered_;
  std::vector<HistoryEntry> history_;
};

struct TltacOptions {
  // Who registers the MT with the A-GPS service; only the TLTAC variant
  // sends a message.
  std::string agps_initiator = "tltac";
  bool notify_tltsr_on_exit = false;
  SimTime expire_after = from_seconds(3600.0);
};

struct AuthzDecision {
  bool granted = false;
  std::string reason;  // Granted, NotRegistered, OutsidePz, NotGranted, LteInactive
  friend bool operator==(const AuthzDecision&, const AuthzDecision&) = default;
};

/// Network-side registry and policy decision point.
class Tltac final : public Entity {
public:
  Tltac(ServiceRequest request, geometry::ZoneMap zone, TltacOptions options = {});

  const std::string& id() const override { return id_; }
  void on_message(const Message& msg, Context& ctx) override;
  void on_timer(const std::string& tag, Context& ctx) override;

  const ServiceRequest& request() const { return request_; }
  const geometry::ZoneMap& zone() const { return zone_; }
  const Registry& registry() const { return registry_; }
  std::uint32_t policy_version() const { return policy_version_; }

  /// Adds or refreshes an MT. Throws RegistrationDenied unless the record
  /// carries an Accept verdict.
  RegisterAck register_mt(const AttestationRecord& record, SimTime now);
  /// Throws NotRegistered.
  Message download_policy(const std::string& mt_id) const;
  AuthzDecision authorize(const std::string& mt_id, const std::string& service, bool in_pz) const;
  /// Removes the MT and returns the ack plus the A-GPS (and optional TLTSR)
  /// notifications. Throws NotRegistered.
  std::vector<Message> deregister_mt(const std::string& mt_id, SimTime now);

private:
  std::string id_{kTltac};
  ServiceRequest request_;
  geometry::ZoneMap zone_;
  TltacOptions options_;
  Registry registry_;
  std::uint32_t policy_version_ = 1;
};

class Agps final : public Entity {
public:
  const std::string& id() const override { return id_; }
  void on_message(const Message& msg, Context& ctx) override;
  bool registered(const std::string& mt) const { return registered_.contains(mt); }

private:
  std::string id_{kAgps};
  std::set<std::string> registered_;
};

// Gateway and service requester only originate configuration traffic and
// absorb notifications.
class PassiveEntity final : public Entity {
public:
  explicit PassiveEntity(std::string id) : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  void on_message(const Message&, Context&) override {}

private:
  std::string id_;
};

// ---------------------------------------------------------------- setup

struct ServiceConfiguration {
  geometry::ZoneMap zone;
  std::vector<Message> node_configs;  // AGW -> eNB, one per c1 and c0 cell
};

/// Compiles the zone and produces the node configuration fan-out.
/// Throws geometry errors and NoPerimeter.
ServiceConfiguration configure_service(const ServiceRequest& req, const geometry::HexGrid& grid);

// ---------------------------------------------------------------- direct network

/// Synchronous in-process network with a fixed per-hop delay, used to run
/// single protocol exchanges outside the full simulator.
class DirectNetwork final : public Context {
public:
  explicit DirectNetwork(std::uint64_t seed = 1, SimTime hop = SimTime{1000});

  void add(Entity& entity);
  Entity* find(const std::string& id) const;

  SimTime now() const override { return now_; }
  void send(Message msg) override;
  void schedule_timer(const std::string& entity, SimTime delay, std::string tag) override;
  void command_handover(const std::string& mt, const std::string& transaction) override;
  void record(std::string_view kind, const std::string& entity, Json detail) override;
  std::mt19937_64& nonce_rng() override { return rng_; }

  // Runs until no message or command is in flight. Timers due before the
  // last delivery fire in order; later ones stay queued.
  void run();
  // Runs every queued event up to and including `until`.
  void run_until(SimTime until);

  const std::vector<Message>& trace() const { return trace_; }
  const std::vector<std::pair<std::string, Json>>& records() const { return records_; }
  void clear_trace() { trace_.clear(); }

private:
  struct Pending {
    SimTime at;
    std::uint64_t seq;
    std::function<void()> action;
    bool is_message;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };
  void step();
  bool messages_pending() const { return in_flight_ > 0; }

  SimTime now_{};
  SimTime hop_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_id_ = 1;
  std::size_t in_flight_ = 0;
  std::mt19937_64 rng_;
  std::map<std::string, Entity*> entities_;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::vector<Message> trace_;
  std::vector<std::pair<std::string, Json>> records_;
};

/// Drives one perimeter handover: mt (attached to enb0's cell) moves into
/// enb1's cell. Returns every message sent during the exchange, in send order.
std::vector<Message> run_inbound_handover(DirectNetwork& net, Terminal& mt, const ENodeB& enb0, const ENodeB& enb1);

}  // namespace tlta::protocol
