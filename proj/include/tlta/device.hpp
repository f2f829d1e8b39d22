#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlta/geometry.hpp"
#include "tlta/protocol.hpp"
#include "tlta/time.hpp"
#include "tlta/trust.hpp"

namespace tlta::device {

using geometry::CellId;

enum class DevicePhase { Normal, AwaitingAttestation, LteActiveSp, EnforcingPz, Deregistering };

std::string_view to_string(DevicePhase phase);
std::optional<DevicePhase> phase_from_string(std::string_view name);
bool transition_legal(DevicePhase from, DevicePhase to);

enum class FunctionStatus { Enabled, Disabled };
enum class VaultStatus { Locked, Unlocked };

struct FunctionState {
  std::map<std::string, FunctionStatus> functions;
  std::map<std::string, VaultStatus> vault;

  friend bool operator==(const FunctionState&, const FunctionState&) = default;
};

// Normal-phase defaults: every function Enabled, every credential Locked.
FunctionState default_state(const std::vector<std::string>& functions, const std::vector<std::string>& services);

/// Sets every function per p.function_rules, unlocks p.access_grants and
/// locks everything else. Throws UnknownFunction for names the device lacks.
FunctionState apply_policy(const FunctionState& fs, const protocol::Policy& p);

protocol::Json to_json(const FunctionState& fs);

struct Fix {
  SimTime t{};
  geometry::Point position;
  bool in_pz = false;
  bool in_op = false;
};

struct LteState {
  bool active = false;
  std::optional<protocol::Policy> p_sp;
  std::optional<protocol::Policy> p_pz;
  std::optional<geometry::Polygon> pz;
  std::optional<geometry::Polygon> op;
  std::optional<protocol::PolicyId> current_policy;
  int pz_in_count = 0;
  int pz_out_count = 0;
  int op_out_count = 0;
  std::deque<Fix> last_fixes;
  std::uint32_t policy_version = 0;
};

struct DeviceOptions {
  int debounce_k = 2;
  SimTime policy_timeout = from_seconds(10.0);
  SimTime dereg_timeout = from_seconds(10.0);
  SimTime handover_timeout = from_seconds(1.0);
  // Waiting time for AttestationAck after the package went out.
  SimTime attestation_timeout = from_seconds(10.0);
  bool collaborative_authz = false;
};

struct DeviceConfig {
  std::string mt_id;
  std::vector<std::string> functions;
  std::vector<std::string> services;
  trust::PlatformState platform;
  trust::AiCredential credential;
  trust::Digest secret;
};

/// Mobile terminal with its location trigger enforcer.
class MobileTerminal final : public protocol::Terminal {
public:
  MobileTerminal(DeviceConfig config, DeviceOptions options = {});

  const std::string& id() const override { return config_.mt_id; }
  void on_message(const protocol::Message& msg, protocol::Context& ctx) override;
  void on_timer(const std::string& tag, protocol::Context& ctx) override;
  void begin_handover(CellId source, CellId target, protocol::Context& ctx) override;
  void on_handover_command(const std::string& transaction, protocol::Context& ctx) override;

  /// Periodic location trigger. Only acts while the LTE holds zones.
  /// Fixes off the grid are dropped and counted.
  std::optional<DevicePhase> on_location_fix(geometry::Point fix, protocol::Context& ctx);

  /// Local decision, or nullopt when collaborative mode sent an AuthzRequest
  /// and the answer arrives later as AuthzResponse.
  std::optional<protocol::AuthzDecision> authorize_local(const std::string& service, protocol::Context& ctx);

  void set_grid(const geometry::HexGrid* grid) { grid_ = grid; }
  // Attach without signalling (initial camp-on, or reattach after a radio gap).
  void attach(CellId cell) { serving_ = cell; }

  DevicePhase phase() const { return phase_; }
  const LteState& lte() const { return lte_; }
  const FunctionState& functions() const { return fs_; }
  std::optional<CellId> serving() const { return serving_; }
  bool handover_in_progress() const { return pending_.has_value(); }
  const trust::PlatformState& platform() const { return config_.platform; }
  int dereg_retries() const { return dereg_retries_; }
  std::uint64_t fixes_dropped() const { return fixes_dropped_; }
  const std::vector<DevicePhase>& phase_history() const { return history_; }

private:
  struct PendingHandover {
    std::string transaction;
    CellId source;
    CellId target;
    bool attest = false;
    std::optional<trust::Nonce> nonce;
  };

  void transition(DevicePhase to, std::string_view cause, protocol::Context& ctx);
  void enforce(std::optional<protocol::PolicyId> policy, protocol::Context& ctx);
  void activate(protocol::Context& ctx);
  void deactivate(std::string_view cause, protocol::Context& ctx);
  void send_deregister(protocol::Context& ctx);
  void take_download(const protocol::PolicyDownload& d);

  DeviceConfig config_;
  DeviceOptions options_;
  const geometry::HexGrid* grid_ = nullptr;

  DevicePhase phase_ = DevicePhase::Normal;
  std::vector<DevicePhase> history_{DevicePhase::Normal};
  LteState lte_;
  FunctionState fs_;
  std::optional<CellId> serving_;
  std::optional<PendingHandover> pending_;
  std::uint64_t next_transaction_ = 1;

  std::string attesting_transaction_;
  bool activation_acked_ = false;
  std::optional<protocol::PolicyDownload> download_;
  int dereg_retries_ = 0;
  std::uint64_t dereg_round_ = 0;
  std::uint64_t fixes_dropped_ = 0;
};

}  // namespace tlta::device
