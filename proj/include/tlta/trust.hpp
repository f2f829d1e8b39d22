#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tlta::trust {

// The only digest algorithm this build provides.
inline constexpr std::string_view kDigestAlgorithm = "sha256";
inline constexpr std::size_t kPcrCount = 16;
inline constexpr std::string_view kLteComponent = "LTE";

struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  static Digest of(std::span<const std::uint8_t> data);
  static Digest of(std::string_view text);
  static Digest from_hex(std::string_view hex);
  std::string hex() const;

  friend auto operator<=>(const Digest&, const Digest&) = default;
};

using Nonce = std::array<std::uint8_t, 16>;

std::string to_hex(std::span<const std::uint8_t> bytes);
Nonce nonce_from_hex(std::string_view hex);

struct Pcr {
  std::uint32_t index = 0;
  Digest value;

  friend bool operator==(const Pcr&, const Pcr&) = default;
};

using PcrBank = std::array<Pcr, kPcrCount>;

PcrBank zeroed_bank();

/// new = H(old || d)
Pcr extend_pcr(const Pcr& pcr, const Digest& d);

struct Component {
  std::string name;
  Digest digest;
  std::uint32_t pcr_index = 0;

  friend bool operator==(const Component&, const Component&) = default;
};

struct LogEntry {
  std::string component_name;
  Digest digest;
  std::uint32_t pcr_index = 0;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

using MeasurementLog = std::vector<LogEntry>;

/// Folds the log over a zeroed bank.
PcrBank replay_log(const MeasurementLog& log);

struct RimCert {
  std::string component_name;
  Digest expected_digest;
  std::string issuer;

  friend bool operator==(const RimCert&, const RimCert&) = default;
};

using RimSet = std::vector<RimCert>;

// True when a certificate from `trust_root` vouches for (name, digest).
bool rim_matches(const RimSet& rims, std::string_view trust_root, std::string_view name, const Digest& digest);

enum class BootState { PoweredOff, Booted, Failed, Pristine };
std::string_view to_string(BootState state);

struct PlatformState {
  BootState state = BootState::PoweredOff;
  MeasurementLog log;
  PcrBank pcrs = zeroed_bank();
  // Index of the component that failed verification, if any.
  std::optional<std::size_t> failed_at;
};

/// Measures components in order, checking each against its RIM.
/// A mismatch stops the boot in Failed; the log then ends with the entry
/// that failed, so PCRs still reflect what was measured.
PlatformState secure_boot(const std::vector<Component>& components, const RimSet& rims,
                          std::string_view trust_root);

PlatformState pristine_boot();

struct AiCredential {
  std::string mt_id;
  std::string key_id;
  std::string issuer;

  friend bool operator==(const AiCredential&, const AiCredential&) = default;
};

/// Stub Privacy CA: issues one attestation identity per MT and keeps the
/// tag secrets. Only the verifier side reads secrets back.
class CredentialRegistry {
public:
  CredentialRegistry(std::string trust_root, std::uint64_t seed);

  AiCredential issue(const std::string& mt_id);
  std::optional<Digest> secret(std::string_view key_id) const;
  // True when key_id is the identity issued to mt_id.
  bool issued_to(std::string_view mt_id, std::string_view key_id) const;
  const std::string& trust_root() const { return trust_root_; }

private:
  std::string trust_root_;
  std::mt19937_64 rng_;
  std::uint64_t next_key_ = 1;
  std::map<std::string, std::string, std::less<>> key_of_mt_;
  std::map<std::string, Digest, std::less<>> secrets_;
};

struct AttestationPackage {
  Nonce nonce{};
  std::vector<Pcr> pcr_values;
  MeasurementLog log;
  AiCredential credential;
  Digest tag;

  friend bool operator==(const AttestationPackage&, const AttestationPackage&) = default;
};

// Canonical bytes covered by the tag: nonce || pcr values || log.
std::vector<std::uint8_t> tagged_bytes(const AttestationPackage& pkg);
Digest compute_tag(const Digest& secret, const AttestationPackage& pkg);

AttestationPackage build_attestation_package(const PlatformState& state, const AiCredential& credential,
                                             const Digest& secret, const Nonce& nonce);

enum class RejectReason { Replay, Forged, LogMismatch, Untrusted, NoLte };
std::string_view to_string(RejectReason reason);

struct Verdict {
  std::optional<RejectReason> reject;

  bool accepted() const { return !reject.has_value(); }
  static Verdict accept() { return {}; }
  static Verdict rejected(RejectReason r) { return {r}; }
  std::string str() const;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Checks, in order: nonce, tag, log replay, RIM coverage, LTE presence.
Verdict verify_attestation(const AttestationPackage& pkg, const Nonce& expected_nonce, const RimSet& rims,
                           const CredentialRegistry& registry);

}  // namespace tlta::trust
