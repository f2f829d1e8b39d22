#include "tlta/trust.hpp"

#include <openssl/evp.h>

#include <set>
#include <stdexcept>

#include "tlta/error.hpp"

namespace tlta::trust {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_bytes(std::vector<std::uint8_t>& out, std::span<const std::uint8_t> bytes) {
  out.insert(out.end(), bytes.begin(), bytes.end());
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

template <std::size_t N>
std::array<std::uint8_t, N> parse_hex(std::string_view hex) {
  if (hex.size() != 2 * N) {
    throw Error(ErrorCode::ConfigError,
                "expected " + std::to_string(2 * N) + " hex characters, got " + std::to_string(hex.size()));
  }
  std::array<std::uint8_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::ConfigError, "invalid hex digit in '" + std::string(hex) + "'");
    out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return out;
}

}  // namespace

Digest Digest::of(std::span<const std::uint8_t> data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw std::runtime_error("sha256 digest failed");
  }
  return d;
}

Digest Digest::of(std::string_view text) {
  return of(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Digest Digest::from_hex(std::string_view hex) { return Digest{parse_hex<32>(hex)}; }

std::string Digest::hex() const { return to_hex(bytes); }

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

Nonce nonce_from_hex(std::string_view hex) { return parse_hex<16>(hex); }

PcrBank zeroed_bank() {
  PcrBank bank;
  for (std::uint32_t i = 0; i < kPcrCount; ++i) bank[i] = Pcr{i, Digest{}};
  return bank;
}

Pcr extend_pcr(const Pcr& pcr, const Digest& d) {
  std::vector<std::uint8_t> buf;
  buf.reserve(64);
  put_bytes(buf, pcr.value.bytes);
  put_bytes(buf, d.bytes);
  return Pcr{pcr.index, Digest::of(buf)};
}

PcrBank replay_log(const MeasurementLog& log) {
  PcrBank bank = zeroed_bank();
  for (const LogEntry& e : log) {
    if (e.pcr_index >= kPcrCount) throw Error(ErrorCode::InvalidManifest, "pcr index out of range");
    bank[e.pcr_index] = extend_pcr(bank[e.pcr_index], e.digest);
  }
  return bank;
}

bool rim_matches(const RimSet& rims, std::string_view trust_root, std::string_view name, const Digest& digest) {
  for (const RimCert& rim : rims) {
    if (rim.issuer == trust_root && rim.component_name == name && rim.expected_digest == digest) return true;
  }
  return false;
}

std::string_view to_string(BootState state) {
  switch (state) {
    case BootState::PoweredOff: return "PoweredOff";
    case BootState::Booted: return "Booted";
    case BootState::Failed: return "Failed";
    case BootState::Pristine: return "Pristine";
  }
  return "?";
}

PlatformState secure_boot(const std::vector<Component>& components, const RimSet& rims,
                          std::string_view trust_root) {
  if (components.empty()) throw Error(ErrorCode::InvalidManifest, "boot manifest is empty");
  std::set<std::string> names;
  for (const Component& c : components) {
    if (!names.insert(c.name).second) throw Error(ErrorCode::InvalidManifest, "duplicate component '" + c.name + "'");
    if (c.pcr_index >= kPcrCount) {
      throw Error(ErrorCode::InvalidManifest, "component '" + c.name + "' names pcr " + std::to_string(c.pcr_index));
    }
  }

  PlatformState st;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const Component& c = components[i];
    st.log.push_back({c.name, c.digest, c.pcr_index});
    st.pcrs[c.pcr_index] = extend_pcr(st.pcrs[c.pcr_index], c.digest);
    if (!rim_matches(rims, trust_root, c.name, c.digest)) {
      st.state = BootState::Failed;
      st.failed_at = i;
      return st;
    }
  }
  st.state = BootState::Booted;
  return st;
}

PlatformState pristine_boot() {
  PlatformState st;
  st.state = BootState::Pristine;
  return st;
}

CredentialRegistry::CredentialRegistry(std::string trust_root, std::uint64_t seed)
    : trust_root_(std::move(trust_root)), rng_(seed) {}

AiCredential CredentialRegistry::issue(const std::string& mt_id) {
  if (key_of_mt_.contains(mt_id)) {
    throw Error(ErrorCode::AlreadyIssued, "attestation identity already issued for '" + mt_id + "'");
  }
  const std::string key_id = "aik-" + std::to_string(next_key_++);
  Digest secret;
  for (std::size_t i = 0; i < secret.bytes.size(); i += 8) {
    const std::uint64_t word = rng_();
    for (std::size_t j = 0; j < 8; ++j) secret.bytes[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
  }
  key_of_mt_.emplace(mt_id, key_id);
  secrets_.emplace(key_id, secret);
  return AiCredential{mt_id, key_id, trust_root_};
}

std::optional<Digest> CredentialRegistry::secret(std::string_view key_id) const {
  const auto it = secrets_.find(key_id);
  if (it == secrets_.end()) return std::nullopt;
  return it->second;
}

bool CredentialRegistry::issued_to(std::string_view mt_id, std::string_view key_id) const {
  const auto it = key_of_mt_.find(mt_id);
  return it != key_of_mt_.end() && it->second == key_id;
}

std::vector<std::uint8_t> tagged_bytes(const AttestationPackage& pkg) {
  std::vector<std::uint8_t> out;
  put_bytes(out, pkg.nonce);
  put_u32(out, static_cast<std::uint32_t>(pkg.pcr_values.size()));
  for (const Pcr& p : pkg.pcr_values) {
    put_u32(out, p.index);
    put_bytes(out, p.value.bytes);
  }
  put_u32(out, static_cast<std::uint32_t>(pkg.log.size()));
  for (const LogEntry& e : pkg.log) {
    put_u32(out, static_cast<std::uint32_t>(e.component_name.size()));
    put_bytes(out, std::span(reinterpret_cast<const std::uint8_t*>(e.component_name.data()), e.component_name.size()));
    put_bytes(out, e.digest.bytes);
    put_u32(out, e.pcr_index);
  }
  return out;
}

Digest compute_tag(const Digest& secret, const AttestationPackage& pkg) {
  std::vector<std::uint8_t> buf(secret.bytes.begin(), secret.bytes.end());
  put_bytes(buf, tagged_bytes(pkg));
  return Digest::of(buf);
}

AttestationPackage build_attestation_package(const PlatformState& state, const AiCredential& credential,
                                             const Digest& secret, const Nonce& nonce) {
  AttestationPackage pkg;
  pkg.nonce = nonce;
  pkg.pcr_values.assign(state.pcrs.begin(), state.pcrs.end());
  pkg.log = state.log;
  pkg.credential = credential;
  pkg.tag = compute_tag(secret, pkg);
  return pkg;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::Replay: return "Replay";
    case RejectReason::Forged: return "Forged";
    case RejectReason::LogMismatch: return "LogMismatch";
    case RejectReason::Untrusted: return "Untrusted";
    case RejectReason::NoLte: return "NoLte";
  }
  return "?";
}

std::string Verdict::str() const { return reject ? "Reject(" + std::string(to_string(*reject)) + ")" : "Accept"; }

Verdict verify_attestation(const AttestationPackage& pkg, const Nonce& expected_nonce, const RimSet& rims,
                           const CredentialRegistry& registry) {
  if (pkg.nonce != expected_nonce) return Verdict::rejected(RejectReason::Replay);

  const auto secret = registry.secret(pkg.credential.key_id);
  if (!secret || pkg.credential.issuer != registry.trust_root() ||
      !registry.issued_to(pkg.credential.mt_id, pkg.credential.key_id) || compute_tag(*secret, pkg) != pkg.tag) {
    return Verdict::rejected(RejectReason::Forged);
  }

  PcrBank replayed;
  try {
    replayed = replay_log(pkg.log);
  } catch (const Error&) {
    return Verdict::rejected(RejectReason::LogMismatch);
  }
  if (pkg.pcr_values.size() != replayed.size()) return Verdict::rejected(RejectReason::LogMismatch);
  for (std::size_t i = 0; i < replayed.size(); ++i) {
    if (pkg.pcr_values[i] != replayed[i]) return Verdict::rejected(RejectReason::LogMismatch);
  }

  // An empty log carries no evidence of a measured boot.
  if (pkg.log.empty()) return Verdict::rejected(RejectReason::Untrusted);
  bool has_lte = false;
  for (const LogEntry& e : pkg.log) {
    if (!rim_matches(rims, registry.trust_root(), e.component_name, e.digest)) {
      return Verdict::rejected(RejectReason::Untrusted);
    }
    has_lte = has_lte || e.component_name == kLteComponent;
  }
  if (!has_lte) return Verdict::rejected(RejectReason::NoLte);
  return Verdict::accept();
}

}  // namespace tlta::trust
