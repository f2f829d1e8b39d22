#include <doctest.h>

#include <random>
#include <set>

#include "tlta/error.hpp"
#include "tlta/trust.hpp"

using namespace tlta;
using namespace tlta::trust;

namespace {

std::vector<Component> manifest() {
  return {{"bootloader", Digest::of("bootloader image"), 0},
          {"kernel", Digest::of("kernel image"), 1},
          {std::string(kLteComponent), Digest::of("lte enforcer"), 8}};
}

RimSet rims_for(const std::vector<Component>& cs, const std::string& issuer = "root") {
  RimSet out;
  for (const auto& c : cs) out.push_back({c.name, c.digest, issuer});
  return out;
}

Nonce nonce_of(std::uint8_t b) {
  Nonce n{};
  n.fill(b);
  return n;
}

struct Platform {
  CredentialRegistry registry{"root", 7};
  std::vector<Component> components = manifest();
  RimSet rims = rims_for(components);
  PlatformState state = secure_boot(components, rims, "root");
  AiCredential cred = registry.issue("mt-1");
  Digest secret = *registry.secret(cred.key_id);
};

}  // namespace

TEST_CASE("sha256 digest") {
  CHECK(Digest::of("abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(Digest::from_hex(Digest::of("x").hex()) == Digest::of("x"));
}

TEST_CASE("pcr extend") {
  const Digest d = Digest::of("component");
  std::vector<std::uint8_t> buf(32, 0);
  buf.insert(buf.end(), d.bytes.begin(), d.bytes.end());
  CHECK(extend_pcr({0, {}}, d).value == Digest::of(buf));

  const Digest d2 = Digest::of("second");
  const Pcr twice = extend_pcr(extend_pcr({3, {}}, d), d2);
  const PcrBank bank = replay_log({{"a", d, 3}, {"b", d2, 3}});
  CHECK(bank[3] == twice);

  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Digest a = Digest::of(std::to_string(rng()));
    const Digest b = Digest::of(std::to_string(rng()));
    CHECK(extend_pcr(extend_pcr({0, {}}, a), b) != extend_pcr(extend_pcr({0, {}}, b), a));
  }
}

TEST_CASE("secure boot") {
  const auto cs = manifest();
  const PlatformState ok = secure_boot(cs, rims_for(cs), "root");
  CHECK(ok.state == BootState::Booted);
  CHECK(ok.log.size() == cs.size());
  CHECK(replay_log(ok.log) == ok.pcrs);

  auto bad = cs;
  bad[1].digest = Digest::of("patched kernel");
  const PlatformState failed = secure_boot(bad, rims_for(cs), "root");
  CHECK(failed.state == BootState::Failed);
  CHECK(failed.failed_at == 1u);
  CHECK(replay_log(failed.log) == failed.pcrs);

  const PlatformState none = secure_boot(cs, {}, "root");
  CHECK(none.state == BootState::Failed);
  CHECK(none.failed_at == 0u);

  // RIMs from a foreign issuer are not usable.
  CHECK(secure_boot(cs, rims_for(cs, "elsewhere"), "root").state == BootState::Failed);

  auto dup = cs;
  dup.push_back(cs[0]);
  CHECK_THROWS_AS(secure_boot(dup, rims_for(cs), "root"), Error);
}

TEST_CASE("secure boot prefixes pass and non-RIM digests fail early") {
  const auto cs = manifest();
  for (std::size_t n = 1; n <= cs.size(); ++n) {
    const std::vector<Component> prefix(cs.begin(), cs.begin() + static_cast<long>(n));
    CHECK(secure_boot(prefix, rims_for(cs), "root").state == BootState::Booted);
  }
  for (std::size_t i = 0; i < cs.size(); ++i) {
    auto bad = cs;
    bad[i].digest = Digest::of("other");
    const PlatformState st = secure_boot(bad, rims_for(cs), "root");
    CHECK(st.state == BootState::Failed);
    CHECK(*st.failed_at <= i);
  }
}

TEST_CASE("pristine boot") {
  const PlatformState p = pristine_boot();
  CHECK(p.state == BootState::Pristine);
  CHECK(p.log.empty());
  CHECK(p.pcrs == zeroed_bank());

  Platform pl;
  const auto pkg = build_attestation_package(p, pl.cred, pl.secret, nonce_of(1));
  CHECK(verify_attestation(pkg, nonce_of(1), pl.rims, pl.registry) == Verdict::rejected(RejectReason::Untrusted));

  // Re-provisioning then booting again succeeds.
  CHECK(secure_boot(pl.components, pl.rims, "root").state == BootState::Booted);
}

TEST_CASE("credential issue") {
  CredentialRegistry reg("root", 1);
  const AiCredential c = reg.issue("mt-1");
  CHECK(c.issuer == "root");
  CHECK(c.mt_id == "mt-1");
  try {
    reg.issue("mt-1");
    FAIL("second issue accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::AlreadyIssued);
  }
  std::set<std::string> keys{c.key_id};
  for (int i = 0; i < 100; ++i) keys.insert(reg.issue("mt-x" + std::to_string(i)).key_id);
  CHECK(keys.size() == 101);
}

TEST_CASE("attestation packages") {
  Platform pl;
  const auto a = build_attestation_package(pl.state, pl.cred, pl.secret, nonce_of(1));
  const auto b = build_attestation_package(pl.state, pl.cred, pl.secret, nonce_of(2));
  CHECK(a.tag != b.tag);
  const PcrBank replayed = replay_log(a.log);
  CHECK(std::vector<Pcr>(replayed.begin(), replayed.end()) == a.pcr_values);
}

TEST_CASE("verification verdicts") {
  Platform pl;
  const auto pkg = build_attestation_package(pl.state, pl.cred, pl.secret, nonce_of(1));
  CHECK(verify_attestation(pkg, nonce_of(1), pl.rims, pl.registry).accepted());
  CHECK(verify_attestation(pkg, nonce_of(9), pl.rims, pl.registry) == Verdict::rejected(RejectReason::Replay));

  auto unknown = pkg;
  unknown.credential.key_id = "aik-999";
  CHECK(verify_attestation(unknown, nonce_of(1), pl.rims, pl.registry) == Verdict::rejected(RejectReason::Forged));

  // A log entry whose digest has no RIM, re-tagged and PCR-consistent.
  auto cs = pl.components;
  cs[2].digest = Digest::of("tampered lte");
  PlatformState st;
  st.state = BootState::Booted;
  for (const auto& c : cs) st.log.push_back({c.name, c.digest, c.pcr_index});
  st.pcrs = replay_log(st.log);
  const auto tampered = build_attestation_package(st, pl.cred, pl.secret, nonce_of(1));
  CHECK(verify_attestation(tampered, nonce_of(1), pl.rims, pl.registry) ==
        Verdict::rejected(RejectReason::Untrusted));

  // PCRs that do not match the log.
  auto lying = pkg;
  lying.pcr_values[0].value = Digest::of("x");
  lying.tag = compute_tag(pl.secret, lying);
  CHECK(verify_attestation(lying, nonce_of(1), pl.rims, pl.registry) ==
        Verdict::rejected(RejectReason::LogMismatch));

  // Booted without the enforcer.
  const std::vector<Component> bare(pl.components.begin(), pl.components.begin() + 2);
  const auto no_lte = build_attestation_package(secure_boot(bare, pl.rims, "root"), pl.cred, pl.secret, nonce_of(1));
  CHECK(verify_attestation(no_lte, nonce_of(1), pl.rims, pl.registry) == Verdict::rejected(RejectReason::NoLte));

  // Someone else's credential with our tag.
  auto other = pkg;
  other.credential.mt_id = "mt-2";
  CHECK(verify_attestation(other, nonce_of(1), pl.rims, pl.registry) == Verdict::rejected(RejectReason::Forged));
}

TEST_CASE("failed boot cannot attest") {
  Platform pl;
  auto bad = pl.components;
  bad[2].digest = Digest::of("tampered lte");
  const PlatformState st = secure_boot(bad, pl.rims, "root");
  REQUIRE(st.state == BootState::Failed);
  const auto pkg = build_attestation_package(st, pl.cred, pl.secret, nonce_of(4));
  CHECK(verify_attestation(pkg, nonce_of(4), pl.rims, pl.registry) == Verdict::rejected(RejectReason::Untrusted));
}

TEST_CASE("nonce binding") {
  Platform pl;
  const auto pkg = build_attestation_package(pl.state, pl.cred, pl.secret, nonce_of(1));
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    Nonce n;
    for (auto& b : n) b = static_cast<std::uint8_t>(rng());
    if (n == pkg.nonce) continue;
    CHECK_FALSE(verify_attestation(pkg, n, pl.rims, pl.registry).accepted());
  }
}

TEST_CASE("single byte mutations never verify") {
  Platform pl;
  const auto pkg = build_attestation_package(pl.state, pl.cred, pl.secret, nonce_of(1));
  REQUIRE(verify_attestation(pkg, nonce_of(1), pl.rims, pl.registry).accepted());

  std::mt19937_64 rng(12);
  int accepted = 0;
  for (int i = 0; i < 1000; ++i) {
    auto m = pkg;
    std::vector<std::uint8_t*> bytes;
    for (auto& b : m.nonce) bytes.push_back(&b);
    for (auto& p : m.pcr_values)
      for (auto& b : p.value.bytes) bytes.push_back(&b);
    for (auto& e : m.log) {
      for (auto& b : e.digest.bytes) bytes.push_back(&b);
      for (auto& c : e.component_name) bytes.push_back(reinterpret_cast<std::uint8_t*>(&c));
    }
    for (auto& c : m.credential.key_id) bytes.push_back(reinterpret_cast<std::uint8_t*>(&c));
    for (auto& c : m.credential.mt_id) bytes.push_back(reinterpret_cast<std::uint8_t*>(&c));
    for (auto& b : m.tag.bytes) bytes.push_back(&b);
    std::uniform_int_distribution<std::size_t> pick(0, bytes.size() - 1);
    std::uniform_int_distribution<int> flip(1, 255);
    *bytes[pick(rng)] ^= static_cast<std::uint8_t>(flip(rng));
    if (verify_attestation(m, nonce_of(1), pl.rims, pl.registry).accepted()) ++accepted;
  }
  CHECK(accepted == 0);
}
