#include "doctest.h"

#include "danesd/resolver.hpp"

using namespace danesd;
using namespace danesd::dnssec;

namespace {

struct TestZone {
  crypto::KeyPair ksk = crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256,
                                                  crypto::KeyUsage::key_signing);
  crypto::KeyPair identity = crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256,
                                                       crypto::KeyUsage::identity);
  crypto::Certificate cert;
  Zone zone{"vehicle1.oem."};

  explicit TestZone(VirtualTime now = 0) {
    zone.set_zsk(crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256,
                                           crypto::KeyUsage::zone_signing));
    cert = crypto::make_certificate(identity, "_5000._someip.3.2.1.42.service.vehicle1.oem.",
                                    to_seconds(now), to_seconds(now) + 86400 * 365);
    records::SvcbParams svcb;
    svcb.ipv4hint = {10, 0, 0, 2};
    svcb.port = 5000;
    svcb.instance = 1;
    svcb.major = 2;
    svcb.minor = 3;
    zone.add_record("_someip.3.2.1.42.service.vehicle1.oem.", RrType::svcb,
                    records::to_presentation(svcb));
    zone.add_record("_5000._someip.3.2.1.42.service.vehicle1.oem.", RrType::tlsa,
                    records::to_presentation(crypto::build_tlsa(cert)));
    zone.add_record("_someip-client.2.1.42.17.client.vehicle1.oem.", RrType::tlsa,
                    records::to_presentation(crypto::build_tlsa(cert)));
    zone.sign(now, &ksk);
  }

  crypto::KeyPair anchor() const {
    return crypto::KeyPair::from_public_key_der(ksk.public_key_der(), ksk.scheme(),
                                                crypto::KeyUsage::key_signing);
  }
};

// Source that flips one rdata byte for a chosen owner, after signing.
class TamperingSource : public ZoneSource {
public:
  TamperingSource(const Zone* zone, DnsName target) : inner_(zone), target_(std::move(target)) {}

  bool reachable() const override { return inner_.reachable(); }
  bool name_exists(const DnsName& name) override { return inner_.name_exists(name); }
  SignedRrSet dnskey() override { return inner_.dnskey(); }

  std::optional<SignedRrSet> fetch(const DnsName& name, RrType type) override {
    auto out = inner_.fetch(name, type);
    if (out && name == target_)
      tamper(*out);
    return out;
  }
  std::vector<SignedRrSet> all_signed() override {
    auto out = inner_.all_signed();
    for (auto& s : out)
      if (s.rrset.owner == target_)
        tamper(s);
    return out;
  }

private:
  static void tamper(SignedRrSet& s) {
    if (!s.rrset.rdatas.empty() && !s.rrset.rdatas[0].empty())
      s.rrset.rdatas[0][s.rrset.rdatas[0].size() / 2] ^= 0x01;
  }
  ZoneBackedSource inner_;
  DnsName target_;
};

} // namespace

TEST_CASE("freshly signed rrsets validate secure") {
  TestZone t;
  for (const auto& [key, rrset] : t.zone.rrsets()) {
    auto sig = t.zone.rrsigs().at(key);
    crypto::KeyPair zsk_pub = crypto::KeyPair::from_public_key_der(
        t.zone.zsk().public_key_der(), t.zone.zsk().scheme(), crypto::KeyUsage::zone_signing);
    CHECK(validate_rrset(rrset, sig, zsk_pub, 0) == ValidationStatus::secure);
  }
}

TEST_CASE("rrsig from another zone's key validates bogus") {
  TestZone t;
  crypto::KeyPair other = crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256,
                                                    crypto::KeyUsage::zone_signing);
  crypto::KeyPair other_pub = crypto::KeyPair::from_public_key_der(
      other.public_key_der(), other.scheme(), crypto::KeyUsage::zone_signing);
  auto key = t.zone.rrsets().begin()->first;
  CHECK(validate_rrset(t.zone.rrsets().at(key), t.zone.rrsigs().at(key), other_pub, 0) ==
        ValidationStatus::bogus);
}

TEST_CASE("validity window boundaries flip validation") {
  TestZone t(10 * kNsPerSec);
  auto key = t.zone.rrsets().begin()->first;
  const auto& rrset = t.zone.rrsets().at(key);
  const auto& sig = t.zone.rrsigs().at(key);
  crypto::KeyPair zsk_pub = crypto::KeyPair::from_public_key_der(
      t.zone.zsk().public_key_der(), t.zone.zsk().scheme(), crypto::KeyUsage::zone_signing);

  VirtualTime inception = sig.inception * kNsPerSec;
  VirtualTime expiration = sig.expiration * kNsPerSec;
  CHECK(validate_rrset(rrset, sig, zsk_pub, inception - kNsPerSec) == ValidationStatus::bogus);
  CHECK(validate_rrset(rrset, sig, zsk_pub, inception) == ValidationStatus::secure);
  CHECK(validate_rrset(rrset, sig, zsk_pub, expiration - kNsPerSec) == ValidationStatus::secure);
  CHECK(validate_rrset(rrset, sig, zsk_pub, expiration) == ValidationStatus::bogus);
  CHECK(validate_rrset(rrset, sig, zsk_pub, expiration + kNsPerSec) == ValidationStatus::bogus);
}

TEST_CASE("any single byte flip after signing validates bogus") {
  TestZone t;
  crypto::KeyPair zsk_pub = crypto::KeyPair::from_public_key_der(
      t.zone.zsk().public_key_der(), t.zone.zsk().scheme(), crypto::KeyUsage::zone_signing);
  for (const auto& [key, rrset] : t.zone.rrsets()) {
    const auto& sig = t.zone.rrsigs().at(key);
    // Exhaustive sweep; the zone is small so every byte is affordable.
    for (size_t i = 0; i < rrset.rdatas[0].size(); ++i) {
      RrSet mutated = rrset;
      mutated.rdatas[0][i] ^= 0x01;
      CHECK(validate_rrset(mutated, sig, zsk_pub, 0) == ValidationStatus::bogus);
    }
  }
}

TEST_CASE("empty zone signs to a DNSKEY rrset plus its signature, nothing else") {
  TestZone t;
  Zone empty("car9.oem.");
  empty.set_zsk(crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256,
                                          crypto::KeyUsage::zone_signing));
  empty.sign(0, &t.ksk);
  CHECK(empty.rrsets().empty());
  CHECK(empty.dnskey_rrset().rdatas.size() == 1);
  CHECK(empty.dnskey_rrsig().has_value());
  CHECK(empty.rrset_count() == 1);
  CHECK(empty.record_name_count() == 0);
}

TEST_CASE("signing without a ZSK reports a missing key") {
  Zone zone("x.oem.");
  CHECK_THROWS_AS(zone.sign(0), crypto::CryptoError);
}

TEST_CASE("zone refuses wrongly tagged keys") {
  Zone zone("x.oem.");
  CHECK_THROWS_AS(zone.set_zsk(crypto::KeyPair::generate(
                      crypto::SignatureScheme::ecdsa_p256_sha256, crypto::KeyUsage::supplier)),
                  crypto::CryptoError);
  zone.set_zsk(crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256,
                                         crypto::KeyUsage::zone_signing));
  crypto::KeyPair not_a_ksk =
      crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256, crypto::KeyUsage::identity);
  CHECK_THROWS_AS(zone.sign(0, &not_a_ksk), crypto::CryptoError);
}

TEST_CASE("resolver returns the golden tlsa record secure") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  auto result = resolver.resolve("_5000._someip.3.2.1.42.service.vehicle1.oem.", RrType::tlsa, 0);
  CHECK(result.rcode == Rcode::ok);
  CHECK(result.status == ValidationStatus::secure);
  REQUIRE(result.rdatas.size() == 1);
  CHECK(result.rdatas[0].substr(0, 6) == "3 0 0 ");
  CHECK(records::tlsa_from_presentation(result.rdatas[0]).association_data == t.cert.der);
}

TEST_CASE("second resolve within ttl is a cache hit with zero fetches") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  DnsName name = "_someip.3.2.1.42.service.vehicle1.oem.";
  auto first = resolver.resolve(name, RrType::svcb, 0);
  CHECK_FALSE(first.from_cache);
  uint64_t fetches = resolver.upstream_fetches();
  auto second = resolver.resolve(name, RrType::svcb, kNsPerSec);
  CHECK(second.from_cache);
  CHECK(second.rdatas == first.rdatas);
  CHECK(resolver.upstream_fetches() == fetches);
}

TEST_CASE("cache entries are never served past their ttl") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  DnsName name = "_someip.3.2.1.42.service.vehicle1.oem.";
  (void)resolver.resolve(name, RrType::svcb, 0);
  VirtualTime just_before = static_cast<VirtualTime>(kDefaultRecordTtl) * kNsPerSec - 1;
  CHECK(resolver.resolve(name, RrType::svcb, just_before).from_cache);
  CHECK_FALSE(resolver.resolve(name, RrType::svcb, just_before + 1).from_cache);
}

TEST_CASE("preload then offline serves everything secure from cache") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  auto report = resolver.preload(0);
  CHECK(report.cached == t.zone.rrset_count());
  CHECK(report.rejected == 0);

  source.set_connected(false);
  uint64_t fetches = resolver.upstream_fetches();
  for (const auto& [key, _] : t.zone.rrsets()) {
    auto result = resolver.resolve(key.first, key.second, kNsPerSec);
    CHECK(result.status == ValidationStatus::secure);
    CHECK(result.from_cache);
  }
  CHECK(resolver.upstream_fetches() == fetches);

  // Past TTL the cache cannot help and the source is gone.
  auto late = resolver.resolve("_someip.3.2.1.42.service.vehicle1.oem.", RrType::svcb,
                               (static_cast<VirtualTime>(kDefaultRecordTtl) + 5) * kNsPerSec);
  CHECK(late.rcode == Rcode::servfail);
}

TEST_CASE("preload reports tampered records by name and keeps the rest") {
  TestZone t;
  DnsName victim = "_someip-client.2.1.42.17.client.vehicle1.oem.";
  TamperingSource source(&t.zone, victim);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  auto report = resolver.preload(0);
  CHECK(report.cached == t.zone.rrset_count() - 1);
  CHECK(report.rejected == 1);
  REQUIRE(report.rejected_names.size() == 1);
  CHECK(report.rejected_names[0] == victim);
}

TEST_CASE("unreachable source without cache is servfail, preload throws") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  source.set_connected(false);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);
  CHECK(resolver.resolve("_someip.3.2.1.42.service.vehicle1.oem.", RrType::svcb, 0).rcode ==
        Rcode::servfail);
  CHECK_THROWS_AS(resolver.preload(0), ZoneError);
}

TEST_CASE("missing names produce cacheable negative answers") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  auto nx = resolver.resolve("_5000._someip.3.2.1.42.service.other.oem.", RrType::tlsa, 0);
  CHECK(nx.rcode == Rcode::nxdomain);
  // In-zone name without data of the requested type.
  auto nodata = resolver.resolve("_someip.3.2.1.42.service.vehicle1.oem.", RrType::tlsa, 0);
  CHECK(nodata.rcode == Rcode::nodata);

  uint64_t fetches = resolver.upstream_fetches();
  auto again = resolver.resolve("_5000._someip.3.2.1.42.service.other.oem.", RrType::tlsa,
                                kNsPerSec);
  CHECK(again.rcode == Rcode::nxdomain);
  CHECK(again.from_cache);
  CHECK(resolver.upstream_fetches() == fetches);

  // Negative entries expire on their own shorter ttl.
  auto after = resolver.resolve("_5000._someip.3.2.1.42.service.other.oem.", RrType::tlsa,
                                (kNegativeTtl + 1) * kNsPerSec);
  CHECK_FALSE(after.from_cache);
}

TEST_CASE("rollover serves both certificates then only the new one") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  DnsName name = "_5000._someip.3.2.1.42.service.vehicle1.oem.";
  crypto::KeyPair next = crypto::KeyPair::generate(crypto::SignatureScheme::ecdsa_p256_sha256,
                                                   crypto::KeyUsage::identity);
  crypto::Certificate next_cert = crypto::make_certificate(next, name, 0, 86400 * 365);
  std::string old_rdata = records::to_presentation(crypto::build_tlsa(t.cert));
  std::string new_rdata = records::to_presentation(crypto::build_tlsa(next_cert));

  t.zone.rollover_add(name, RrType::tlsa, new_rdata, 0);
  auto both = resolver.resolve(name, RrType::tlsa, 0);
  CHECK(both.status == ValidationStatus::secure);
  CHECK(both.rdatas.size() == 2);

  t.zone.rollover_remove(name, RrType::tlsa, old_rdata, kNsPerSec);
  // Still the cached pair inside the ttl, only the new record after expiry.
  CHECK(resolver.resolve(name, RrType::tlsa, 2 * kNsPerSec).rdatas.size() == 2);
  VirtualTime past_ttl = (static_cast<VirtualTime>(kDefaultRecordTtl) + 2) * kNsPerSec;
  auto after = resolver.resolve(name, RrType::tlsa, past_ttl);
  CHECK(after.status == ValidationStatus::secure);
  REQUIRE(after.rdatas.size() == 1);
  CHECK(after.rdatas[0] == new_rdata);
}

TEST_CASE("removing the only record leads to nodata") {
  TestZone t;
  ZoneBackedSource source(&t.zone);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);

  DnsName name = "_someip-client.2.1.42.17.client.vehicle1.oem.";
  std::string rdata = t.zone.find(name, RrType::tlsa)->rdatas[0];
  t.zone.rollover_remove(name, RrType::tlsa, rdata, 0);
  auto result = resolver.resolve(name, RrType::tlsa, 0);
  CHECK(result.rcode == Rcode::nodata);

  CHECK_THROWS_AS(t.zone.rollover_remove(name, RrType::tlsa, rdata, 0), ZoneError);
}

TEST_CASE("identical query sequences yield identical traces") {
  auto run = [](const TestZone& t) {
    ZoneBackedSource source(&t.zone);
    Resolver resolver(t.anchor());
    resolver.set_source(&source);
    std::string trace;
    VirtualTime now = 0;
    for (int round = 0; round < 3; ++round) {
      for (const auto& [key, _] : t.zone.rrsets()) {
        auto r = resolver.resolve(key.first, key.second, now);
        trace += key.first + "|" + to_string(r.rcode) + "|" + to_string(r.status) + "|" +
            std::to_string(r.rdatas.size()) + "|" + std::to_string(resolver.upstream_fetches()) +
            "\n";
        now += 10 * kNsPerMs;
      }
    }
    return trace;
  };
  TestZone t;
  CHECK(run(t) == run(t));
}

TEST_CASE("zone files round-trip and still validate") {
  TestZone t;
  std::string text = t.zone.to_zone_file();
  Zone loaded = Zone::from_zone_file(text);
  CHECK(loaded.apex() == t.zone.apex());
  CHECK(loaded.record_name_count() == t.zone.record_name_count());

  ZoneBackedSource source(&loaded);
  Resolver resolver(t.anchor());
  resolver.set_source(&source);
  auto report = resolver.preload(0);
  CHECK(report.cached == loaded.rrset_count());
  CHECK(report.rejected == 0);
}
