#include "doctest.h"

#include "danesd/records.hpp"

#include <random>

using namespace danesd;
using namespace danesd::records;

namespace {

ServiceKey sample_service() {
  return ServiceKey{42, 1, 2, 3, std::nullopt, "vehicle1.oem"};
}

std::mt19937_64 rng(0x5EC0);

ServiceKey random_service_key() {
  ServiceKey k;
  k.service_id = static_cast<uint16_t>(rng());
  k.instance_id = static_cast<uint16_t>(rng());
  k.major = static_cast<uint8_t>(rng());
  k.minor = static_cast<uint32_t>(rng());
  if (rng() % 4 == 0)
    k.domain = "zone" + std::to_string(rng() % 10);
  k.vehicle = "car" + std::to_string(rng() % 1000) + ".oem";
  return k;
}

ClientKey random_client_key() {
  ClientKey k;
  k.client_id = static_cast<uint16_t>(rng());
  switch (rng() % 3) {
  case 0:
    k.scope = ClientScope{static_cast<uint16_t>(rng()), static_cast<uint16_t>(rng()),
                          static_cast<uint8_t>(rng())};
    break;
  case 1:
    k.domain = "dom" + std::to_string(rng() % 10);
    break;
  default:
    break;
  }
  k.vehicle = "car" + std::to_string(rng() % 1000) + ".oem";
  return k;
}

SvcbParams sample_svcb() {
  SvcbParams p;
  p.priority = 1;
  p.ipv4hint = {10, 0, 0, 2};
  p.port = 5000;
  p.instance = 1;
  p.major = 2;
  p.minor = 3;
  p.ip_proto = 17;
  return p;
}

OfferInfo offer_from(const SvcbParams& p) {
  return OfferInfo{p.ipv4hint, p.port, p.ip_proto, p.instance, p.major, p.minor};
}

} // namespace

TEST_CASE("publisher names match the documented scheme") {
  CHECK(publisher_service_name(sample_service()) == "_someip.3.2.1.42.service.vehicle1.oem.");
  CHECK(publisher_tlsa_name(sample_service(), 5000) ==
        "_5000._someip.3.2.1.42.service.vehicle1.oem.");

  ServiceKey zero{0, 0, 0, 0, std::nullopt, "v.o"};
  CHECK(publisher_service_name(zero) == "_someip.0.0.0.0.service.v.o.");
  CHECK(publisher_tlsa_name(zero, 1) == "_1._someip.0.0.0.0.service.v.o.");
}

TEST_CASE("client names carry scope labels only when scoped") {
  ClientKey scoped{17, ClientScope{42, 1, 2}, std::nullopt, "vehicle1.oem"};
  CHECK(client_tlsa_name(scoped) == "_someip-client.2.1.42.17.client.vehicle1.oem.");
  CHECK(scope_kind(scoped) == ScopeKind::service_specific);

  ClientKey wide{17, std::nullopt, std::nullopt, "vehicle1.oem"};
  CHECK(client_tlsa_name(wide) == "_someip-client.17.client.vehicle1.oem.");
  CHECK(scope_kind(wide) == ScopeKind::vehicle_wide);

  ClientKey domain_scoped{17, std::nullopt, "body", "vehicle1.oem"};
  CHECK(client_tlsa_name(domain_scoped) == "_someip-client.17.client.body.vehicle1.oem.");
  CHECK(scope_kind(domain_scoped) == ScopeKind::domain);
}

TEST_CASE("illegal labels are rejected") {
  ServiceKey bad = sample_service();
  bad.vehicle = "Vehicle1.oem"; // uppercase
  CHECK_THROWS_AS(publisher_service_name(bad), NameError);
  bad.vehicle = "veh icle.oem";
  CHECK_THROWS_AS(publisher_service_name(bad), NameError);
  CHECK_THROWS_AS(publisher_tlsa_name(sample_service(), 0), NameError);
}

TEST_CASE("service names parse back to the originating key") {
  for (int i = 0; i < 2000; ++i) {
    ServiceKey k = random_service_key();
    DnsName name = publisher_service_name(k);
    CHECK(parse_publisher_service_name(name, k.vehicle) == k);
  }
}

TEST_CASE("tlsa names parse back to key and port") {
  for (int i = 0; i < 2000; ++i) {
    ServiceKey k = random_service_key();
    uint16_t port = static_cast<uint16_t>(1 + rng() % 0xFFFE);
    auto [back, back_port] = parse_publisher_tlsa_name(publisher_tlsa_name(k, port), k.vehicle);
    CHECK(back == k);
    CHECK(back_port == port);
  }
}

TEST_CASE("client names parse back with scope kind preserved") {
  for (int i = 0; i < 2000; ++i) {
    ClientKey k = random_client_key();
    DnsName name = client_tlsa_name(k);
    ClientKey back = parse_client_tlsa_name(name, k.vehicle);
    CHECK(back == k);
    CHECK(scope_kind(back) == scope_kind(k));
  }
}

TEST_CASE("tlsa names extend the service name by exactly one port label") {
  ServiceKey k = sample_service();
  DnsName service = publisher_service_name(k);
  DnsName tlsa = publisher_tlsa_name(k, 5000);
  CHECK(tlsa == "_5000." + service);
}

TEST_CASE("svcb presentation matches the zone file shape") {
  CHECK(to_presentation(sample_svcb()) ==
        "1 . ipv4hint=10.0.0.2 port=5000 instance=1 major=2 minor=3 ip_proto=17");
  CHECK(svcb_from_presentation(to_presentation(sample_svcb())) == sample_svcb());
}

TEST_CASE("tlsa presentation matches the zone file shape") {
  TlsaParams p{3, 0, 0, Bytes{0x30, 0x82, 0x05, 0x01}};
  CHECK(to_presentation(p) == "3 0 0 30820501");
  CHECK(tlsa_from_presentation("3 0 0 30820501") == p);
}

TEST_CASE("offer matching accepts the published record") {
  auto matched = match_offer_against_svcb(offer_from(sample_svcb()), {sample_svcb()});
  REQUIRE(matched.has_value());
  CHECK(*matched == sample_svcb());
}

TEST_CASE("single field mismatch yields no match") {
  SvcbParams rec = sample_svcb();
  OfferInfo base = offer_from(rec);

  OfferInfo wrong_port = base;
  wrong_port.port = 5001;
  CHECK_FALSE(match_offer_against_svcb(wrong_port, {rec}).has_value());

  // Exhaustive single-field mutation: every field deviation must miss.
  for (int field = 0; field < 6; ++field) {
    OfferInfo mutated = base;
    switch (field) {
    case 0:
      mutated.addr[3] ^= 1;
      break;
    case 1:
      mutated.port ^= 1;
      break;
    case 2:
      mutated.ip_proto = (mutated.ip_proto == 17) ? 6 : 17;
      break;
    case 3:
      mutated.instance ^= 1;
      break;
    case 4:
      mutated.major ^= 1;
      break;
    case 5:
      mutated.minor ^= 1;
      break;
    }
    CAPTURE(field);
    CHECK_FALSE(match_offer_against_svcb(mutated, {rec}).has_value());
    CHECK(match_offer_against_svcb(base, {rec}).has_value());
  }
}

TEST_CASE("offer synthesized from any record matches it regardless of list order") {
  std::vector<SvcbParams> records;
  for (int i = 0; i < 8; ++i) {
    SvcbParams p = sample_svcb();
    p.port = static_cast<uint16_t>(5000 + i);
    p.instance = static_cast<uint16_t>(1 + i);
    records.push_back(p);
  }
  for (const auto& rec : records) {
    auto fwd = match_offer_against_svcb(offer_from(rec), records);
    auto rev = match_offer_against_svcb(offer_from(rec),
                                        {records.rbegin(), records.rend()});
    REQUIRE(fwd.has_value());
    REQUIRE(rev.has_value());
    CHECK(*fwd == *rev); // unique match, so order cannot change the result
  }
}
