// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/dnssec.hpp"
#include "danesd/records.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace danesd::zoneforge {

class ForgeError : public std::runtime_error {
public:
  explicit ForgeError(const std::string& what) : std::runtime_error(what) {}
};

struct PublisherIdentity {
  records::ServiceKey service;
  records::Endpoint endpoint;
};

struct SubscriberIdentity {
  records::ClientKey client;
};

using Identity = std::variant<PublisherIdentity, SubscriberIdentity>;

// The DNS name the identity's certificate will be published under.
records::DnsName tlsa_name_of(const Identity& identity);

struct ValidityWindow {
  int64_t not_before = 0;
  int64_t not_after = 0;
};

// Everything the update supplier hands to the OEM: the signed software
// digest, the endpoint keypair, and the certificate, bound together by a
// detached supplier signature. Supplier keys never touch the zone.
struct SupplierBundle {
  Identity identity;
  crypto::KeyPair keypair;
  crypto::Certificate certificate;
  Bytes binary_digest;
  Bytes supplier_signature; // over certificate.der || binary_digest
  std::string supplier_name;
};

SupplierBundle supplier_issue(const Identity& identity, const ValidityWindow& validity,
                              const crypto::KeyPair& supplier_key,
                              const std::string& supplier_name,
                              crypto::SignatureScheme identity_scheme,
                              std::span<const uint8_t> software_binary);

bool verify_bundle(const SupplierBundle& bundle, const crypto::KeyPair& supplier_public);

// Adds/updates the TLSA record (and SVCB for publishers) and re-signs the
// touched rrsets with the vehicle ZSK. Refuses bundles whose supplier
// signature does not verify; the zone is left untouched then.
void oem_publish(dnssec::Zone& zone, const SupplierBundle& bundle,
                 const crypto::KeyPair& supplier_public, VirtualTime now);

struct PlanPublisher {
  records::ServiceKey service;
  records::Endpoint endpoint;
  std::string node;
};

struct PlanSubscriber {
  records::ClientKey client;
  records::ServiceKey target; // the service this client subscribes to
  std::string node;
};

struct VehicleZonePlan {
  std::string vehicle;
  std::vector<PlanPublisher> publishers;
  std::vector<PlanSubscriber> subscribers;
};

VehicleZonePlan parse_plan(const std::string& text);
std::string plan_to_text(const VehicleZonePlan& plan);

// One bundle per identity in the plan, issued under one supplier key.
std::vector<SupplierBundle> issue_for_plan(const VehicleZonePlan& plan,
                                           const crypto::KeyPair& supplier_key,
                                           const std::string& supplier_name,
                                           const ValidityWindow& validity,
                                           crypto::SignatureScheme identity_scheme);

// Complete `.service.` / `.client.` zone for the plan; every identity must
// have a bundle and names must be unique.
dnssec::Zone build_vehicle_zone(const VehicleZonePlan& plan,
                                const std::vector<SupplierBundle>& bundles,
                                const crypto::KeyPair& supplier_public, crypto::KeyPair zsk,
                                const crypto::KeyPair& ksk, VirtualTime now);

struct AuditEntry {
  records::DnsName name;
  int64_t not_after = 0;
};

// Certificates in the zone expiring within the horizon.
std::vector<AuditEntry> audit_expiring(const dnssec::Zone& zone, VirtualTime now,
                                       int64_t horizon_seconds);

} // namespace danesd::zoneforge
