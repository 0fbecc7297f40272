// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/zoneforge.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace danesd::zoneforge {

using records::DnsName;

records::DnsName tlsa_name_of(const Identity& identity) {
  if (const auto* pub = std::get_if<PublisherIdentity>(&identity))
    return records::publisher_tlsa_name(pub->service, pub->endpoint.port);
  return records::client_tlsa_name(std::get<SubscriberIdentity>(identity).client);
}

static Bytes bundle_message(const crypto::Certificate& cert, std::span<const uint8_t> digest) {
  Bytes msg = cert.der;
  msg.insert(msg.end(), digest.begin(), digest.end());
  return msg;
}

SupplierBundle supplier_issue(const Identity& identity, const ValidityWindow& validity,
                              const crypto::KeyPair& supplier_key,
                              const std::string& supplier_name,
                              crypto::SignatureScheme identity_scheme,
                              std::span<const uint8_t> software_binary) {
  if (supplier_key.usage() != crypto::KeyUsage::supplier)
    throw crypto::CryptoError(crypto::CryptoErrorKind::key_usage_violation,
                              "bundle signing requires a supplier key");
  if (validity.not_after <= validity.not_before)
    throw ForgeError("validity window is empty");

  SupplierBundle bundle;
  bundle.identity = identity;
  bundle.supplier_name = supplier_name;
  bundle.keypair = crypto::KeyPair::generate(identity_scheme, crypto::KeyUsage::identity);
  bundle.certificate = crypto::make_certificate(bundle.keypair, tlsa_name_of(identity),
                                                validity.not_before, validity.not_after);
  bundle.binary_digest = crypto::sha256(software_binary);
  bundle.supplier_signature =
      supplier_key.sign(bundle_message(bundle.certificate, bundle.binary_digest));
  return bundle;
}

bool verify_bundle(const SupplierBundle& bundle, const crypto::KeyPair& supplier_public) {
  try {
    crypto::Certificate parsed = crypto::certificate_from_der(bundle.certificate.der);
    if (parsed.subject != tlsa_name_of(bundle.identity))
      return false;
    return supplier_public.verify(bundle_message(bundle.certificate, bundle.binary_digest),
                                  bundle.supplier_signature);
  } catch (const std::exception&) {
    return false;
  }
}

void oem_publish(dnssec::Zone& zone, const SupplierBundle& bundle,
                 const crypto::KeyPair& supplier_public, VirtualTime now) {
  if (!verify_bundle(bundle, supplier_public))
    throw ForgeError("BadBundleSignature: publication refused for " +
                     tlsa_name_of(bundle.identity));

  DnsName tlsa_name = tlsa_name_of(bundle.identity);
  zone.rollover_add(tlsa_name, dnssec::RrType::tlsa,
                    records::to_presentation(crypto::build_tlsa(bundle.certificate)), now);

  if (const auto* pub = std::get_if<PublisherIdentity>(&bundle.identity)) {
    records::SvcbParams svcb;
    svcb.ipv4hint = pub->endpoint.addr;
    svcb.port = pub->endpoint.port;
    svcb.ip_proto = pub->endpoint.proto;
    svcb.instance = pub->service.instance_id;
    svcb.major = pub->service.major;
    svcb.minor = pub->service.minor;
    zone.rollover_add(records::publisher_service_name(pub->service), dnssec::RrType::svcb,
                      records::to_presentation(svcb), now);
  }
}

std::vector<SupplierBundle> issue_for_plan(const VehicleZonePlan& plan,
                                           const crypto::KeyPair& supplier_key,
                                           const std::string& supplier_name,
                                           const ValidityWindow& validity,
                                           crypto::SignatureScheme identity_scheme) {
  std::vector<SupplierBundle> bundles;
  bundles.reserve(plan.publishers.size() + plan.subscribers.size());
  Bytes binary = {0xB1, 0x4A, 0x17}; // stand-in software image
  for (const auto& pub : plan.publishers)
    bundles.push_back(supplier_issue(PublisherIdentity{pub.service, pub.endpoint}, validity,
                                     supplier_key, supplier_name, identity_scheme, binary));
  for (const auto& sub : plan.subscribers)
    bundles.push_back(supplier_issue(SubscriberIdentity{sub.client}, validity, supplier_key,
                                     supplier_name, identity_scheme, binary));
  return bundles;
}

dnssec::Zone build_vehicle_zone(const VehicleZonePlan& plan,
                                const std::vector<SupplierBundle>& bundles,
                                const crypto::KeyPair& supplier_public, crypto::KeyPair zsk,
                                const crypto::KeyPair& ksk, VirtualTime now) {
  dnssec::Zone zone(plan.vehicle + ".");
  zone.set_zsk(std::move(zsk));

  std::map<DnsName, const SupplierBundle*> by_name;
  for (const auto& bundle : bundles)
    by_name[tlsa_name_of(bundle.identity)] = &bundle;

  std::set<DnsName> seen;
  auto require_unique = [&seen](const DnsName& name) {
    if (!seen.insert(name).second)
      throw ForgeError("DuplicateName: " + name);
  };

  for (const auto& pub : plan.publishers) {
    DnsName tlsa_name = records::publisher_tlsa_name(pub.service, pub.endpoint.port);
    require_unique(records::publisher_service_name(pub.service));
    require_unique(tlsa_name);
    auto it = by_name.find(tlsa_name);
    if (it == by_name.end())
      throw ForgeError("MissingBundle: " + tlsa_name);
    oem_publish(zone, *it->second, supplier_public, now);
  }
  for (const auto& sub : plan.subscribers) {
    DnsName tlsa_name = records::client_tlsa_name(sub.client);
    require_unique(tlsa_name);
    auto it = by_name.find(tlsa_name);
    if (it == by_name.end())
      throw ForgeError("MissingBundle: " + tlsa_name);
    oem_publish(zone, *it->second, supplier_public, now);
  }
  zone.sign(now, &ksk);
  return zone;
}

std::vector<AuditEntry> audit_expiring(const dnssec::Zone& zone, VirtualTime now,
                                       int64_t horizon_seconds) {
  std::vector<AuditEntry> out;
  int64_t deadline = to_seconds(now) + horizon_seconds;
  for (const auto& [key, rrset] : zone.rrsets()) {
    if (key.second != dnssec::RrType::tlsa)
      continue;
    for (const auto& rdata : rrset.rdatas) {
      try {
        records::TlsaParams tlsa = records::tlsa_from_presentation(rdata);
        if (tlsa.matching != 0)
          continue; // digest-only associations carry no validity metadata
        crypto::Certificate cert = crypto::certificate_from_der(tlsa.association_data);
        if (cert.not_after <= deadline)
          out.push_back({key.first, cert.not_after});
      } catch (const std::exception&) {
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const AuditEntry& a, const AuditEntry& b) { return a.not_after < b.not_after; });
  return out;
}

// Plan grammar, one directive per line:
//   vehicle <labels>
//   publisher service=<id> instance=<id> major=<n> minor=<n> endpoint=<a.b.c.d:port[/proto]> [node=<name>]
//   subscriber client=<id> scope=service|domain:<label>|vehicle target=<service>/<instance>/<major> [node=<name>]
VehicleZonePlan parse_plan(const std::string& text) {
  VehicleZonePlan plan;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;

    auto fields = [&ls]() {
      std::map<std::string, std::string> out;
      std::string token;
      while (ls >> token) {
        size_t eq = token.find('=');
        if (eq == std::string::npos)
          throw ForgeError("plan field without '=': " + token);
        out[token.substr(0, eq)] = token.substr(eq + 1);
      }
      return out;
    };
    auto need = [&line_no](std::map<std::string, std::string>& f, const std::string& key) {
      auto it = f.find(key);
      if (it == f.end())
        throw ForgeError("plan line " + std::to_string(line_no) + " missing '" + key + "'");
      return it->second;
    };

    if (kind == "vehicle") {
      ls >> plan.vehicle;
    } else if (kind == "publisher") {
      auto f = fields();
      PlanPublisher pub;
      pub.service.service_id = static_cast<uint16_t>(std::stoul(need(f, "service")));
      pub.service.instance_id = static_cast<uint16_t>(std::stoul(need(f, "instance")));
      pub.service.major = static_cast<uint8_t>(std::stoul(need(f, "major")));
      pub.service.minor = static_cast<uint32_t>(std::stoul(need(f, "minor")));
      pub.service.vehicle = plan.vehicle;
      pub.endpoint = records::endpoint_from_string(need(f, "endpoint"));
      if (f.count("node"))
        pub.node = f["node"];
      plan.publishers.push_back(std::move(pub));
    } else if (kind == "subscriber") {
      auto f = fields();
      PlanSubscriber sub;
      sub.client.client_id = static_cast<uint16_t>(std::stoul(need(f, "client")));
      sub.client.vehicle = plan.vehicle;
      std::string target = need(f, "target");
      size_t s1 = target.find('/'), s2 = target.rfind('/');
      if (s1 == std::string::npos || s2 == s1)
        throw ForgeError("target needs service/instance/major: " + target);
      sub.target.service_id = static_cast<uint16_t>(std::stoul(target.substr(0, s1)));
      sub.target.instance_id = static_cast<uint16_t>(std::stoul(target.substr(s1 + 1, s2 - s1 - 1)));
      sub.target.major = static_cast<uint8_t>(std::stoul(target.substr(s2 + 1)));
      sub.target.vehicle = plan.vehicle;
      std::string scope = need(f, "scope");
      if (scope == "service") {
        sub.client.scope = records::ClientScope{sub.target.service_id, sub.target.instance_id,
                                                sub.target.major};
      } else if (scope.rfind("domain:", 0) == 0) {
        sub.client.domain = scope.substr(7);
      } else if (scope != "vehicle") {
        throw ForgeError("unknown scope: " + scope);
      }
      if (f.count("node"))
        sub.node = f["node"];
      plan.subscribers.push_back(std::move(sub));
    } else {
      throw ForgeError("unknown plan directive '" + kind + "' on line " + std::to_string(line_no));
    }
  }
  if (plan.vehicle.empty())
    throw ForgeError("plan without a vehicle directive");
  return plan;
}

std::string plan_to_text(const VehicleZonePlan& plan) {
  std::ostringstream os;
  os << "vehicle " << plan.vehicle << "\n";
  for (const auto& pub : plan.publishers) {
    os << "publisher service=" << pub.service.service_id << " instance=" << pub.service.instance_id
       << " major=" << static_cast<int>(pub.service.major) << " minor=" << pub.service.minor
       << " endpoint=" << records::to_string(pub.endpoint);
    if (!pub.node.empty())
      os << " node=" << pub.node;
    os << "\n";
  }
  for (const auto& sub : plan.subscribers) {
    os << "subscriber client=" << sub.client.client_id << " scope=";
    if (sub.client.scope)
      os << "service";
    else if (sub.client.domain)
      os << "domain:" << *sub.client.domain;
    else
      os << "vehicle";
    os << " target=" << sub.target.service_id << "/" << sub.target.instance_id << "/"
       << static_cast<int>(sub.target.major);
    if (!sub.node.empty())
      os << " node=" << sub.node;
    os << "\n";
  }
  return os.str();
}

} // namespace danesd::zoneforge
