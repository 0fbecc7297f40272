// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/bytes.hpp"
#include "danesd/wire.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace danesd::records {

// Absolute DNS names, lowercase, trailing dot.
using DnsName = std::string;

class NameError : public std::runtime_error {
public:
  explicit NameError(const std::string& what) : std::runtime_error("BadLabel: " + what) {}
};

struct ServiceKey {
  uint16_t service_id = 0;
  uint16_t instance_id = 0;
  uint8_t major = 0;
  uint32_t minor = 0;
  std::optional<std::string> domain;
  std::string vehicle; // label sequence, e.g. "vehicle1.oem"

  bool operator==(const ServiceKey&) const = default;
  auto operator<=>(const ServiceKey&) const = default;
};

struct ClientScope {
  uint16_t service_id = 0;
  uint16_t instance_id = 0;
  uint8_t major = 0;

  bool operator==(const ClientScope&) const = default;
};

struct ClientKey {
  uint16_t client_id = 0;
  std::optional<ClientScope> scope; // present only for service-scoped clients
  std::optional<std::string> domain;
  std::string vehicle;

  bool operator==(const ClientKey&) const = default;
};

enum class ScopeKind { service_specific, domain, vehicle_wide };

std::string to_string(ScopeKind k);
ScopeKind scope_kind(const ClientKey& key);

// _someip.<minor>.<major>.<instance>.<service>.service.[<domain>.]<vehicle>.
DnsName publisher_service_name(const ServiceKey& key);
// _<port>. prepended to the service name.
DnsName publisher_tlsa_name(const ServiceKey& key, uint16_t port);
// _someip-client.[<major>.<instance>.<service>.]<client>.client.[<domain>.]<vehicle>.
DnsName client_tlsa_name(const ClientKey& key);

// Inverse parsers. The vehicle label sequence disambiguates an optional
// domain label from the start of the vehicle name.
ServiceKey parse_publisher_service_name(const DnsName& name, const std::string& vehicle);
std::pair<ServiceKey, uint16_t> parse_publisher_tlsa_name(const DnsName& name,
                                                          const std::string& vehicle);
ClientKey parse_client_tlsa_name(const DnsName& name, const std::string& vehicle);

struct Endpoint {
  std::array<uint8_t, 4> addr{};
  uint16_t port = 0;
  uint8_t proto = wire::kIpProtoUdp;

  bool operator==(const Endpoint&) const = default;
  auto operator<=>(const Endpoint&) const = default;
};

std::string to_string(const Endpoint& e);
Endpoint endpoint_from_string(const std::string& text);

struct SvcbParams {
  uint16_t priority = 1;
  std::string target = "."; // "." = owner name
  std::array<uint8_t, 4> ipv4hint{};
  uint16_t port = 0;
  uint16_t instance = 0;
  uint8_t major = 0;
  uint32_t minor = 0;
  uint8_t ip_proto = wire::kIpProtoUdp;

  bool operator==(const SvcbParams&) const = default;
};

// Private-use SVCB key numbers behind the friendly parameter names.
constexpr uint16_t kSvcbKeyInstance = 65280;
constexpr uint16_t kSvcbKeyMajor = 65281;
constexpr uint16_t kSvcbKeyMinor = 65282;
constexpr uint16_t kSvcbKeyIpProto = 65283;

std::string to_presentation(const SvcbParams& p);
SvcbParams svcb_from_presentation(const std::string& text);

struct TlsaParams {
  uint8_t usage = 3;    // DANE-EE
  uint8_t selector = 0; // full certificate
  uint8_t matching = 0; // exact
  Bytes association_data;

  bool operator==(const TlsaParams&) const = default;
};

std::string to_presentation(const TlsaParams& p);
TlsaParams tlsa_from_presentation(const std::string& text);

// Fields of an Offer entry a subscriber checks against SVCB data.
struct OfferInfo {
  std::array<uint8_t, 4> addr{};
  uint16_t port = 0;
  uint8_t ip_proto = wire::kIpProtoUdp;
  uint16_t instance = 0;
  uint8_t major = 0;
  uint32_t minor = 0;

  bool operator==(const OfferInfo&) const = default;
};

// First record matching the offer on all of address, port, protocol,
// instance, major, and minor; nullopt when nothing matches.
std::optional<SvcbParams> match_offer_against_svcb(const OfferInfo& offer,
                                                   const std::vector<SvcbParams>& svcb_records);

std::string ipv4_to_string(const std::array<uint8_t, 4>& addr);
std::array<uint8_t, 4> ipv4_from_string(const std::string& text);

std::vector<std::string> split_labels(const DnsName& name);
void check_label(const std::string& label);

} // namespace danesd::records
