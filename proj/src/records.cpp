// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/records.hpp"

#include <charconv>
#include <sstream>

namespace danesd::records {

namespace {

uint64_t parse_number(const std::string& label, uint64_t max, const char* what) {
  uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
  if (ec != std::errc{} || ptr != label.data() + label.size() || value > max)
    throw NameError(std::string("not a valid ") + what + ": '" + label + "'");
  return value;
}

std::string join_labels(const std::vector<std::string>& labels, size_t from, size_t to) {
  std::string out;
  for (size_t i = from; i < to; ++i) {
    out += labels[i];
    if (i + 1 < to)
      out += '.';
  }
  return out;
}

void append_zone_suffix(std::string& name, const std::optional<std::string>& domain,
                        const std::string& vehicle) {
  if (domain) {
    check_label(*domain);
    name += *domain + ".";
  }
  for (const auto& label : split_labels(vehicle + "."))
    check_label(label);
  name += vehicle + ".";
}

// Strips "<subtree>.[domain.]<vehicle>." off the back, returns remaining
// front labels and the domain label if one sits between subtree and vehicle.
std::pair<std::vector<std::string>, std::optional<std::string>>
strip_zone_suffix(const DnsName& name, const std::string& subtree, const std::string& vehicle) {
  auto labels = split_labels(name);
  auto vehicle_labels = split_labels(vehicle + ".");
  if (labels.size() < vehicle_labels.size() + 1)
    throw NameError("name too short for zone '" + vehicle + "': " + name);
  size_t vehicle_at = labels.size() - vehicle_labels.size();
  for (size_t i = 0; i < vehicle_labels.size(); ++i)
    if (labels[vehicle_at + i] != vehicle_labels[i])
      throw NameError("name not under zone '" + vehicle + "': " + name);

  std::optional<std::string> domain;
  size_t subtree_at = vehicle_at - 1;
  if (labels[subtree_at] != subtree) {
    if (subtree_at == 0 || labels[subtree_at - 1] != subtree)
      throw NameError("missing '" + subtree + "' label: " + name);
    domain = labels[subtree_at];
    subtree_at -= 1;
  }
  labels.resize(subtree_at);
  return {std::move(labels), std::move(domain)};
}

} // namespace

void check_label(const std::string& label) {
  if (label.empty() || label.size() > 63)
    throw NameError("label length out of range: '" + label + "'");
  for (char c : label) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
    if (!ok)
      throw NameError("illegal character in label '" + label + "'");
  }
}

std::vector<std::string> split_labels(const DnsName& name) {
  if (name.empty() || name.back() != '.')
    throw NameError("name must be absolute (trailing dot): '" + name + "'");
  std::vector<std::string> labels;
  std::string current;
  for (char c : name) {
    if (c == '.') {
      if (current.empty())
        throw NameError("empty label in '" + name + "'");
      labels.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  return labels;
}

std::string to_string(ScopeKind k) {
  switch (k) {
  case ScopeKind::service_specific:
    return "service-specific";
  case ScopeKind::domain:
    return "domain";
  case ScopeKind::vehicle_wide:
    return "vehicle-wide";
  }
  return "?";
}

ScopeKind scope_kind(const ClientKey& key) {
  if (key.scope)
    return ScopeKind::service_specific;
  if (key.domain)
    return ScopeKind::domain;
  return ScopeKind::vehicle_wide;
}

DnsName publisher_service_name(const ServiceKey& key) {
  std::string name = "_someip." + std::to_string(key.minor) + "." + std::to_string(key.major) + "." +
      std::to_string(key.instance_id) + "." + std::to_string(key.service_id) + ".service.";
  append_zone_suffix(name, key.domain, key.vehicle);
  return name;
}

DnsName publisher_tlsa_name(const ServiceKey& key, uint16_t port) {
  if (port == 0)
    throw NameError("port must be non-zero");
  return "_" + std::to_string(port) + "." + publisher_service_name(key);
}

DnsName client_tlsa_name(const ClientKey& key) {
  std::string name = "_someip-client.";
  if (key.scope) {
    name += std::to_string(key.scope->major) + "." + std::to_string(key.scope->instance_id) + "." +
        std::to_string(key.scope->service_id) + ".";
  }
  name += std::to_string(key.client_id) + ".client.";
  append_zone_suffix(name, key.domain, key.vehicle);
  return name;
}

ServiceKey parse_publisher_service_name(const DnsName& name, const std::string& vehicle) {
  auto [front, domain] = strip_zone_suffix(name, "service", vehicle);
  if (front.size() != 5 || front[0] != "_someip")
    throw NameError("not a publisher service name: " + name);
  ServiceKey key;
  key.minor = static_cast<uint32_t>(parse_number(front[1], 0xFFFFFFFF, "minor version"));
  key.major = static_cast<uint8_t>(parse_number(front[2], 0xFF, "major version"));
  key.instance_id = static_cast<uint16_t>(parse_number(front[3], 0xFFFF, "instance id"));
  key.service_id = static_cast<uint16_t>(parse_number(front[4], 0xFFFF, "service id"));
  key.domain = domain;
  key.vehicle = vehicle;
  return key;
}

std::pair<ServiceKey, uint16_t> parse_publisher_tlsa_name(const DnsName& name,
                                                          const std::string& vehicle) {
  auto labels = split_labels(name);
  if (labels.empty() || labels[0].size() < 2 || labels[0][0] != '_')
    throw NameError("not a publisher tlsa name: " + name);
  uint16_t port =
      static_cast<uint16_t>(parse_number(labels[0].substr(1), 0xFFFF, "port"));
  if (port == 0)
    throw NameError("port must be non-zero: " + name);
  DnsName rest = join_labels(labels, 1, labels.size()) + ".";
  return {parse_publisher_service_name(rest, vehicle), port};
}

ClientKey parse_client_tlsa_name(const DnsName& name, const std::string& vehicle) {
  auto [front, domain] = strip_zone_suffix(name, "client", vehicle);
  if (front.empty() || front[0] != "_someip-client")
    throw NameError("not a client tlsa name: " + name);
  ClientKey key;
  key.domain = domain;
  key.vehicle = vehicle;
  if (front.size() == 2) {
    key.client_id = static_cast<uint16_t>(parse_number(front[1], 0xFFFF, "client id"));
  } else if (front.size() == 5) {
    ClientScope scope;
    scope.major = static_cast<uint8_t>(parse_number(front[1], 0xFF, "major version"));
    scope.instance_id = static_cast<uint16_t>(parse_number(front[2], 0xFFFF, "instance id"));
    scope.service_id = static_cast<uint16_t>(parse_number(front[3], 0xFFFF, "service id"));
    key.scope = scope;
    key.client_id = static_cast<uint16_t>(parse_number(front[4], 0xFFFF, "client id"));
  } else {
    throw NameError("client name has unexpected label count: " + name);
  }
  return key;
}

std::string ipv4_to_string(const std::array<uint8_t, 4>& addr) {
  std::ostringstream os;
  os << static_cast<int>(addr[0]) << "." << static_cast<int>(addr[1]) << "."
     << static_cast<int>(addr[2]) << "." << static_cast<int>(addr[3]);
  return os.str();
}

std::array<uint8_t, 4> ipv4_from_string(const std::string& text) {
  std::array<uint8_t, 4> addr{};
  size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    size_t dot = (i < 3) ? text.find('.', pos) : text.size();
    if (dot == std::string::npos)
      throw std::invalid_argument("invalid ipv4 address: " + text);
    addr[static_cast<size_t>(i)] =
        static_cast<uint8_t>(parse_number(text.substr(pos, dot - pos), 255, "ipv4 octet"));
    pos = dot + 1;
  }
  return addr;
}

std::string to_string(const Endpoint& e) {
  return ipv4_to_string(e.addr) + ":" + std::to_string(e.port) +
      (e.proto == wire::kIpProtoTcp ? "/tcp" : "/udp");
}

Endpoint endpoint_from_string(const std::string& text) {
  Endpoint out;
  size_t colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("endpoint needs addr:port[/proto]: " + text);
  out.addr = ipv4_from_string(text.substr(0, colon));
  std::string rest = text.substr(colon + 1);
  size_t slash = rest.find('/');
  std::string port = slash == std::string::npos ? rest : rest.substr(0, slash);
  out.port = static_cast<uint16_t>(parse_number(port, 0xFFFF, "port"));
  if (slash != std::string::npos) {
    std::string proto = rest.substr(slash + 1);
    if (proto == "tcp")
      out.proto = wire::kIpProtoTcp;
    else if (proto == "udp")
      out.proto = wire::kIpProtoUdp;
    else
      throw std::invalid_argument("unknown protocol: " + proto);
  }
  return out;
}

std::string to_presentation(const SvcbParams& p) {
  std::ostringstream os;
  os << p.priority << " " << p.target << " ipv4hint=" << ipv4_to_string(p.ipv4hint)
     << " port=" << p.port << " instance=" << p.instance << " major=" << static_cast<int>(p.major)
     << " minor=" << p.minor << " ip_proto=" << static_cast<int>(p.ip_proto);
  return os.str();
}

SvcbParams svcb_from_presentation(const std::string& text) {
  std::istringstream is(text);
  SvcbParams p;
  std::string token;
  if (!(is >> token))
    throw std::invalid_argument("empty svcb value");
  p.priority = static_cast<uint16_t>(parse_number(token, 0xFFFF, "svcb priority"));
  if (!(is >> p.target))
    throw std::invalid_argument("svcb value missing target");
  while (is >> token) {
    size_t eq = token.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("svcb parameter without '=': " + token);
    std::string k = token.substr(0, eq), v = token.substr(eq + 1);
    if (k == "ipv4hint")
      p.ipv4hint = ipv4_from_string(v);
    else if (k == "port")
      p.port = static_cast<uint16_t>(parse_number(v, 0xFFFF, "port"));
    else if (k == "instance")
      p.instance = static_cast<uint16_t>(parse_number(v, 0xFFFF, "instance"));
    else if (k == "major")
      p.major = static_cast<uint8_t>(parse_number(v, 0xFF, "major"));
    else if (k == "minor")
      p.minor = static_cast<uint32_t>(parse_number(v, 0xFFFFFFFF, "minor"));
    else if (k == "ip_proto")
      p.ip_proto = static_cast<uint8_t>(parse_number(v, 0xFF, "ip_proto"));
    else
      throw std::invalid_argument("unknown svcb parameter: " + k);
  }
  return p;
}

std::string to_presentation(const TlsaParams& p) {
  std::ostringstream os;
  os << static_cast<int>(p.usage) << " " << static_cast<int>(p.selector) << " "
     << static_cast<int>(p.matching) << " " << to_hex(p.association_data);
  return os.str();
}

TlsaParams tlsa_from_presentation(const std::string& text) {
  std::istringstream is(text);
  std::string usage, selector, matching, data;
  if (!(is >> usage >> selector >> matching >> data))
    throw std::invalid_argument("tlsa value needs 4 fields: " + text);
  TlsaParams p;
  p.usage = static_cast<uint8_t>(parse_number(usage, 0xFF, "tlsa usage"));
  p.selector = static_cast<uint8_t>(parse_number(selector, 0xFF, "tlsa selector"));
  p.matching = static_cast<uint8_t>(parse_number(matching, 0xFF, "tlsa matching"));
  p.association_data = from_hex(data);
  return p;
}

std::optional<SvcbParams> match_offer_against_svcb(const OfferInfo& offer,
                                                   const std::vector<SvcbParams>& svcb_records) {
  for (const auto& rec : svcb_records) {
    if (rec.ipv4hint == offer.addr && rec.port == offer.port && rec.ip_proto == offer.ip_proto &&
        rec.instance == offer.instance && rec.major == offer.major && rec.minor == offer.minor)
      return rec;
  }
  return std::nullopt;
}

} // namespace danesd::records
