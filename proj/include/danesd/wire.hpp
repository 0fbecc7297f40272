// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/bytes.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace danesd::wire {

// Service discovery runs as a dedicated service with fixed identifiers.
constexpr uint16_t kSdServiceId = 0xFFFF;
constexpr uint16_t kSdMethodId = 0x8100;
constexpr uint8_t kProtocolVersion = 0x01;
constexpr uint8_t kInterfaceVersion = 0x01;
constexpr uint8_t kMessageTypeNotification = 0x02;

// One UDP datagram per message; larger encodes are refused.
constexpr size_t kMaxPayloadBytes = 1400;

constexpr uint8_t kIpProtoTcp = 6;
constexpr uint8_t kIpProtoUdp = 17;

enum class EntryType : uint8_t {
  find = 0x00,
  offer = 0x01,
  subscribe = 0x06,
  subscribe_ack = 0x07,
};

std::string to_string(EntryType t);

struct SdHeader {
  uint16_t service_id = kSdServiceId;
  uint16_t method_id = kSdMethodId;
  uint16_t client_id = 0;
  uint16_t session_id = 0;
  uint8_t protocol_version = kProtocolVersion;
  uint8_t interface_version = kInterfaceVersion;
  uint8_t message_type = kMessageTypeNotification;
  uint8_t return_code = 0;

  bool operator==(const SdHeader&) const = default;
};

// 16-byte discovery entry. A ttl of zero turns Offer into StopOffer and
// Subscribe into StopSubscribe; nothing else factors into that
// classification.
struct SdEntry {
  EntryType type = EntryType::find;
  uint8_t option_index_1 = 0;
  uint8_t option_index_2 = 0;
  uint8_t option_count_1 = 0; // 4 bits on the wire
  uint8_t option_count_2 = 0; // 4 bits on the wire
  uint16_t service_id = 0;
  uint16_t instance_id = 0;
  uint8_t major_version = 0;
  uint32_t ttl = 0; // 24 bits on the wire, seconds
  uint32_t minor_or_eventgroup = 0;

  bool is_stop() const {
    return ttl == 0 && (type == EntryType::offer || type == EntryType::subscribe);
  }
  bool operator==(const SdEntry&) const = default;
};

struct Ipv4EndpointOption {
  std::array<uint8_t, 4> addr{};
  uint8_t ip_proto = kIpProtoUdp;
  uint16_t port = 0;

  bool operator==(const Ipv4EndpointOption&) const = default;
};

struct Ipv4MulticastOption {
  std::array<uint8_t, 4> addr{};
  uint8_t ip_proto = kIpProtoUdp;
  uint16_t port = 0;

  bool operator==(const Ipv4MulticastOption&) const = default;
};

struct ConfigItem {
  std::string key;
  std::string value;

  bool operator==(const ConfigItem&) const = default;
};

struct ConfigurationOption {
  std::vector<ConfigItem> items;

  bool operator==(const ConfigurationOption&) const = default;
};

using SdOption = std::variant<Ipv4EndpointOption, Ipv4MulticastOption, ConfigurationOption>;

struct SdMessage {
  SdHeader header;
  uint8_t flags = 0xC0; // reboot + unicast supported
  std::vector<SdEntry> entries;
  std::vector<SdOption> options;

  bool operator==(const SdMessage&) const = default;
};

// Reserved configuration keys carrying the security handshake. Values are
// base64 payloads; legacy parsers skip unknown keys.
constexpr const char* kKeyChallenge = "chal";
constexpr const char* kKeyResponse = "resp";
constexpr const char* kKeyKeyExchange = "kex";
constexpr const char* kKeySessionKey = "skey";
constexpr const char* kKeyClientName = "cname";

struct Challenge {
  uint32_t nonce = 0;
  bool operator==(const Challenge&) const = default;
};
struct Response {
  Bytes signature;
  bool operator==(const Response&) const = default;
};
struct KeyExchange {
  uint16_t group_id = 0;
  Bytes public_share;
  bool operator==(const KeyExchange&) const = default;
};
struct SessionKey {
  Bytes ciphertext;
  bool operator==(const SessionKey&) const = default;
};

using SecurityOption = std::variant<Challenge, Response, KeyExchange, SessionKey>;

ConfigItem to_config_item(const SecurityOption& opt);
// Returns nullopt for items that do not carry one of the reserved keys.
std::optional<SecurityOption> security_from_config_item(const ConfigItem& item);

enum class WireErrorKind {
  truncated,
  bad_version,
  bad_option_length,
  oversize_option,
  oversize_message,
  inconsistent_index,
};

std::string to_string(WireErrorKind k);

class WireError : public std::runtime_error {
public:
  WireError(WireErrorKind kind, size_t offset, const std::string& what);
  WireErrorKind kind;
  size_t offset;
};

Bytes encode_message(const SdMessage& msg);
SdMessage decode_message(std::span<const uint8_t> bytes);

Bytes encode_config_items(const std::vector<ConfigItem>& items);
std::vector<ConfigItem> decode_config_items(std::span<const uint8_t> bytes, size_t base_offset = 0);

std::string dump(const SdMessage& msg);

} // namespace danesd::wire
