// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/wire.hpp"

#include <sstream>

namespace danesd::wire {

namespace {

constexpr uint8_t kOptionConfiguration = 0x01;
constexpr uint8_t kOptionIpv4Endpoint = 0x04;
constexpr uint8_t kOptionIpv4Multicast = 0x14;

constexpr size_t kHeaderBytes = 16;
constexpr size_t kEntryBytes = 16;

bool known_entry_type(uint8_t t) {
  return t == 0x00 || t == 0x01 || t == 0x06 || t == 0x07;
}

} // namespace

std::string to_string(EntryType t) {
  switch (t) {
  case EntryType::find:
    return "Find";
  case EntryType::offer:
    return "Offer";
  case EntryType::subscribe:
    return "Subscribe";
  case EntryType::subscribe_ack:
    return "SubscribeAck";
  }
  return "Entry(" + std::to_string(static_cast<int>(t)) + ")";
}

std::string to_string(WireErrorKind k) {
  switch (k) {
  case WireErrorKind::truncated:
    return "Truncated";
  case WireErrorKind::bad_version:
    return "BadVersion";
  case WireErrorKind::bad_option_length:
    return "BadOptionLength";
  case WireErrorKind::oversize_option:
    return "OversizeOption";
  case WireErrorKind::oversize_message:
    return "OversizeMessage";
  case WireErrorKind::inconsistent_index:
    return "InconsistentIndex";
  }
  return "WireError";
}

WireError::WireError(WireErrorKind kind_, size_t offset_, const std::string& what_)
    : std::runtime_error(to_string(kind_) + " at offset " + std::to_string(offset_) + ": " + what_),
      kind(kind_),
      offset(offset_) {}

ConfigItem to_config_item(const SecurityOption& opt) {
  ConfigItem item;
  if (const auto* c = std::get_if<Challenge>(&opt)) {
    uint8_t be[4] = {static_cast<uint8_t>(c->nonce >> 24), static_cast<uint8_t>(c->nonce >> 16),
                     static_cast<uint8_t>(c->nonce >> 8), static_cast<uint8_t>(c->nonce)};
    item = {kKeyChallenge, base64_encode(be)};
  } else if (const auto* r = std::get_if<Response>(&opt)) {
    item = {kKeyResponse, base64_encode(r->signature)};
  } else if (const auto* k = std::get_if<KeyExchange>(&opt)) {
    Bytes payload;
    payload.push_back(static_cast<uint8_t>(k->group_id >> 8));
    payload.push_back(static_cast<uint8_t>(k->group_id));
    payload.insert(payload.end(), k->public_share.begin(), k->public_share.end());
    item = {kKeyKeyExchange, base64_encode(payload)};
  } else if (const auto* s = std::get_if<SessionKey>(&opt)) {
    item = {kKeySessionKey, base64_encode(s->ciphertext)};
  }
  return item;
}

std::optional<SecurityOption> security_from_config_item(const ConfigItem& item) {
  try {
    if (item.key == kKeyChallenge) {
      Bytes raw = base64_decode(item.value);
      if (raw.size() != 4)
        return std::nullopt;
      uint32_t nonce = static_cast<uint32_t>(raw[0]) << 24 | static_cast<uint32_t>(raw[1]) << 16 |
          static_cast<uint32_t>(raw[2]) << 8 | raw[3];
      return Challenge{nonce};
    }
    if (item.key == kKeyResponse)
      return Response{base64_decode(item.value)};
    if (item.key == kKeyKeyExchange) {
      Bytes raw = base64_decode(item.value);
      if (raw.size() < 2)
        return std::nullopt;
      KeyExchange kex;
      kex.group_id = static_cast<uint16_t>(raw[0] << 8 | raw[1]);
      kex.public_share.assign(raw.begin() + 2, raw.end());
      return kex;
    }
    if (item.key == kKeySessionKey)
      return SessionKey{base64_decode(item.value)};
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
  return std::nullopt;
}

Bytes encode_config_items(const std::vector<ConfigItem>& items) {
  ByteWriter w;
  for (const auto& item : items) {
    std::string text = item.key + "=" + item.value;
    if (text.size() > 255)
      throw WireError(WireErrorKind::oversize_option, w.size(),
                      "configuration item '" + item.key + "' is " + std::to_string(text.size()) + " bytes");
    if (item.key.empty() || item.key.find('=') != std::string::npos)
      throw WireError(WireErrorKind::bad_option_length, w.size(), "malformed configuration key");
    w.u8(static_cast<uint8_t>(text.size()));
    w.raw(text);
  }
  w.u8(0);
  return w.take();
}

std::vector<ConfigItem> decode_config_items(std::span<const uint8_t> bytes, size_t base_offset) {
  std::vector<ConfigItem> items;
  size_t pos = 0;
  while (true) {
    if (pos >= bytes.size())
      throw WireError(WireErrorKind::truncated, base_offset + pos, "missing configuration terminator");
    uint8_t len = bytes[pos];
    ++pos;
    if (len == 0)
      break;
    if (pos + len > bytes.size())
      throw WireError(WireErrorKind::truncated, base_offset + pos, "configuration item exceeds option");
    std::string text(reinterpret_cast<const char*>(bytes.data() + pos), len);
    size_t eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
      throw WireError(WireErrorKind::bad_option_length, base_offset + pos,
                      "configuration item without key=value form");
    items.push_back({text.substr(0, eq), text.substr(eq + 1)});
    pos += len;
  }
  if (pos != bytes.size())
    throw WireError(WireErrorKind::bad_option_length, base_offset + pos,
                    "bytes after configuration terminator");
  return items;
}

namespace {

void encode_option(ByteWriter& w, const SdOption& opt) {
  if (const auto* ep = std::get_if<Ipv4EndpointOption>(&opt)) {
    w.u16(0x0009);
    w.u8(kOptionIpv4Endpoint);
    w.u8(0x00);
    w.raw(std::span<const uint8_t>(ep->addr.data(), ep->addr.size()));
    w.u8(0x00);
    w.u8(ep->ip_proto);
    w.u16(ep->port);
  } else if (const auto* mc = std::get_if<Ipv4MulticastOption>(&opt)) {
    w.u16(0x0009);
    w.u8(kOptionIpv4Multicast);
    w.u8(0x00);
    w.raw(std::span<const uint8_t>(mc->addr.data(), mc->addr.size()));
    w.u8(0x00);
    w.u8(mc->ip_proto);
    w.u16(mc->port);
  } else if (const auto* cfg = std::get_if<ConfigurationOption>(&opt)) {
    Bytes body = encode_config_items(cfg->items);
    size_t length = 1 + body.size();
    if (length > 0xFFFF)
      throw WireError(WireErrorKind::oversize_option, w.size(), "configuration option too large");
    w.u16(static_cast<uint16_t>(length));
    w.u8(kOptionConfiguration);
    w.u8(0x00);
    w.raw(body);
  }
}

SdOption decode_option(ByteReader& r) {
  size_t start = r.offset();
  if (r.remaining() < 3)
    throw WireError(WireErrorKind::truncated, start, "option header");
  uint16_t length = r.u16();
  uint8_t type = r.u8();
  if (length < 1)
    throw WireError(WireErrorKind::bad_option_length, start, "option length below minimum");
  if (r.remaining() < length)
    throw WireError(WireErrorKind::truncated, r.offset(), "option body exceeds message");
  r.u8(); // reserved / discardable flag
  size_t body_len = length - 1;
  switch (type) {
  case kOptionIpv4Endpoint:
  case kOptionIpv4Multicast: {
    if (body_len != 8)
      throw WireError(WireErrorKind::bad_option_length, start, "ipv4 option body must be 8 bytes");
    std::array<uint8_t, 4> addr{};
    auto raw = r.raw(4);
    std::copy(raw.begin(), raw.end(), addr.begin());
    r.u8(); // reserved
    uint8_t proto = r.u8();
    uint16_t port = r.u16();
    if (type == kOptionIpv4Endpoint)
      return Ipv4EndpointOption{addr, proto, port};
    return Ipv4MulticastOption{addr, proto, port};
  }
  case kOptionConfiguration: {
    size_t body_off = r.offset();
    auto body = r.raw(body_len);
    return ConfigurationOption{decode_config_items(body, body_off)};
  }
  default:
    throw WireError(WireErrorKind::bad_option_length, start + 2,
                    "unknown option type " + std::to_string(type));
  }
}

} // namespace

Bytes encode_message(const SdMessage& msg) {
  // Validate entry/option cross references before writing anything.
  for (const auto& e : msg.entries) {
    if (e.option_count_1 > 15 || e.option_count_2 > 15)
      throw WireError(WireErrorKind::inconsistent_index, 0, "option run exceeds 4-bit count");
    size_t end1 = static_cast<size_t>(e.option_index_1) + e.option_count_1;
    size_t end2 = static_cast<size_t>(e.option_index_2) + e.option_count_2;
    if (end1 > msg.options.size() || end2 > msg.options.size())
      throw WireError(WireErrorKind::inconsistent_index, 0,
                      "entry references option beyond option array");
    if (e.ttl > 0xFFFFFF)
      throw WireError(WireErrorKind::inconsistent_index, 0, "ttl exceeds 24 bits");
  }

  ByteWriter w;
  w.u16(msg.header.service_id);
  w.u16(msg.header.method_id);
  size_t length_at = w.size();
  w.u32(0); // patched below
  w.u16(msg.header.client_id);
  w.u16(msg.header.session_id);
  w.u8(msg.header.protocol_version);
  w.u8(msg.header.interface_version);
  w.u8(msg.header.message_type);
  w.u8(msg.header.return_code);

  w.u8(msg.flags);
  w.u24(0);

  w.u32(static_cast<uint32_t>(msg.entries.size() * kEntryBytes));
  for (const auto& e : msg.entries) {
    w.u8(static_cast<uint8_t>(e.type));
    w.u8(e.option_index_1);
    w.u8(e.option_index_2);
    w.u8(static_cast<uint8_t>(e.option_count_1 << 4 | (e.option_count_2 & 0x0F)));
    w.u16(e.service_id);
    w.u16(e.instance_id);
    w.u8(e.major_version);
    w.u24(e.ttl);
    w.u32(e.minor_or_eventgroup);
  }

  size_t options_len_at = w.size();
  w.u32(0);
  for (const auto& opt : msg.options)
    encode_option(w, opt);
  w.patch_u32(options_len_at, static_cast<uint32_t>(w.size() - options_len_at - 4));

  size_t payload = w.size() - kHeaderBytes;
  if (payload > kMaxPayloadBytes)
    throw WireError(WireErrorKind::oversize_message, w.size(),
                    "payload " + std::to_string(payload) + " exceeds " + std::to_string(kMaxPayloadBytes));
  w.patch_u32(length_at, static_cast<uint32_t>(w.size() - 8));
  return w.take();
}

SdMessage decode_message(std::span<const uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes)
    throw WireError(WireErrorKind::truncated, bytes.size(), "message shorter than header");

  ByteReader r(bytes);
  SdMessage msg;
  msg.header.service_id = r.u16();
  msg.header.method_id = r.u16();
  uint32_t length = r.u32();
  msg.header.client_id = r.u16();
  msg.header.session_id = r.u16();
  msg.header.protocol_version = r.u8();
  msg.header.interface_version = r.u8();
  msg.header.message_type = r.u8();
  msg.header.return_code = r.u8();

  if (msg.header.protocol_version != kProtocolVersion)
    throw WireError(WireErrorKind::bad_version, 12,
                    "protocol version " + std::to_string(msg.header.protocol_version));
  if (static_cast<size_t>(length) + 8 > bytes.size())
    throw WireError(WireErrorKind::truncated, bytes.size(), "declared length exceeds buffer");
  if (static_cast<size_t>(length) + 8 < bytes.size())
    throw WireError(WireErrorKind::bad_option_length, 8 + length, "bytes after declared length");

  msg.flags = r.u8();
  r.u24(); // reserved

  if (r.remaining() < 4)
    throw WireError(WireErrorKind::truncated, r.offset(), "entries length");
  uint32_t entries_len = r.u32();
  if (entries_len % kEntryBytes != 0)
    throw WireError(WireErrorKind::bad_option_length, r.offset() - 4,
                    "entries length not a multiple of 16");
  if (r.remaining() < entries_len)
    throw WireError(WireErrorKind::truncated, r.offset(), "entries array exceeds message");
  size_t n_entries = entries_len / kEntryBytes;
  for (size_t i = 0; i < n_entries; ++i) {
    size_t at = r.offset();
    SdEntry e;
    uint8_t type = r.u8();
    if (!known_entry_type(type))
      throw WireError(WireErrorKind::bad_option_length, at, "unknown entry type " + std::to_string(type));
    e.type = static_cast<EntryType>(type);
    e.option_index_1 = r.u8();
    e.option_index_2 = r.u8();
    uint8_t counts = r.u8();
    e.option_count_1 = counts >> 4;
    e.option_count_2 = counts & 0x0F;
    e.service_id = r.u16();
    e.instance_id = r.u16();
    e.major_version = r.u8();
    e.ttl = r.u24();
    e.minor_or_eventgroup = r.u32();
    msg.entries.push_back(e);
  }

  if (r.remaining() < 4)
    throw WireError(WireErrorKind::truncated, r.offset(), "options length");
  uint32_t options_len = r.u32();
  if (r.remaining() < options_len)
    throw WireError(WireErrorKind::truncated, r.offset(), "options array exceeds message");
  if (r.remaining() > options_len)
    throw WireError(WireErrorKind::bad_option_length, r.offset() + options_len,
                    "bytes after options array");
  while (!r.done())
    msg.options.push_back(decode_option(r));
  return msg;
}

std::string dump(const SdMessage& msg) {
  std::ostringstream os;
  os << "someip-sd message\n";
  os << "  service=0x" << std::hex << msg.header.service_id << " method=0x" << msg.header.method_id
     << std::dec << " client=" << msg.header.client_id << " session=" << msg.header.session_id
     << " type=0x" << std::hex << static_cast<int>(msg.header.message_type) << std::dec << "\n";
  os << "  flags=0x" << std::hex << static_cast<int>(msg.flags) << std::dec << "\n";
  for (const auto& e : msg.entries) {
    os << "  entry " << to_string(e.type) << (e.is_stop() ? " (stop)" : "") << " service=" << e.service_id
       << " instance=" << e.instance_id << " major=" << static_cast<int>(e.major_version)
       << " ttl=" << e.ttl << " minor/eventgroup=" << e.minor_or_eventgroup << " opts=["
       << static_cast<int>(e.option_index_1) << "+" << static_cast<int>(e.option_count_1) << ","
       << static_cast<int>(e.option_index_2) << "+" << static_cast<int>(e.option_count_2) << "]\n";
  }
  size_t idx = 0;
  for (const auto& opt : msg.options) {
    os << "  option[" << idx++ << "] ";
    if (const auto* ep = std::get_if<Ipv4EndpointOption>(&opt)) {
      os << "ipv4-endpoint " << static_cast<int>(ep->addr[0]) << "." << static_cast<int>(ep->addr[1])
         << "." << static_cast<int>(ep->addr[2]) << "." << static_cast<int>(ep->addr[3]) << ":"
         << ep->port << "/" << (ep->ip_proto == kIpProtoTcp ? "tcp" : "udp") << "\n";
    } else if (const auto* mc = std::get_if<Ipv4MulticastOption>(&opt)) {
      os << "ipv4-multicast " << static_cast<int>(mc->addr[0]) << "." << static_cast<int>(mc->addr[1])
         << "." << static_cast<int>(mc->addr[2]) << "." << static_cast<int>(mc->addr[3]) << ":"
         << mc->port << "/" << (mc->ip_proto == kIpProtoTcp ? "tcp" : "udp") << "\n";
    } else if (const auto* cfg = std::get_if<ConfigurationOption>(&opt)) {
      os << "configuration\n";
      for (const auto& item : cfg->items)
        os << "    " << item.key << "=" << item.value << "\n";
    }
  }
  return os.str();
}

} // namespace danesd::wire
