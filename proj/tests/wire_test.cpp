#include "doctest.h"

#include "danesd/wire.hpp"

#include <random>

using namespace danesd;
using namespace danesd::wire;

namespace {

SdMessage offer_42_message() {
  SdMessage msg;
  msg.header.client_id = 0;
  msg.header.session_id = 1;
  SdEntry entry;
  entry.type = EntryType::offer;
  entry.option_index_1 = 0;
  entry.option_count_1 = 1;
  entry.service_id = 42;
  entry.instance_id = 1;
  entry.major_version = 2;
  entry.ttl = 3;
  entry.minor_or_eventgroup = 3;
  msg.entries.push_back(entry);
  msg.options.push_back(Ipv4EndpointOption{{10, 0, 0, 2}, kIpProtoUdp, 5000});
  return msg;
}

// Byte-level oracle: field offsets hand-assembled from the standard SD
// layout (header, flags+reserved, entries array, options array).
const std::string kOffer42Hex =
    "ffff8100000000300000000101010200" // someip header, length 0x30
    "c0000000"                         // flags + reserved
    "00000010"                         // entries length: one 16-byte entry
    "01000010002a00010200000300000003" // offer 42/1 v2.3 ttl 3, option run [0,1)
    "0000000c"                         // options length
    "000904000a00000200111388";        // ipv4 endpoint 10.0.0.2 udp 5000

std::mt19937_64 rng(0xD15C0); // fixed seed, regenerate identical corpus

std::string random_token(size_t min_len, size_t max_len, bool allow_eq) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-+/.:";
  std::uniform_int_distribution<size_t> len_d(min_len, max_len);
  std::uniform_int_distribution<size_t> ch_d(0, alphabet.size() - (allow_eq ? 0 : 1) - 1);
  size_t n = len_d(rng);
  std::string out;
  for (size_t i = 0; i < n; ++i) {
    size_t ix = ch_d(rng);
    out.push_back(ix == alphabet.size() ? '=' : alphabet[ix]);
  }
  return out;
}

SdMessage random_message() {
  std::uniform_int_distribution<int> d8(0, 255);
  std::uniform_int_distribution<int> d16(0, 0xFFFF);
  std::uniform_int_distribution<int> small(0, 3);

  SdMessage msg;
  msg.header.client_id = static_cast<uint16_t>(d16(rng));
  msg.header.session_id = static_cast<uint16_t>(d16(rng));
  msg.header.message_type = static_cast<uint8_t>(d8(rng));
  msg.header.return_code = static_cast<uint8_t>(d8(rng));
  msg.flags = static_cast<uint8_t>(d8(rng));

  int n_options = small(rng);
  for (int i = 0; i < n_options; ++i) {
    switch (small(rng)) {
    case 0:
      msg.options.push_back(Ipv4EndpointOption{
          {static_cast<uint8_t>(d8(rng)), static_cast<uint8_t>(d8(rng)),
           static_cast<uint8_t>(d8(rng)), static_cast<uint8_t>(d8(rng))},
          std::uniform_int_distribution<int>(0, 1)(rng) ? kIpProtoUdp : kIpProtoTcp,
          static_cast<uint16_t>(d16(rng))});
      break;
    case 1:
      msg.options.push_back(Ipv4MulticastOption{
          {224, static_cast<uint8_t>(d8(rng)), static_cast<uint8_t>(d8(rng)),
           static_cast<uint8_t>(d8(rng))},
          kIpProtoUdp, static_cast<uint16_t>(d16(rng))});
      break;
    default: {
      ConfigurationOption cfg;
      int n_items = small(rng);
      for (int k = 0; k < n_items; ++k)
        cfg.items.push_back({random_token(1, 12, false), random_token(0, 40, true)});
      msg.options.push_back(cfg);
      break;
    }
    }
  }

  static const EntryType kTypes[] = {EntryType::find, EntryType::offer, EntryType::subscribe,
                                     EntryType::subscribe_ack};
  int n_entries = small(rng);
  for (int i = 0; i < n_entries; ++i) {
    SdEntry e;
    e.type = kTypes[std::uniform_int_distribution<int>(0, 3)(rng)];
    e.service_id = static_cast<uint16_t>(d16(rng));
    e.instance_id = static_cast<uint16_t>(d16(rng));
    e.major_version = static_cast<uint8_t>(d8(rng));
    e.ttl = std::uniform_int_distribution<uint32_t>(0, 0xFFFFFF)(rng);
    e.minor_or_eventgroup = std::uniform_int_distribution<uint32_t>(0, 0xFFFFFFFF)(rng);
    if (!msg.options.empty()) {
      std::uniform_int_distribution<size_t> idx(0, msg.options.size() - 1);
      size_t at = idx(rng);
      e.option_index_1 = static_cast<uint8_t>(at);
      e.option_count_1 = static_cast<uint8_t>(
          std::uniform_int_distribution<size_t>(0, msg.options.size() - at)(rng));
    }
    msg.entries.push_back(e);
  }
  return msg;
}

} // namespace

TEST_CASE("offer message encodes to the reference byte layout") {
  Bytes encoded = encode_message(offer_42_message());
  CHECK(to_hex(encoded) == kOffer42Hex);
}

TEST_CASE("offer message round-trips") {
  SdMessage msg = offer_42_message();
  CHECK(decode_message(encode_message(msg)) == msg);
}

TEST_CASE("empty message is header-only") {
  SdMessage msg;
  Bytes encoded = encode_message(msg);
  CHECK(encoded.size() == 16 + 4 + 4 + 4); // header, flags+reserved, two length fields
  SdMessage back = decode_message(encoded);
  CHECK(back.entries.empty());
  CHECK(back.options.empty());
}

TEST_CASE("offer with ttl zero classifies as stop") {
  SdMessage msg = offer_42_message();
  msg.entries[0].ttl = 0;
  SdMessage back = decode_message(encode_message(msg));
  CHECK(back.entries[0].is_stop());

  // Classification depends on ttl alone.
  msg.entries[0].ttl = 1;
  CHECK_FALSE(decode_message(encode_message(msg)).entries[0].is_stop());
  SdEntry subscribe;
  subscribe.type = EntryType::subscribe;
  subscribe.ttl = 0;
  CHECK(subscribe.is_stop());
  subscribe.type = EntryType::find;
  CHECK_FALSE(subscribe.is_stop());
}

TEST_CASE("decode of empty input reports truncation at offset 0") {
  try {
    decode_message({});
    FAIL("expected WireError");
  } catch (const WireError& e) {
    CHECK(e.kind == WireErrorKind::truncated);
    CHECK(e.offset == 0);
  }
}

TEST_CASE("trailing garbage byte is rejected") {
  Bytes encoded = encode_message(offer_42_message());
  encoded.push_back(0xAB);
  try {
    decode_message(encoded);
    FAIL("expected WireError");
  } catch (const WireError& e) {
    bool expected = e.kind == WireErrorKind::bad_option_length || e.kind == WireErrorKind::truncated;
    CHECK(expected);
  }
}

TEST_CASE("bad protocol version is rejected at offset 12") {
  Bytes encoded = encode_message(offer_42_message());
  encoded[12] = 0x02;
  try {
    decode_message(encoded);
    FAIL("expected WireError");
  } catch (const WireError& e) {
    CHECK(e.kind == WireErrorKind::bad_version);
    CHECK(e.offset == 12);
  }
}

TEST_CASE("entry referencing missing option is an encode error") {
  SdMessage msg = offer_42_message();
  msg.entries[0].option_count_1 = 2; // only one option present
  CHECK_THROWS_AS(encode_message(msg), WireError);
}

TEST_CASE("oversize configuration item is an encode error") {
  SdMessage msg;
  ConfigurationOption cfg;
  cfg.items.push_back({"big", std::string(300, 'x')});
  msg.options.push_back(cfg);
  try {
    encode_message(msg);
    FAIL("expected WireError");
  } catch (const WireError& e) {
    CHECK(e.kind == WireErrorKind::oversize_option);
  }
}

TEST_CASE("messages above the datagram budget are refused") {
  SdMessage msg;
  for (int i = 0; i < 8; ++i) {
    ConfigurationOption cfg;
    cfg.items.push_back({"k" + std::to_string(i), std::string(200, 'a')});
    msg.options.push_back(cfg);
  }
  try {
    encode_message(msg);
    FAIL("expected WireError");
  } catch (const WireError& e) {
    CHECK(e.kind == WireErrorKind::oversize_message);
  }
}

TEST_CASE("config items encode to the reference bytes") {
  CHECK(to_hex(encode_config_items({{"chal", "AAAAAQ=="}})) == "0d6368616c3d4141414141513d3d00");
  CHECK(to_hex(encode_config_items({})) == "00");
}

TEST_CASE("config items round-trip for random printable content") {
  for (int i = 0; i < 500; ++i) {
    std::vector<ConfigItem> items;
    int n = static_cast<int>(rng() % 5);
    for (int k = 0; k < n; ++k)
      items.push_back({random_token(1, 16, false), random_token(0, 64, true)});
    Bytes enc = encode_config_items(items);
    CHECK(decode_config_items(enc) == items);
  }
}

TEST_CASE("security options map to reserved config keys and round-trip") {
  SecurityOption chal = Challenge{1};
  ConfigItem item = to_config_item(chal);
  CHECK(item.key == "chal");
  CHECK(item.value == "AAAAAQ==");

  std::vector<SecurityOption> all = {
      Challenge{0xDEADBEEF},
      Response{Bytes{1, 2, 3, 4, 5, 6, 7, 8, 9}},
      KeyExchange{1, Bytes(32, 0x42)},
      SessionKey{Bytes(44, 0x7)},
  };
  ConfigurationOption cfg;
  for (const auto& opt : all)
    cfg.items.push_back(to_config_item(opt));
  SdMessage msg;
  msg.options.push_back(cfg);
  SdMessage back = decode_message(encode_message(msg));
  const auto& items = std::get<ConfigurationOption>(back.options[0]).items;
  REQUIRE(items.size() == all.size());
  for (size_t i = 0; i < all.size(); ++i) {
    auto sec = security_from_config_item(items[i]);
    REQUIRE(sec.has_value());
    CHECK(*sec == all[i]);
  }
}

TEST_CASE("round-trip holds for 10000 random valid messages") {
  for (int i = 0; i < 10000; ++i) {
    SdMessage msg = random_message();
    Bytes enc;
    try {
      enc = encode_message(msg);
    } catch (const WireError& e) {
      // Generator may exceed the datagram budget; anything else is a bug.
      REQUIRE(e.kind == WireErrorKind::oversize_message);
      continue;
    }
    SdMessage back = decode_message(enc);
    if (!(back == msg)) {
      CAPTURE(i);
      CHECK(back == msg);
      return;
    }
  }
  CHECK(true);
}

TEST_CASE("mutated encodings never decode silently past structural damage") {
  // Mutation fuzz: every truncation of a valid message must error, and
  // random byte flips must either error or decode to some message.
  Bytes valid = encode_message(offer_42_message());
  for (size_t cut = 0; cut < valid.size(); ++cut) {
    Bytes shorter(valid.begin(), valid.begin() + cut);
    CHECK_THROWS_AS(decode_message(shorter), WireError);
  }
  for (int i = 0; i < 2000; ++i) {
    Bytes mutated = valid;
    mutated[rng() % mutated.size()] ^= static_cast<uint8_t>(1 + rng() % 255);
    try {
      (void)decode_message(mutated);
    } catch (const WireError&) {
    }
  }
  CHECK(true);
}

TEST_CASE("decode is total over arbitrary input up to 64 KiB") {
  std::uniform_int_distribution<size_t> len_d(0, 64 * 1024);
  for (int i = 0; i < 400; ++i) {
    Bytes junk(len_d(rng));
    for (auto& b : junk)
      b = static_cast<uint8_t>(rng());
    try {
      (void)decode_message(junk);
    } catch (const WireError&) {
    }
  }
  CHECK(true);
}

TEST_CASE("dump renders entries and options") {
  std::string text = dump(offer_42_message());
  CHECK(text.find("Offer") != std::string::npos);
  CHECK(text.find("10.0.0.2:5000") != std::string::npos);
}
