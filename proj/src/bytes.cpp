// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/bytes.hpp"

#include <openssl/evp.h>

namespace danesd {

static const char* kHexDigits = "0123456789abcdef";

std::string to_hex(std::span<const uint8_t> data) {
  std::string out;
  out.reserve(data.size() * 2);
  for (uint8_t b : data) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0F]);
  }
  return out;
}

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9')
    return c - '0';
  if (c >= 'a' && c <= 'f')
    return c - 'a' + 10;
  if (c >= 'A' && c <= 'F')
    return c - 'A' + 10;
  return -1;
}

Bytes from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0)
    throw std::invalid_argument("hex string with odd length");
  Bytes out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0)
      throw std::invalid_argument("invalid hex digit at position " + std::to_string(i));
    out.push_back(static_cast<uint8_t>(hi << 4 | lo));
  }
  return out;
}

std::string base64_encode(std::span<const uint8_t> data) {
  std::string out;
  out.resize(4 * ((data.size() + 2) / 3) + 1);
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                          static_cast<int>(data.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

Bytes base64_decode(const std::string& text) {
  if (text.empty())
    return {};
  if (text.size() % 4 != 0)
    throw std::invalid_argument("base64 length not a multiple of 4");
  Bytes out(3 * text.size() / 4);
  int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                          static_cast<int>(text.size()));
  if (n < 0)
    throw std::invalid_argument("invalid base64 input");
  // EVP_DecodeBlock does not account for '=' padding.
  size_t pad = 0;
  if (text.size() >= 2) {
    if (text[text.size() - 1] == '=')
      ++pad;
    if (text[text.size() - 2] == '=')
      ++pad;
  }
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

} // namespace danesd
