// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/bytes.hpp"
#include "danesd/records.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

typedef struct evp_pkey_st EVP_PKEY;

namespace danesd::crypto {

enum class CryptoErrorKind {
  missing_key,
  malformed_certificate,
  unsupported_tlsa_mode,
  group_mismatch,
  auth_failure,
  key_usage_violation,
  internal,
};

std::string to_string(CryptoErrorKind k);

class CryptoError : public std::runtime_error {
public:
  CryptoError(CryptoErrorKind kind, const std::string& what);
  CryptoErrorKind kind;
};

enum class SignatureScheme {
  rsa2048_sha256,
  ecdsa_p256_sha256,
};

std::string to_string(SignatureScheme s);
SignatureScheme scheme_from_string(const std::string& s);

// Every key carries the role it was created for; signing paths refuse keys
// outside their role so zone keys can never certify software and supplier
// keys can never sign zone data.
enum class KeyUsage {
  identity,     // service/client endpoint keys
  supplier,     // update-supplier bundle signing
  zone_signing, // vehicle ZSK
  key_signing,  // OEM KSK
};

std::string to_string(KeyUsage u);

class KeyPair {
public:
  KeyPair() = default;

  static KeyPair generate(SignatureScheme scheme, KeyUsage usage);

  bool valid() const { return pkey_ != nullptr; }
  SignatureScheme scheme() const { return scheme_; }
  KeyUsage usage() const { return usage_; }

  Bytes sign(std::span<const uint8_t> data) const;
  bool verify(std::span<const uint8_t> data, std::span<const uint8_t> signature) const;

  Bytes public_key_der() const;
  // 16-bit identifier derived from the public key, used in signature records.
  uint16_t key_tag() const;

  static KeyPair from_public_key_der(std::span<const uint8_t> der, SignatureScheme scheme,
                                     KeyUsage usage);

  std::string private_key_pem() const;
  std::string public_key_pem() const;
  // Scheme is recovered from the key type.
  static KeyPair from_private_pem(const std::string& pem, KeyUsage usage);
  static KeyPair from_public_pem(const std::string& pem, KeyUsage usage);

  EVP_PKEY* raw() const { return pkey_.get(); }

private:
  std::shared_ptr<EVP_PKEY> pkey_;
  SignatureScheme scheme_ = SignatureScheme::rsa2048_sha256;
  KeyUsage usage_ = KeyUsage::identity;
};

// X.509 end-entity certificate. Trust derives from the TLSA binding, not
// from a CA chain, so these are self-signed.
struct Certificate {
  Bytes der;
  std::string subject; // the DNS name the certificate is published under
  int64_t not_before = 0;
  int64_t not_after = 0;

  bool operator==(const Certificate& other) const { return der == other.der; }
};

Certificate make_certificate(const KeyPair& key, const std::string& subject_dns_name,
                             int64_t not_before, int64_t not_after);
Certificate certificate_from_der(std::span<const uint8_t> der);
// Signature check under the certificate's public key.
bool certificate_verify(const Certificate& cert, std::span<const uint8_t> data,
                        std::span<const uint8_t> signature);

Bytes sha256(std::span<const uint8_t> data);

// Context binds a nonce signature to the sending identity and the carrying
// entry so a response cannot be transplanted onto another message.
Bytes nonce_context(const std::string& sender_name, std::span<const uint8_t> entry_digest);
Bytes sign_nonce(const KeyPair& key, uint32_t nonce, std::span<const uint8_t> context);
bool verify_nonce(const Certificate& cert, uint32_t nonce, std::span<const uint8_t> context,
                  std::span<const uint8_t> signature);

// Supported association modes: 3 0 0 (exact certificate) and 3 0 1
// (SHA-256 of the certificate). Anything else raises unsupported_tlsa_mode.
bool match_tlsa(const Certificate& cert, const records::TlsaParams& tlsa);
records::TlsaParams build_tlsa(const Certificate& cert, uint8_t matching = 0);

enum class KaGroup : uint16_t {
  x25519 = 1,
  p256 = 2,
};

struct KaKeys {
  KaGroup group = KaGroup::x25519;
  Bytes public_share;
  std::shared_ptr<EVP_PKEY> private_key;
};

KaKeys ka_generate(KaGroup group);
Bytes ka_shared(const KaKeys& mine, KaGroup peer_group, std::span<const uint8_t> peer_share);

struct Transcript {
  std::string subscriber_name;
  std::string publisher_name;
  uint32_t subscriber_nonce = 0;
  uint32_t publisher_nonce = 0;
};

constexpr size_t kSessionKeyBytes = 16; // AES-128

struct SessionKeyMaterial {
  Bytes key;
  bool operator==(const SessionKeyMaterial&) const = default;
};

SessionKeyMaterial derive_session_key(std::span<const uint8_t> shared_secret,
                                      const Transcript& transcript);

struct GroupKey {
  Bytes key;
  uint32_t key_id = 0;
  uint32_t epoch = 0;
  bool operator==(const GroupKey&) const = default;
};

GroupKey make_group_key(uint32_t key_id, uint32_t epoch);
Bytes wrap_group_key(const SessionKeyMaterial& session, const GroupKey& group);
GroupKey unwrap_group_key(const SessionKeyMaterial& session, std::span<const uint8_t> ciphertext);

// Wall-clock instrumentation hook. The simulator installs a meter to build
// the sign/verify/resolve distributions; library paths record through it
// when present.
class CryptoMeter {
public:
  virtual ~CryptoMeter() = default;
  virtual void record(const std::string& op, double millis) = 0;
};

void set_meter(CryptoMeter* meter);
CryptoMeter* meter();

} // namespace danesd::crypto
