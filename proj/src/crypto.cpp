// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/crypto.hpp"

#include <openssl/asn1.h>
#include <openssl/ec.h>
#include <openssl/err.h>
#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/pem.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include <chrono>
#include <cstring>
#include <ctime>

namespace danesd::crypto {

namespace {

CryptoMeter* g_meter = nullptr;

class MeterScope {
public:
  explicit MeterScope(const char* op) : op_(op) {
    if (g_meter)
      start_ = std::chrono::steady_clock::now();
  }
  ~MeterScope() {
    if (g_meter) {
      auto end = std::chrono::steady_clock::now();
      double ms = std::chrono::duration<double, std::milli>(end - start_).count();
      g_meter->record(op_, ms);
    }
  }

private:
  const char* op_;
  std::chrono::steady_clock::time_point start_;
};

[[noreturn]] void throw_openssl(CryptoErrorKind kind, const std::string& what) {
  unsigned long err = ERR_get_error();
  char buf[256] = {0};
  if (err)
    ERR_error_string_n(err, buf, sizeof(buf));
  ERR_clear_error();
  throw CryptoError(kind, what + (err ? std::string(": ") + buf : std::string()));
}

struct EvpPkeyCtxFree {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct EvpMdCtxFree {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
struct X509Free {
  void operator()(X509* p) const { X509_free(p); }
};
struct EvpCipherCtxFree {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};

using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, EvpPkeyCtxFree>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, EvpMdCtxFree>;
using X509Ptr = std::unique_ptr<X509, X509Free>;

std::shared_ptr<EVP_PKEY> wrap_pkey(EVP_PKEY* p) {
  return std::shared_ptr<EVP_PKEY>(p, EVP_PKEY_free);
}

int64_t asn1_time_to_unix(const ASN1_TIME* t) {
  tm parsed{};
  if (ASN1_TIME_to_tm(t, &parsed) != 1)
    throw CryptoError(CryptoErrorKind::malformed_certificate, "unparseable validity time");
  return static_cast<int64_t>(timegm(&parsed));
}

} // namespace

std::string to_string(CryptoErrorKind k) {
  switch (k) {
  case CryptoErrorKind::missing_key:
    return "MissingKey";
  case CryptoErrorKind::malformed_certificate:
    return "MalformedCertificate";
  case CryptoErrorKind::unsupported_tlsa_mode:
    return "UnsupportedTlsaMode";
  case CryptoErrorKind::group_mismatch:
    return "GroupMismatch";
  case CryptoErrorKind::auth_failure:
    return "AuthFailure";
  case CryptoErrorKind::key_usage_violation:
    return "KeyUsageViolation";
  case CryptoErrorKind::internal:
    return "CryptoInternal";
  }
  return "CryptoError";
}

CryptoError::CryptoError(CryptoErrorKind kind_, const std::string& what_)
    : std::runtime_error(to_string(kind_) + ": " + what_), kind(kind_) {}

std::string to_string(SignatureScheme s) {
  switch (s) {
  case SignatureScheme::rsa2048_sha256:
    return "rsa2048-sha256";
  case SignatureScheme::ecdsa_p256_sha256:
    return "ecdsa-p256-sha256";
  }
  return "?";
}

SignatureScheme scheme_from_string(const std::string& s) {
  if (s == "rsa2048-sha256" || s == "rsa")
    return SignatureScheme::rsa2048_sha256;
  if (s == "ecdsa-p256-sha256" || s == "ecdsa" || s == "p256")
    return SignatureScheme::ecdsa_p256_sha256;
  throw std::invalid_argument("unknown signature scheme: " + s);
}

std::string to_string(KeyUsage u) {
  switch (u) {
  case KeyUsage::identity:
    return "identity";
  case KeyUsage::supplier:
    return "supplier";
  case KeyUsage::zone_signing:
    return "zone-signing";
  case KeyUsage::key_signing:
    return "key-signing";
  }
  return "?";
}

KeyPair KeyPair::generate(SignatureScheme scheme, KeyUsage usage) {
  PkeyCtxPtr ctx;
  if (scheme == SignatureScheme::rsa2048_sha256) {
    ctx.reset(EVP_PKEY_CTX_new_id(EVP_PKEY_RSA, nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 ||
        EVP_PKEY_CTX_set_rsa_keygen_bits(ctx.get(), 2048) <= 0)
      throw_openssl(CryptoErrorKind::internal, "rsa keygen init");
  } else {
    ctx.reset(EVP_PKEY_CTX_new_id(EVP_PKEY_EC, nullptr));
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 ||
        EVP_PKEY_CTX_set_ec_paramgen_curve_nid(ctx.get(), NID_X9_62_prime256v1) <= 0)
      throw_openssl(CryptoErrorKind::internal, "ec keygen init");
  }
  EVP_PKEY* raw = nullptr;
  if (EVP_PKEY_keygen(ctx.get(), &raw) <= 0)
    throw_openssl(CryptoErrorKind::internal, "keygen");
  KeyPair kp;
  kp.pkey_ = wrap_pkey(raw);
  kp.scheme_ = scheme;
  kp.usage_ = usage;
  return kp;
}

Bytes KeyPair::sign(std::span<const uint8_t> data) const {
  if (!pkey_)
    throw CryptoError(CryptoErrorKind::missing_key, "sign without private key");
  MeterScope timer("create_signature");
  MdCtxPtr md(EVP_MD_CTX_new());
  if (!md || EVP_DigestSignInit(md.get(), nullptr, EVP_sha256(), nullptr, pkey_.get()) <= 0)
    throw_openssl(CryptoErrorKind::internal, "sign init");
  size_t len = 0;
  if (EVP_DigestSign(md.get(), nullptr, &len, data.data(), data.size()) <= 0)
    throw_openssl(CryptoErrorKind::internal, "sign size");
  Bytes sig(len);
  if (EVP_DigestSign(md.get(), sig.data(), &len, data.data(), data.size()) <= 0)
    throw_openssl(CryptoErrorKind::internal, "sign");
  sig.resize(len);
  return sig;
}

bool KeyPair::verify(std::span<const uint8_t> data, std::span<const uint8_t> signature) const {
  if (!pkey_)
    throw CryptoError(CryptoErrorKind::missing_key, "verify without key");
  MeterScope timer("verify_signature");
  MdCtxPtr md(EVP_MD_CTX_new());
  if (!md || EVP_DigestVerifyInit(md.get(), nullptr, EVP_sha256(), nullptr, pkey_.get()) <= 0)
    throw_openssl(CryptoErrorKind::internal, "verify init");
  int rc = EVP_DigestVerify(md.get(), signature.data(), signature.size(), data.data(), data.size());
  ERR_clear_error();
  return rc == 1;
}

Bytes KeyPair::public_key_der() const {
  if (!pkey_)
    throw CryptoError(CryptoErrorKind::missing_key, "no key material");
  int len = i2d_PUBKEY(pkey_.get(), nullptr);
  if (len <= 0)
    throw_openssl(CryptoErrorKind::internal, "pubkey der size");
  Bytes der(static_cast<size_t>(len));
  uint8_t* p = der.data();
  if (i2d_PUBKEY(pkey_.get(), &p) != len)
    throw_openssl(CryptoErrorKind::internal, "pubkey der");
  return der;
}

uint16_t KeyPair::key_tag() const {
  Bytes digest = sha256(public_key_der());
  return static_cast<uint16_t>(digest[0] << 8 | digest[1]);
}

KeyPair KeyPair::from_public_key_der(std::span<const uint8_t> der, SignatureScheme scheme,
                                     KeyUsage usage) {
  const uint8_t* p = der.data();
  EVP_PKEY* raw = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
  if (!raw)
    throw_openssl(CryptoErrorKind::malformed_certificate, "public key der");
  KeyPair kp;
  kp.pkey_ = wrap_pkey(raw);
  kp.scheme_ = scheme;
  kp.usage_ = usage;
  return kp;
}

static SignatureScheme scheme_of(EVP_PKEY* key) {
  return EVP_PKEY_base_id(key) == EVP_PKEY_RSA ? SignatureScheme::rsa2048_sha256
                                               : SignatureScheme::ecdsa_p256_sha256;
}

std::string KeyPair::private_key_pem() const {
  if (!pkey_)
    throw CryptoError(CryptoErrorKind::missing_key, "no key material");
  BIO* bio = BIO_new(BIO_s_mem());
  if (!bio || PEM_write_bio_PrivateKey(bio, pkey_.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1) {
    BIO_free(bio);
    throw_openssl(CryptoErrorKind::internal, "private key pem");
  }
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  std::string out(data, static_cast<size_t>(len));
  BIO_free(bio);
  return out;
}

std::string KeyPair::public_key_pem() const {
  if (!pkey_)
    throw CryptoError(CryptoErrorKind::missing_key, "no key material");
  BIO* bio = BIO_new(BIO_s_mem());
  if (!bio || PEM_write_bio_PUBKEY(bio, pkey_.get()) != 1) {
    BIO_free(bio);
    throw_openssl(CryptoErrorKind::internal, "public key pem");
  }
  char* data = nullptr;
  long len = BIO_get_mem_data(bio, &data);
  std::string out(data, static_cast<size_t>(len));
  BIO_free(bio);
  return out;
}

KeyPair KeyPair::from_private_pem(const std::string& pem, KeyUsage usage) {
  BIO* bio = BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()));
  EVP_PKEY* raw = bio ? PEM_read_bio_PrivateKey(bio, nullptr, nullptr, nullptr) : nullptr;
  BIO_free(bio);
  if (!raw)
    throw_openssl(CryptoErrorKind::malformed_certificate, "private key pem parse");
  KeyPair kp;
  kp.pkey_ = wrap_pkey(raw);
  kp.scheme_ = scheme_of(raw);
  kp.usage_ = usage;
  return kp;
}

KeyPair KeyPair::from_public_pem(const std::string& pem, KeyUsage usage) {
  BIO* bio = BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size()));
  EVP_PKEY* raw = bio ? PEM_read_bio_PUBKEY(bio, nullptr, nullptr, nullptr) : nullptr;
  BIO_free(bio);
  if (!raw)
    throw_openssl(CryptoErrorKind::malformed_certificate, "public key pem parse");
  KeyPair kp;
  kp.pkey_ = wrap_pkey(raw);
  kp.scheme_ = scheme_of(raw);
  kp.usage_ = usage;
  return kp;
}

Certificate make_certificate(const KeyPair& key, const std::string& subject_dns_name,
                             int64_t not_before, int64_t not_after) {
  if (!key.valid())
    throw CryptoError(CryptoErrorKind::missing_key, "certificate without key");
  if (key.usage() == KeyUsage::zone_signing || key.usage() == KeyUsage::key_signing)
    throw CryptoError(CryptoErrorKind::key_usage_violation,
                      "zone keys never sign certificates (" + to_string(key.usage()) + ")");
  if (not_after <= not_before)
    throw CryptoError(CryptoErrorKind::malformed_certificate, "empty validity window");

  X509Ptr cert(X509_new());
  if (!cert)
    throw_openssl(CryptoErrorKind::internal, "x509 alloc");
  X509_set_version(cert.get(), 2);
  ASN1_INTEGER_set(X509_get_serialNumber(cert.get()), 1);

  X509_NAME* name = X509_get_subject_name(cert.get());
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC,
                             reinterpret_cast<const unsigned char*>(subject_dns_name.c_str()), -1,
                             -1, 0);
  X509_set_issuer_name(cert.get(), name);

  ASN1_TIME_set(X509_getm_notBefore(cert.get()), static_cast<time_t>(not_before));
  ASN1_TIME_set(X509_getm_notAfter(cert.get()), static_cast<time_t>(not_after));
  X509_set_pubkey(cert.get(), key.raw());

  if (X509_sign(cert.get(), key.raw(), EVP_sha256()) == 0)
    throw_openssl(CryptoErrorKind::internal, "x509 sign");

  int len = i2d_X509(cert.get(), nullptr);
  if (len <= 0)
    throw_openssl(CryptoErrorKind::internal, "x509 der size");
  Bytes der(static_cast<size_t>(len));
  uint8_t* p = der.data();
  i2d_X509(cert.get(), &p);

  Certificate out;
  out.der = std::move(der);
  out.subject = subject_dns_name;
  out.not_before = not_before;
  out.not_after = not_after;
  return out;
}

Certificate certificate_from_der(std::span<const uint8_t> der) {
  const uint8_t* p = der.data();
  X509Ptr cert(d2i_X509(nullptr, &p, static_cast<long>(der.size())));
  if (!cert)
    throw_openssl(CryptoErrorKind::malformed_certificate, "x509 der parse");

  Certificate out;
  out.der.assign(der.begin(), der.end());

  char cn[256] = {0};
  if (X509_NAME_get_text_by_NID(X509_get_subject_name(cert.get()), NID_commonName, cn,
                                sizeof(cn)) <= 0)
    throw CryptoError(CryptoErrorKind::malformed_certificate, "certificate has no CN");
  out.subject = cn;
  out.not_before = asn1_time_to_unix(X509_get0_notBefore(cert.get()));
  out.not_after = asn1_time_to_unix(X509_get0_notAfter(cert.get()));
  return out;
}

bool certificate_verify(const Certificate& cert, std::span<const uint8_t> data,
                        std::span<const uint8_t> signature) {
  const uint8_t* p = cert.der.data();
  X509Ptr x(d2i_X509(nullptr, &p, static_cast<long>(cert.der.size())));
  if (!x)
    throw CryptoError(CryptoErrorKind::malformed_certificate, "x509 der parse");
  EVP_PKEY* pub = X509_get0_pubkey(x.get());
  if (!pub)
    throw CryptoError(CryptoErrorKind::malformed_certificate, "certificate without key");

  MeterScope timer("verify_signature");
  MdCtxPtr md(EVP_MD_CTX_new());
  if (!md || EVP_DigestVerifyInit(md.get(), nullptr, EVP_sha256(), nullptr, pub) <= 0)
    throw_openssl(CryptoErrorKind::internal, "verify init");
  int rc = EVP_DigestVerify(md.get(), signature.data(), signature.size(), data.data(), data.size());
  ERR_clear_error();
  return rc == 1;
}

Bytes sha256(std::span<const uint8_t> data) {
  Bytes digest(32);
  unsigned int len = 32;
  MdCtxPtr md(EVP_MD_CTX_new());
  if (!md || EVP_DigestInit_ex(md.get(), EVP_sha256(), nullptr) <= 0 ||
      EVP_DigestUpdate(md.get(), data.data(), data.size()) <= 0 ||
      EVP_DigestFinal_ex(md.get(), digest.data(), &len) <= 0)
    throw_openssl(CryptoErrorKind::internal, "sha256");
  return digest;
}

Bytes nonce_context(const std::string& sender_name, std::span<const uint8_t> entry_digest) {
  Bytes ctx;
  ctx.insert(ctx.end(), sender_name.begin(), sender_name.end());
  ctx.push_back(0x00);
  ctx.insert(ctx.end(), entry_digest.begin(), entry_digest.end());
  return ctx;
}

static Bytes nonce_message(uint32_t nonce, std::span<const uint8_t> context) {
  Bytes msg;
  msg.push_back(static_cast<uint8_t>(nonce >> 24));
  msg.push_back(static_cast<uint8_t>(nonce >> 16));
  msg.push_back(static_cast<uint8_t>(nonce >> 8));
  msg.push_back(static_cast<uint8_t>(nonce));
  msg.insert(msg.end(), context.begin(), context.end());
  return msg;
}

Bytes sign_nonce(const KeyPair& key, uint32_t nonce, std::span<const uint8_t> context) {
  return key.sign(nonce_message(nonce, context));
}

bool verify_nonce(const Certificate& cert, uint32_t nonce, std::span<const uint8_t> context,
                  std::span<const uint8_t> signature) {
  return certificate_verify(cert, nonce_message(nonce, context), signature);
}

bool match_tlsa(const Certificate& cert, const records::TlsaParams& tlsa) {
  if (tlsa.usage != 3 || tlsa.selector != 0 || tlsa.matching > 1)
    throw CryptoError(CryptoErrorKind::unsupported_tlsa_mode,
                      std::to_string(tlsa.usage) + " " + std::to_string(tlsa.selector) + " " +
                          std::to_string(tlsa.matching));
  if (tlsa.matching == 0)
    return cert.der == tlsa.association_data;
  return sha256(cert.der) == tlsa.association_data;
}

records::TlsaParams build_tlsa(const Certificate& cert, uint8_t matching) {
  if (matching > 1)
    throw CryptoError(CryptoErrorKind::unsupported_tlsa_mode, "matching " + std::to_string(matching));
  records::TlsaParams p;
  p.usage = 3;
  p.selector = 0;
  p.matching = matching;
  p.association_data = (matching == 0) ? cert.der : sha256(cert.der);
  return p;
}

KaKeys ka_generate(KaGroup group) {
  KaKeys out;
  out.group = group;
  if (group == KaGroup::x25519) {
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_X25519, nullptr));
    EVP_PKEY* raw = nullptr;
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 || EVP_PKEY_keygen(ctx.get(), &raw) <= 0)
      throw_openssl(CryptoErrorKind::internal, "x25519 keygen");
    out.private_key = wrap_pkey(raw);
    size_t len = 32;
    out.public_share.resize(len);
    if (EVP_PKEY_get_raw_public_key(raw, out.public_share.data(), &len) <= 0)
      throw_openssl(CryptoErrorKind::internal, "x25519 public share");
    out.public_share.resize(len);
  } else if (group == KaGroup::p256) {
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_EC, nullptr));
    EVP_PKEY* raw = nullptr;
    if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 ||
        EVP_PKEY_CTX_set_ec_paramgen_curve_nid(ctx.get(), NID_X9_62_prime256v1) <= 0 ||
        EVP_PKEY_keygen(ctx.get(), &raw) <= 0)
      throw_openssl(CryptoErrorKind::internal, "p256 keygen");
    out.private_key = wrap_pkey(raw);
    // Shares travel as uncompressed points; "encoded-pub-key" exports that
    // form (the plain "pub" getter hands back the compressed point).
    out.public_share.resize(65);
    size_t len = 0;
    if (EVP_PKEY_get_octet_string_param(raw, "encoded-pub-key", out.public_share.data(),
                                        out.public_share.size(), &len) <= 0)
      throw_openssl(CryptoErrorKind::internal, "p256 public share");
    out.public_share.resize(len);
  } else {
    throw CryptoError(CryptoErrorKind::group_mismatch,
                      "unknown group " + std::to_string(static_cast<int>(group)));
  }
  return out;
}

static std::shared_ptr<EVP_PKEY> peer_pkey(KaGroup group, std::span<const uint8_t> share) {
  if (group == KaGroup::x25519) {
    if (share.size() != 32)
      throw CryptoError(CryptoErrorKind::group_mismatch, "x25519 share must be 32 bytes");
    EVP_PKEY* raw =
        EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, share.data(), share.size());
    if (!raw)
      throw_openssl(CryptoErrorKind::group_mismatch, "x25519 peer share");
    return wrap_pkey(raw);
  }
  if (group == KaGroup::p256) {
    if (share.size() != 65 || share[0] != 0x04)
      throw CryptoError(CryptoErrorKind::group_mismatch, "p256 share must be an uncompressed point");
    EVP_PKEY* raw = nullptr;
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr));
    OSSL_PARAM params[3];
    params[0] = OSSL_PARAM_construct_utf8_string("group", const_cast<char*>("prime256v1"), 0);
    params[1] = OSSL_PARAM_construct_octet_string("pub", const_cast<uint8_t*>(share.data()),
                                                  share.size());
    params[2] = OSSL_PARAM_construct_end();
    if (!ctx || EVP_PKEY_fromdata_init(ctx.get()) <= 0 ||
        EVP_PKEY_fromdata(ctx.get(), &raw, EVP_PKEY_PUBLIC_KEY, params) <= 0)
      throw_openssl(CryptoErrorKind::group_mismatch, "p256 peer share");
    return wrap_pkey(raw);
  }
  throw CryptoError(CryptoErrorKind::group_mismatch, "unknown group");
}

Bytes ka_shared(const KaKeys& mine, KaGroup peer_group, std::span<const uint8_t> peer_share) {
  if (mine.group != peer_group)
    throw CryptoError(CryptoErrorKind::group_mismatch,
                      "local group " + std::to_string(static_cast<int>(mine.group)) +
                          " vs peer " + std::to_string(static_cast<int>(peer_group)));
  if (!mine.private_key)
    throw CryptoError(CryptoErrorKind::missing_key, "key agreement without private share");
  auto peer = peer_pkey(peer_group, peer_share);

  PkeyCtxPtr ctx(EVP_PKEY_CTX_new(mine.private_key.get(), nullptr));
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
      EVP_PKEY_derive_set_peer(ctx.get(), peer.get()) <= 0)
    throw_openssl(CryptoErrorKind::group_mismatch, "derive init");
  size_t len = 0;
  if (EVP_PKEY_derive(ctx.get(), nullptr, &len) <= 0)
    throw_openssl(CryptoErrorKind::group_mismatch, "derive size");
  Bytes secret(len);
  if (EVP_PKEY_derive(ctx.get(), secret.data(), &len) <= 0)
    throw_openssl(CryptoErrorKind::group_mismatch, "derive");
  secret.resize(len);
  return secret;
}

SessionKeyMaterial derive_session_key(std::span<const uint8_t> shared_secret,
                                      const Transcript& transcript) {
  Bytes info;
  auto push_name = [&info](const std::string& s) {
    info.insert(info.end(), s.begin(), s.end());
    info.push_back(0x00);
  };
  auto push_u32 = [&info](uint32_t v) {
    info.push_back(static_cast<uint8_t>(v >> 24));
    info.push_back(static_cast<uint8_t>(v >> 16));
    info.push_back(static_cast<uint8_t>(v >> 8));
    info.push_back(static_cast<uint8_t>(v));
  };
  push_name(transcript.subscriber_name);
  push_name(transcript.publisher_name);
  push_u32(transcript.subscriber_nonce);
  push_u32(transcript.publisher_nonce);

  static const uint8_t kSalt[] = "danesd session key v1";

  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
      EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), kSalt, sizeof(kSalt) - 1) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), shared_secret.data(),
                                 static_cast<int>(shared_secret.size())) <= 0 ||
      EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), info.data(), static_cast<int>(info.size())) <= 0)
    throw_openssl(CryptoErrorKind::internal, "hkdf init");
  SessionKeyMaterial out;
  out.key.resize(kSessionKeyBytes);
  size_t len = kSessionKeyBytes;
  if (EVP_PKEY_derive(ctx.get(), out.key.data(), &len) <= 0)
    throw_openssl(CryptoErrorKind::internal, "hkdf derive");
  return out;
}

GroupKey make_group_key(uint32_t key_id, uint32_t epoch) {
  GroupKey gk;
  gk.key_id = key_id;
  gk.epoch = epoch;
  gk.key.resize(kSessionKeyBytes);
  if (RAND_bytes(gk.key.data(), static_cast<int>(gk.key.size())) != 1)
    throw_openssl(CryptoErrorKind::internal, "group key entropy");
  return gk;
}

// Wrap format: key_id(4) | epoch(4) | iv(12) | ciphertext | tag(16),
// with key_id/epoch authenticated as additional data.
Bytes wrap_group_key(const SessionKeyMaterial& session, const GroupKey& group) {
  if (session.key.size() != kSessionKeyBytes)
    throw CryptoError(CryptoErrorKind::missing_key, "session key not established");
  Bytes out;
  ByteWriter w;
  w.u32(group.key_id);
  w.u32(group.epoch);
  uint8_t iv[12];
  if (RAND_bytes(iv, sizeof(iv)) != 1)
    throw_openssl(CryptoErrorKind::internal, "iv entropy");
  w.raw(std::span<const uint8_t>(iv, sizeof(iv)));

  std::unique_ptr<EVP_CIPHER_CTX, EvpCipherCtxFree> ctx(EVP_CIPHER_CTX_new());
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, session.key.data(), iv) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm init");
  int len = 0;
  uint8_t aad[8];
  std::memcpy(aad, w.data().data(), 8);
  if (EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad, sizeof(aad)) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm aad");
  Bytes ct(group.key.size());
  if (EVP_EncryptUpdate(ctx.get(), ct.data(), &len, group.key.data(),
                        static_cast<int>(group.key.size())) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm encrypt");
  int fin = 0;
  if (EVP_EncryptFinal_ex(ctx.get(), ct.data() + len, &fin) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm final");
  uint8_t tag[16];
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, sizeof(tag), tag) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm tag");
  w.raw(ct);
  w.raw(std::span<const uint8_t>(tag, sizeof(tag)));
  out = w.take();
  return out;
}

GroupKey unwrap_group_key(const SessionKeyMaterial& session, std::span<const uint8_t> ciphertext) {
  if (session.key.size() != kSessionKeyBytes)
    throw CryptoError(CryptoErrorKind::missing_key, "session key not established");
  if (ciphertext.size() < 4 + 4 + 12 + 16)
    throw CryptoError(CryptoErrorKind::auth_failure, "wrapped key too short");
  ByteReader r(ciphertext);
  GroupKey gk;
  gk.key_id = r.u32();
  gk.epoch = r.u32();
  auto iv = r.raw(12);
  size_t ct_len = r.remaining() - 16;
  auto ct = r.raw(ct_len);
  auto tag = r.raw(16);

  std::unique_ptr<EVP_CIPHER_CTX, EvpCipherCtxFree> ctx(EVP_CIPHER_CTX_new());
  if (!ctx ||
      EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, session.key.data(), iv.data()) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm init");
  int len = 0;
  if (EVP_DecryptUpdate(ctx.get(), nullptr, &len, ciphertext.data(), 8) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm aad");
  gk.key.resize(ct_len);
  if (EVP_DecryptUpdate(ctx.get(), gk.key.data(), &len, ct.data(), static_cast<int>(ct.size())) <= 0)
    throw_openssl(CryptoErrorKind::internal, "gcm decrypt");
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16, const_cast<uint8_t*>(tag.data())) <=
      0)
    throw_openssl(CryptoErrorKind::internal, "gcm tag");
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), gk.key.data() + len, &fin) <= 0) {
    ERR_clear_error();
    throw CryptoError(CryptoErrorKind::auth_failure, "group key unwrap failed authentication");
  }
  return gk;
}

void set_meter(CryptoMeter* meter) {
  g_meter = meter;
}

CryptoMeter* meter() {
  return g_meter;
}

} // namespace danesd::crypto
