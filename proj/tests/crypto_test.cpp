#include "doctest.h"

#include "danesd/crypto.hpp"

#include <random>
#include <set>

using namespace danesd;
using namespace danesd::crypto;

namespace {

const KeyPair& test_key() {
  static KeyPair key = KeyPair::generate(SignatureScheme::rsa2048_sha256, KeyUsage::identity);
  return key;
}

const Certificate& test_cert() {
  static Certificate cert =
      make_certificate(test_key(), "_5000._someip.3.2.1.42.service.vehicle1.oem.", 1000, 1000 + 86400 * 30);
  return cert;
}

} // namespace

TEST_CASE("sign then verify with matching certificate") {
  Bytes ctx = nonce_context("_5000._someip.3.2.1.42.service.vehicle1.oem.", sha256(Bytes{1, 2, 3}));
  Bytes sig = sign_nonce(test_key(), 0xCAFEBABE, ctx);
  CHECK(verify_nonce(test_cert(), 0xCAFEBABE, ctx, sig));
}

TEST_CASE("verification fails under a different certificate") {
  KeyPair other = KeyPair::generate(SignatureScheme::rsa2048_sha256, KeyUsage::identity);
  Certificate other_cert = make_certificate(other, "_someip-client.17.client.vehicle1.oem.", 0, 1000);
  Bytes ctx = nonce_context("a.", sha256(Bytes{9}));
  Bytes sig = sign_nonce(test_key(), 7, ctx);
  CHECK_FALSE(verify_nonce(other_cert, 7, ctx, sig));
}

TEST_CASE("nonce and context are both bound by the signature") {
  Bytes digest = sha256(Bytes{0x10, 0x20});
  Bytes ctx = nonce_context("sender.", digest);
  uint32_t nonce = 0x01020304;
  Bytes sig = sign_nonce(test_key(), nonce, ctx);

  CHECK(verify_nonce(test_cert(), nonce, ctx, sig));
  CHECK_FALSE(verify_nonce(test_cert(), nonce + 1, ctx, sig));

  // Bit-flip sweep across the context.
  for (size_t i = 0; i < ctx.size(); i += 3) {
    Bytes mutated = ctx;
    mutated[i] ^= 0x01;
    CHECK_FALSE(verify_nonce(test_cert(), nonce, mutated, sig));
  }
  // Bit flips in the signature itself.
  for (size_t i = 0; i < sig.size(); i += 17) {
    Bytes mutated = sig;
    mutated[i] ^= 0x80;
    CHECK_FALSE(verify_nonce(test_cert(), nonce, ctx, mutated));
  }
}

TEST_CASE("certificate der parses back to subject and validity") {
  Certificate back = certificate_from_der(test_cert().der);
  CHECK(back.subject == "_5000._someip.3.2.1.42.service.vehicle1.oem.");
  CHECK(back.not_before == 1000);
  CHECK(back.not_after == 1000 + 86400 * 30);
}

TEST_CASE("empty validity window is rejected") {
  CHECK_THROWS_AS(make_certificate(test_key(), "x.", 50, 50), CryptoError);
}

TEST_CASE("tlsa exact match accepts only the published certificate") {
  auto tlsa = build_tlsa(test_cert());
  CHECK(tlsa.usage == 3);
  CHECK(tlsa.selector == 0);
  CHECK(tlsa.matching == 0);
  CHECK(match_tlsa(test_cert(), tlsa));

  KeyPair other = KeyPair::generate(SignatureScheme::ecdsa_p256_sha256, KeyUsage::identity);
  Certificate other_cert = make_certificate(other, "y.", 0, 100);
  CHECK_FALSE(match_tlsa(other_cert, tlsa));
}

TEST_CASE("tlsa sha256 matching compares digests") {
  auto tlsa = build_tlsa(test_cert(), 1);
  CHECK(tlsa.association_data == sha256(test_cert().der));
  CHECK(match_tlsa(test_cert(), tlsa));

  auto mutated = tlsa;
  mutated.association_data[5] ^= 1;
  CHECK_FALSE(match_tlsa(test_cert(), mutated));
}

TEST_CASE("unsupported tlsa parameter triples are refused") {
  auto tlsa = build_tlsa(test_cert());
  tlsa.usage = 1;
  CHECK_THROWS_AS(match_tlsa(test_cert(), tlsa), CryptoError);
  tlsa.usage = 3;
  tlsa.selector = 1;
  CHECK_THROWS_AS(match_tlsa(test_cert(), tlsa), CryptoError);
  tlsa.selector = 0;
  tlsa.matching = 2;
  CHECK_THROWS_AS(match_tlsa(test_cert(), tlsa), CryptoError);
}

TEST_CASE("key agreement is symmetric for 1000 pairs") {
  for (int i = 0; i < 1000; ++i) {
    KaGroup group = (i % 4 == 0) ? KaGroup::p256 : KaGroup::x25519;
    KaKeys a = ka_generate(group);
    KaKeys b = ka_generate(group);
    Bytes ab = ka_shared(a, b.group, b.public_share);
    Bytes ba = ka_shared(b, a.group, a.public_share);
    if (ab != ba) {
      CAPTURE(i);
      REQUIRE(ab == ba);
    }
  }
  CHECK(true);
}

TEST_CASE("independent pairs derive pairwise distinct secrets") {
  std::set<Bytes> secrets;
  for (int i = 0; i < 3; ++i) {
    KaKeys a = ka_generate(KaGroup::x25519);
    KaKeys b = ka_generate(KaGroup::x25519);
    secrets.insert(ka_shared(a, b.group, b.public_share));
  }
  CHECK(secrets.size() == 3);
}

TEST_CASE("group mismatch and malformed shares never produce a silent key") {
  KaKeys a = ka_generate(KaGroup::x25519);
  KaKeys b = ka_generate(KaGroup::p256);
  CHECK_THROWS_AS(ka_shared(a, b.group, b.public_share), CryptoError);
  CHECK_THROWS_AS(ka_shared(a, KaGroup::x25519, Bytes(16, 1)), CryptoError);
  CHECK_THROWS_AS(ka_shared(b, KaGroup::p256, Bytes(65, 0)), CryptoError);

  // A tampered x25519 share is still structurally valid; both sides must
  // then disagree on the secret.
  KaKeys c = ka_generate(KaGroup::x25519);
  Bytes tampered = c.public_share;
  tampered[3] ^= 0x10;
  Bytes honest = ka_shared(a, KaGroup::x25519, c.public_share);
  Bytes attacked = ka_shared(a, KaGroup::x25519, tampered);
  CHECK(honest != attacked);
}

TEST_CASE("session key derivation is deterministic and transcript sensitive") {
  Bytes secret(32, 0x5A);
  Transcript t{"sub.", "pub.", 1, 2};
  SessionKeyMaterial k1 = derive_session_key(secret, t);
  SessionKeyMaterial k2 = derive_session_key(secret, t);
  CHECK(k1 == k2);
  CHECK(k1.key.size() == kSessionKeyBytes);

  // Avalanche over every transcript field.
  Transcript variants[] = {
      {"sub2.", "pub.", 1, 2},
      {"sub.", "pub2.", 1, 2},
      {"sub.", "pub.", 3, 2},
      {"sub.", "pub.", 1, 4},
  };
  for (const auto& v : variants)
    CHECK(derive_session_key(secret, v) != k1);
  Bytes other_secret(32, 0x5B);
  CHECK(derive_session_key(other_secret, t) != k1);
}

TEST_CASE("group key wrap round-trips and authenticates") {
  SessionKeyMaterial session = derive_session_key(Bytes(32, 1), {"a.", "b.", 1, 2});
  GroupKey gk = make_group_key(77, 1);
  Bytes wrapped = wrap_group_key(session, gk);
  GroupKey back = unwrap_group_key(session, wrapped);
  CHECK(back == gk);

  SessionKeyMaterial wrong = derive_session_key(Bytes(32, 2), {"a.", "b.", 1, 2});
  CHECK_THROWS_AS(unwrap_group_key(wrong, wrapped), CryptoError);

  Bytes mangled = wrapped;
  mangled[wrapped.size() - 1] ^= 1;
  CHECK_THROWS_AS(unwrap_group_key(session, mangled), CryptoError);
}

TEST_CASE("rekeyed group keys carry the next epoch") {
  GroupKey e1 = make_group_key(77, 1);
  GroupKey e2 = make_group_key(77, 2);
  CHECK(e2.epoch == e1.epoch + 1);
  CHECK(e1.key != e2.key);
}

TEST_CASE("ecdsa profile signs and verifies behind the same interface") {
  KeyPair key = KeyPair::generate(SignatureScheme::ecdsa_p256_sha256, KeyUsage::identity);
  Certificate cert = make_certificate(key, "ecdsa.", 0, 1000);
  Bytes ctx = nonce_context("ecdsa.", sha256(Bytes{1}));
  Bytes sig = sign_nonce(key, 99, ctx);
  CHECK(verify_nonce(cert, 99, ctx, sig));
  CHECK_FALSE(verify_nonce(cert, 100, ctx, sig));
}

TEST_CASE("crypto meter observes sign and verify operations") {
  struct Capture : CryptoMeter {
    int signs = 0, verifies = 0;
    void record(const std::string& op, double) override {
      if (op == "create_signature")
        ++signs;
      if (op == "verify_signature")
        ++verifies;
    }
  } capture;
  set_meter(&capture);
  Bytes ctx = nonce_context("m.", sha256(Bytes{0}));
  Bytes sig = sign_nonce(test_key(), 5, ctx);
  (void)verify_nonce(test_cert(), 5, ctx, sig);
  set_meter(nullptr);
  CHECK(capture.signs == 1);
  CHECK(capture.verifies == 1);
}
