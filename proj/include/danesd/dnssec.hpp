// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/crypto.hpp"
#include "danesd/records.hpp"
#include "danesd/time.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace danesd::dnssec {

using records::DnsName;

enum class RrType { svcb, tlsa, dnskey, rrsig };

std::string to_string(RrType t);
RrType rrtype_from_string(const std::string& s);

enum class ValidationStatus { secure, insecure, bogus, indeterminate };

std::string to_string(ValidationStatus s);

class ZoneError : public std::runtime_error {
public:
  explicit ZoneError(const std::string& what) : std::runtime_error(what) {}
};

struct RrSet {
  DnsName owner;
  RrType type = RrType::svcb;
  uint32_t ttl = 86400;
  std::vector<std::string> rdatas; // presentation-format values, kept sorted

  bool operator==(const RrSet&) const = default;
};

struct RrsigData {
  RrType covered = RrType::svcb;
  crypto::SignatureScheme scheme = crypto::SignatureScheme::rsa2048_sha256;
  int64_t inception = 0;  // unix-style seconds of virtual time
  int64_t expiration = 0;
  uint16_t key_tag = 0;
  DnsName signer;
  Bytes signature;

  bool operator==(const RrsigData&) const = default;
};

struct SignedRrSet {
  RrSet rrset;
  std::optional<RrsigData> rrsig;
};

// Deterministic byte string both signer and validator derive from an rrset.
Bytes canonical_rrset_bytes(const RrSet& rrset, const RrsigData& header);

std::string rrsig_to_presentation(const RrsigData& d);
RrsigData rrsig_from_presentation(const std::string& text);

constexpr uint32_t kDefaultRecordTtl = 86400;
constexpr int64_t kDefaultSignatureValiditySeconds = 30LL * 86400;
constexpr uint32_t kNegativeTtl = 60;

// Per-vehicle zone: data rrsets signed by the vehicle ZSK, the apex DNSKEY
// set signed by the OEM KSK (the delegation proof).
class Zone {
public:
  Zone() = default;
  explicit Zone(DnsName apex) : apex_(std::move(apex)) {}

  const DnsName& apex() const { return apex_; }

  void set_zsk(crypto::KeyPair zsk);
  const crypto::KeyPair& zsk() const { return zsk_; }

  void add_record(const DnsName& owner, RrType type, const std::string& rdata,
                  uint32_t ttl = kDefaultRecordTtl);
  // Throws ZoneError("UnknownName...") when nothing matches.
  void remove_record(const DnsName& owner, RrType type, const std::string& rdata);
  bool has_name(const DnsName& owner) const;

  const RrSet* find(const DnsName& owner, RrType type) const;
  const std::map<std::pair<DnsName, RrType>, RrSet>& rrsets() const { return rrsets_; }
  const std::map<std::pair<DnsName, RrType>, RrsigData>& rrsigs() const { return rrsigs_; }

  // Signs every data rrset with the ZSK and the DNSKEY rrset with the KSK
  // when one is supplied (otherwise an existing delegation is kept).
  void sign(VirtualTime now, const crypto::KeyPair* ksk = nullptr,
            int64_t validity_seconds = kDefaultSignatureValiditySeconds);

  // Re-signs a single rrset after a rollover mutation.
  void rollover_add(const DnsName& owner, RrType type, const std::string& rdata, VirtualTime now);
  void rollover_remove(const DnsName& owner, RrType type, const std::string& rdata,
                       VirtualTime now);

  RrSet dnskey_rrset() const;
  const std::optional<RrsigData>& dnskey_rrsig() const { return dnskey_rrsig_; }

  // Owner names holding data records (the apex DNSKEY does not count).
  size_t record_name_count() const;
  size_t rrset_count() const; // data rrsets + the DNSKEY rrset

  std::string to_zone_file() const;
  static Zone from_zone_file(const std::string& text);

private:
  void sign_one(const std::pair<DnsName, RrType>& key, VirtualTime now, int64_t validity_seconds);

  DnsName apex_;
  crypto::KeyPair zsk_;
  std::string zsk_dnskey_rdata_; // survives zone-file round trips without the private key
  std::map<std::pair<DnsName, RrType>, RrSet> rrsets_;
  std::map<std::pair<DnsName, RrType>, RrsigData> rrsigs_;
  std::optional<RrsigData> dnskey_rrsig_;
};

std::string dnskey_rdata(const Bytes& public_key_der, bool key_signing,
                         crypto::SignatureScheme scheme);
Bytes dnskey_public_der(const std::string& rdata);
crypto::SignatureScheme dnskey_scheme(const std::string& rdata);

ValidationStatus validate_rrset(const RrSet& rrset, const RrsigData& rrsig,
                                const crypto::KeyPair& signer_public_key, VirtualTime now);

// Full chain check against a trust anchor: DNSKEY rrset under the anchor,
// then the data rrset under the zone key from that DNSKEY set.
ValidationStatus validate_chain(const SignedRrSet& data, const SignedRrSet& dnskey,
                                const crypto::KeyPair& trust_anchor, VirtualTime now);

} // namespace danesd::dnssec
