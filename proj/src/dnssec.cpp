// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/dnssec.hpp"

#include <algorithm>
#include <sstream>

namespace danesd::dnssec {

std::string to_string(RrType t) {
  switch (t) {
  case RrType::svcb:
    return "SVCB";
  case RrType::tlsa:
    return "TLSA";
  case RrType::dnskey:
    return "DNSKEY";
  case RrType::rrsig:
    return "RRSIG";
  }
  return "?";
}

RrType rrtype_from_string(const std::string& s) {
  if (s == "SVCB")
    return RrType::svcb;
  if (s == "TLSA")
    return RrType::tlsa;
  if (s == "DNSKEY")
    return RrType::dnskey;
  if (s == "RRSIG")
    return RrType::rrsig;
  throw ZoneError("unknown record type: " + s);
}

std::string to_string(ValidationStatus s) {
  switch (s) {
  case ValidationStatus::secure:
    return "Secure";
  case ValidationStatus::insecure:
    return "Insecure";
  case ValidationStatus::bogus:
    return "Bogus";
  case ValidationStatus::indeterminate:
    return "Indeterminate";
  }
  return "?";
}

Bytes canonical_rrset_bytes(const RrSet& rrset, const RrsigData& header) {
  std::vector<std::string> sorted = rrset.rdatas;
  std::sort(sorted.begin(), sorted.end());

  std::ostringstream os;
  os << rrset.owner << '\0' << to_string(rrset.type) << '\0' << rrset.ttl << '\0'
     << header.inception << '\0' << header.expiration << '\0' << header.key_tag << '\0'
     << header.signer << '\0';
  for (const auto& rdata : sorted)
    os << rdata << '\0';
  std::string s = os.str();
  return Bytes(s.begin(), s.end());
}

std::string rrsig_to_presentation(const RrsigData& d) {
  std::ostringstream os;
  os << to_string(d.covered) << " " << crypto::to_string(d.scheme) << " " << d.expiration << " "
     << d.inception << " " << d.key_tag << " " << d.signer << " " << base64_encode(d.signature);
  return os.str();
}

RrsigData rrsig_from_presentation(const std::string& text) {
  std::istringstream is(text);
  std::string covered, scheme, sig;
  RrsigData d;
  if (!(is >> covered >> scheme >> d.expiration >> d.inception >> d.key_tag >> d.signer >> sig))
    throw ZoneError("malformed RRSIG value: " + text);
  d.covered = rrtype_from_string(covered);
  d.scheme = crypto::scheme_from_string(scheme);
  d.signature = base64_decode(sig);
  return d;
}

std::string dnskey_rdata(const Bytes& public_key_der, bool key_signing,
                         crypto::SignatureScheme scheme) {
  std::ostringstream os;
  os << (key_signing ? 257 : 256) << " 3 " << crypto::to_string(scheme) << " "
     << base64_encode(public_key_der);
  return os.str();
}

Bytes dnskey_public_der(const std::string& rdata) {
  std::istringstream is(rdata);
  int flags = 0, protocol = 0;
  std::string scheme, b64;
  if (!(is >> flags >> protocol >> scheme >> b64))
    throw ZoneError("malformed DNSKEY value: " + rdata);
  return base64_decode(b64);
}

crypto::SignatureScheme dnskey_scheme(const std::string& rdata) {
  std::istringstream is(rdata);
  int flags = 0, protocol = 0;
  std::string scheme;
  if (!(is >> flags >> protocol >> scheme))
    throw ZoneError("malformed DNSKEY value: " + rdata);
  return crypto::scheme_from_string(scheme);
}

void Zone::set_zsk(crypto::KeyPair zsk) {
  if (zsk.usage() != crypto::KeyUsage::zone_signing)
    throw crypto::CryptoError(crypto::CryptoErrorKind::key_usage_violation,
                              "zone signing requires a zone-signing key, got " +
                                  crypto::to_string(zsk.usage()));
  zsk_dnskey_rdata_ = dnskey_rdata(zsk.public_key_der(), false, zsk.scheme());
  zsk_ = std::move(zsk);
}

void Zone::add_record(const DnsName& owner, RrType type, const std::string& rdata, uint32_t ttl) {
  if (type == RrType::rrsig || type == RrType::dnskey)
    throw ZoneError("RRSIG/DNSKEY records are managed by the signer");
  auto& rrset = rrsets_[{owner, type}];
  rrset.owner = owner;
  rrset.type = type;
  rrset.ttl = ttl;
  if (std::find(rrset.rdatas.begin(), rrset.rdatas.end(), rdata) == rrset.rdatas.end()) {
    rrset.rdatas.push_back(rdata);
    std::sort(rrset.rdatas.begin(), rrset.rdatas.end());
  }
  rrsigs_.erase({owner, type}); // mutated set needs a fresh signature
}

void Zone::remove_record(const DnsName& owner, RrType type, const std::string& rdata) {
  auto it = rrsets_.find({owner, type});
  if (it == rrsets_.end())
    throw ZoneError("UnknownName: " + owner + " " + to_string(type));
  auto& rdatas = it->second.rdatas;
  auto pos = std::find(rdatas.begin(), rdatas.end(), rdata);
  if (pos == rdatas.end())
    throw ZoneError("UnknownName: no such record under " + owner);
  rdatas.erase(pos);
  rrsigs_.erase({owner, type});
  if (rdatas.empty())
    rrsets_.erase(it);
}

bool Zone::has_name(const DnsName& owner) const {
  for (const auto& [key, _] : rrsets_)
    if (key.first == owner)
      return true;
  return false;
}

const RrSet* Zone::find(const DnsName& owner, RrType type) const {
  auto it = rrsets_.find({owner, type});
  return it == rrsets_.end() ? nullptr : &it->second;
}

RrSet Zone::dnskey_rrset() const {
  RrSet rrset;
  rrset.owner = apex_;
  rrset.type = RrType::dnskey;
  rrset.ttl = kDefaultRecordTtl;
  if (!zsk_dnskey_rdata_.empty())
    rrset.rdatas.push_back(zsk_dnskey_rdata_);
  return rrset;
}

void Zone::sign_one(const std::pair<DnsName, RrType>& key, VirtualTime now,
                    int64_t validity_seconds) {
  if (!zsk_.valid())
    throw crypto::CryptoError(crypto::CryptoErrorKind::missing_key, "zone has no ZSK");
  RrsigData sig;
  sig.covered = key.second;
  sig.scheme = zsk_.scheme();
  sig.inception = to_seconds(now);
  sig.expiration = sig.inception + validity_seconds;
  sig.key_tag = zsk_.key_tag();
  sig.signer = apex_;
  sig.signature = zsk_.sign(canonical_rrset_bytes(rrsets_.at(key), sig));
  rrsigs_[key] = std::move(sig);
}

void Zone::sign(VirtualTime now, const crypto::KeyPair* ksk, int64_t validity_seconds) {
  if (!zsk_.valid())
    throw crypto::CryptoError(crypto::CryptoErrorKind::missing_key, "zone has no ZSK");
  for (const auto& [key, _] : rrsets_)
    sign_one(key, now, validity_seconds);

  if (ksk) {
    if (ksk->usage() != crypto::KeyUsage::key_signing)
      throw crypto::CryptoError(crypto::CryptoErrorKind::key_usage_violation,
                                "delegation requires a key-signing key, got " +
                                    crypto::to_string(ksk->usage()));
    RrsigData sig;
    sig.covered = RrType::dnskey;
    sig.scheme = ksk->scheme();
    sig.inception = to_seconds(now);
    sig.expiration = sig.inception + validity_seconds;
    sig.key_tag = ksk->key_tag();
    sig.signer = apex_;
    sig.signature = ksk->sign(canonical_rrset_bytes(dnskey_rrset(), sig));
    dnskey_rrsig_ = std::move(sig);
  }
  if (!dnskey_rrsig_)
    throw crypto::CryptoError(crypto::CryptoErrorKind::missing_key,
                              "zone has no KSK delegation over its DNSKEY set");
}

void Zone::rollover_add(const DnsName& owner, RrType type, const std::string& rdata,
                        VirtualTime now) {
  add_record(owner, type, rdata);
  sign_one({owner, type}, now, kDefaultSignatureValiditySeconds);
}

void Zone::rollover_remove(const DnsName& owner, RrType type, const std::string& rdata,
                           VirtualTime now) {
  remove_record(owner, type, rdata);
  if (rrsets_.count({owner, type}))
    sign_one({owner, type}, now, kDefaultSignatureValiditySeconds);
}

size_t Zone::record_name_count() const {
  std::vector<DnsName> names;
  for (const auto& [key, _] : rrsets_)
    names.push_back(key.first);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names.size();
}

size_t Zone::rrset_count() const {
  return rrsets_.size() + (zsk_dnskey_rdata_.empty() ? 0 : 1);
}

ValidationStatus validate_rrset(const RrSet& rrset, const RrsigData& rrsig,
                                const crypto::KeyPair& signer_public_key, VirtualTime now) {
  if (rrsig.covered != rrset.type)
    return ValidationStatus::bogus;
  int64_t now_s = to_seconds(now);
  if (now_s < rrsig.inception || now_s >= rrsig.expiration)
    return ValidationStatus::bogus;
  Bytes canonical = canonical_rrset_bytes(rrset, rrsig);
  return signer_public_key.verify(canonical, rrsig.signature) ? ValidationStatus::secure
                                                              : ValidationStatus::bogus;
}

ValidationStatus validate_chain(const SignedRrSet& data, const SignedRrSet& dnskey,
                                const crypto::KeyPair& trust_anchor, VirtualTime now) {
  if (!data.rrsig || !dnskey.rrsig)
    return ValidationStatus::insecure;
  if (validate_rrset(dnskey.rrset, *dnskey.rrsig, trust_anchor, now) != ValidationStatus::secure)
    return ValidationStatus::bogus;
  // Try every zone key in the DNSKEY set; a match on the key tag is not
  // required but avoids pointless verifications.
  for (const auto& rdata : dnskey.rrset.rdatas) {
    crypto::KeyPair zone_key;
    try {
      zone_key = crypto::KeyPair::from_public_key_der(dnskey_public_der(rdata),
                                                      dnskey_scheme(rdata),
                                                      crypto::KeyUsage::zone_signing);
    } catch (const std::exception&) {
      continue;
    }
    if (zone_key.key_tag() != data.rrsig->key_tag)
      continue;
    if (validate_rrset(data.rrset, *data.rrsig, zone_key, now) == ValidationStatus::secure)
      return ValidationStatus::secure;
  }
  return ValidationStatus::bogus;
}

std::string Zone::to_zone_file() const {
  std::ostringstream os;
  os << "; zone " << apex_ << "\n";
  RrSet dnskey = dnskey_rrset();
  for (const auto& rdata : dnskey.rdatas)
    os << apex_ << " " << dnskey.ttl << " IN DNSKEY " << rdata << "\n";
  if (dnskey_rrsig_)
    os << apex_ << " " << dnskey.ttl << " IN RRSIG " << rrsig_to_presentation(*dnskey_rrsig_)
       << "\n";
  for (const auto& [key, rrset] : rrsets_) {
    for (const auto& rdata : rrset.rdatas)
      os << key.first << " " << rrset.ttl << " IN " << to_string(key.second) << " " << rdata
         << "\n";
    auto sig = rrsigs_.find(key);
    if (sig != rrsigs_.end())
      os << key.first << " " << rrset.ttl << " IN RRSIG " << rrsig_to_presentation(sig->second)
         << "\n";
  }
  return os.str();
}

Zone Zone::from_zone_file(const std::string& text) {
  Zone zone;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    if (line[0] == ';') {
      std::istringstream header(line.substr(1));
      std::string word, apex;
      if (header >> word >> apex && word == "zone")
        zone.apex_ = apex;
      continue;
    }
    std::istringstream ls(line);
    std::string owner, klass, type;
    uint32_t ttl = 0;
    if (!(ls >> owner >> ttl >> klass >> type))
      throw ZoneError("malformed zone line: " + line);
    std::string value;
    std::getline(ls, value);
    if (!value.empty() && value[0] == ' ')
      value.erase(0, 1);

    if (type == "DNSKEY") {
      zone.zsk_dnskey_rdata_ = value;
      if (zone.apex_.empty())
        zone.apex_ = owner;
    } else if (type == "RRSIG") {
      RrsigData sig = rrsig_from_presentation(value);
      if (sig.covered == RrType::dnskey)
        zone.dnskey_rrsig_ = sig;
      else
        zone.rrsigs_[{owner, sig.covered}] = sig;
    } else {
      RrType t = rrtype_from_string(type);
      auto& rrset = zone.rrsets_[{owner, t}];
      rrset.owner = owner;
      rrset.type = t;
      rrset.ttl = ttl;
      rrset.rdatas.push_back(value);
      std::sort(rrset.rdatas.begin(), rrset.rdatas.end());
    }
  }
  if (zone.apex_.empty())
    throw ZoneError("zone file without apex");
  return zone;
}

} // namespace danesd::dnssec
