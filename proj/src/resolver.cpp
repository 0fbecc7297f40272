// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/resolver.hpp"

namespace danesd::dnssec {

std::string to_string(Rcode r) {
  switch (r) {
  case Rcode::ok:
    return "NOERROR";
  case Rcode::nxdomain:
    return "NXDOMAIN";
  case Rcode::nodata:
    return "NODATA";
  case Rcode::servfail:
    return "SERVFAIL";
  }
  return "?";
}

std::optional<SignedRrSet> ZoneBackedSource::fetch(const DnsName& name, RrType type) {
  if (type == RrType::dnskey && name == zone_->apex())
    return dnskey();
  const RrSet* rrset = zone_->find(name, type);
  if (!rrset)
    return std::nullopt;
  SignedRrSet out;
  out.rrset = *rrset;
  auto sig = zone_->rrsigs().find({name, type});
  if (sig != zone_->rrsigs().end())
    out.rrsig = sig->second;
  return out;
}

bool ZoneBackedSource::name_exists(const DnsName& name) {
  // Authoritative for everything under the apex: absent data inside the
  // zone is NODATA, anything outside is NXDOMAIN.
  if (name == zone_->apex() || zone_->has_name(name))
    return true;
  const DnsName& apex = zone_->apex();
  return name.size() > apex.size() &&
      name.compare(name.size() - apex.size(), apex.size(), apex) == 0 &&
      name[name.size() - apex.size() - 1] == '.';
}

SignedRrSet ZoneBackedSource::dnskey() {
  SignedRrSet out;
  out.rrset = zone_->dnskey_rrset();
  out.rrsig = zone_->dnskey_rrsig();
  return out;
}

std::vector<SignedRrSet> ZoneBackedSource::all_signed() {
  std::vector<SignedRrSet> out;
  for (const auto& [key, rrset] : zone_->rrsets()) {
    SignedRrSet s;
    s.rrset = rrset;
    auto sig = zone_->rrsigs().find(key);
    if (sig != zone_->rrsigs().end())
      s.rrsig = sig->second;
    out.push_back(std::move(s));
  }
  return out;
}

Resolver::Resolver(crypto::KeyPair trust_anchor) : trust_anchor_(std::move(trust_anchor)) {
  if (trust_anchor_.usage() != crypto::KeyUsage::key_signing)
    throw crypto::CryptoError(crypto::CryptoErrorKind::key_usage_violation,
                              "trust anchor must be a key-signing key");
}

void Resolver::set_expiry_policy(ExpiryPolicy policy) {
  if (policy == ExpiryPolicy::degraded)
    throw std::invalid_argument(
        "degraded expiry policy has no defined semantics yet; only strict is implemented");
  expiry_policy_ = policy;
}

void Resolver::flush() {
  cache_.clear();
  negative_.clear();
}

std::vector<crypto::KeyPair> Resolver::zone_keys(VirtualTime now, bool* servfail) {
  *servfail = false;
  // The validated DNSKEY set lives in the cache like any other rrset.
  for (const auto& [key, entry] : cache_) {
    if (key.second != RrType::dnskey)
      continue;
    if (!fresh(entry.inserted_at, entry.ttl, now) || entry.status != ValidationStatus::secure)
      continue;
    std::vector<crypto::KeyPair> keys;
    for (const auto& rdata : entry.rdatas) {
      try {
        keys.push_back(crypto::KeyPair::from_public_key_der(
            dnskey_public_der(rdata), dnskey_scheme(rdata), crypto::KeyUsage::zone_signing));
      } catch (const std::exception&) {
      }
    }
    return keys;
  }

  if (!source_ || !source_->reachable()) {
    *servfail = true;
    return {};
  }
  ++upstream_fetches_;
  SignedRrSet dnskey = source_->dnskey();
  if (!dnskey.rrsig)
    return {};
  if (validate_rrset(dnskey.rrset, *dnskey.rrsig, trust_anchor_, now) != ValidationStatus::secure)
    return {};

  CacheEntry entry;
  entry.rdatas = dnskey.rrset.rdatas;
  entry.ttl = dnskey.rrset.ttl;
  entry.status = ValidationStatus::secure;
  entry.inserted_at = now;
  cache_[{dnskey.rrset.owner, RrType::dnskey}] = entry;

  std::vector<crypto::KeyPair> keys;
  for (const auto& rdata : dnskey.rrset.rdatas) {
    try {
      keys.push_back(crypto::KeyPair::from_public_key_der(
          dnskey_public_der(rdata), dnskey_scheme(rdata), crypto::KeyUsage::zone_signing));
    } catch (const std::exception&) {
    }
  }
  return keys;
}

ValidationStatus Resolver::validate_with_keys(const SignedRrSet& data,
                                              const std::vector<crypto::KeyPair>& keys,
                                              VirtualTime now) const {
  if (!data.rrsig)
    return ValidationStatus::insecure;
  for (const auto& key : keys) {
    if (key.key_tag() != data.rrsig->key_tag)
      continue;
    if (validate_rrset(data.rrset, *data.rrsig, key, now) == ValidationStatus::secure)
      return ValidationStatus::secure;
  }
  return ValidationStatus::bogus;
}

ValidationStatus Resolver::verify(const SignedRrSet& data, const SignedRrSet& dnskey,
                                  VirtualTime now) const {
  return validate_chain(data, dnskey, trust_anchor_, now);
}

ResolveResult Resolver::resolve(const DnsName& name, RrType type, VirtualTime now) {
  auto key = std::make_pair(name, type);

  if (auto it = cache_.find(key); it != cache_.end() && fresh(it->second.inserted_at, it->second.ttl, now)) {
    ResolveResult out;
    out.rcode = Rcode::ok;
    out.rdatas = it->second.rdatas;
    out.ttl = it->second.ttl;
    out.status = it->second.status;
    out.from_cache = true;
    return out;
  }
  if (auto it = negative_.find(key);
      it != negative_.end() && fresh(it->second.inserted_at, kNegativeTtl, now)) {
    ResolveResult out;
    out.rcode = it->second.rcode;
    out.status = ValidationStatus::insecure;
    out.from_cache = true;
    return out;
  }

  if (!source_ || !source_->reachable())
    return {}; // servfail

  bool servfail = false;
  std::vector<crypto::KeyPair> keys = zone_keys(now, &servfail);
  if (servfail)
    return {};

  ++upstream_fetches_;
  std::optional<SignedRrSet> answer = source_->fetch(name, type);
  if (!answer) {
    NegativeEntry neg;
    neg.rcode = source_->name_exists(name) ? Rcode::nodata : Rcode::nxdomain;
    neg.inserted_at = now;
    negative_[key] = neg;
    ResolveResult out;
    out.rcode = neg.rcode;
    out.status = ValidationStatus::insecure;
    return out;
  }

  ResolveResult out;
  out.rcode = Rcode::ok;
  out.rdatas = answer->rrset.rdatas;
  out.ttl = answer->rrset.ttl;
  out.status = keys.empty() ? ValidationStatus::bogus : validate_with_keys(*answer, keys, now);

  // Bogus data is reported, never cached; a later query may see a repaired
  // zone without waiting out a poisoned TTL.
  if (out.status == ValidationStatus::secure || out.status == ValidationStatus::insecure) {
    CacheEntry entry;
    entry.rdatas = out.rdatas;
    entry.ttl = out.ttl;
    entry.status = out.status;
    entry.inserted_at = now;
    cache_[key] = entry;
    negative_.erase(key);
  }
  return out;
}

PreloadReport Resolver::preload(VirtualTime now) {
  PreloadReport report;
  if (!source_ || !source_->reachable())
    throw ZoneError("SERVFAIL: zone source unreachable for preload");

  bool servfail = false;
  std::vector<crypto::KeyPair> keys = zone_keys(now, &servfail);
  if (servfail)
    throw ZoneError("SERVFAIL: zone source unreachable for preload");
  if (keys.empty()) {
    report.rejected += 1;
    report.rejected_names.push_back("(apex DNSKEY)");
    return report;
  }
  report.cached += 1; // the validated DNSKEY rrset itself

  ++upstream_fetches_;
  for (const auto& signed_rrset : source_->all_signed()) {
    ValidationStatus status = validate_with_keys(signed_rrset, keys, now);
    if (status != ValidationStatus::secure) {
      report.rejected += 1;
      report.rejected_names.push_back(signed_rrset.rrset.owner);
      continue;
    }
    CacheEntry entry;
    entry.rdatas = signed_rrset.rrset.rdatas;
    entry.ttl = signed_rrset.rrset.ttl;
    entry.status = status;
    entry.inserted_at = now;
    cache_[{signed_rrset.rrset.owner, signed_rrset.rrset.type}] = entry;
    report.cached += 1;
  }
  return report;
}

} // namespace danesd::dnssec
