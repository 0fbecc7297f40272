// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/dnssec.hpp"

#include <map>
#include <optional>
#include <vector>

namespace danesd::dnssec {

enum class Rcode { ok, nxdomain, nodata, servfail };

std::string to_string(Rcode r);

struct ResolveResult {
  Rcode rcode = Rcode::servfail;
  std::vector<std::string> rdatas;
  uint32_t ttl = 0;
  ValidationStatus status = ValidationStatus::indeterminate;
  bool from_cache = false;
};

class ZoneSource {
public:
  virtual ~ZoneSource() = default;
  virtual bool reachable() const = 0;
  virtual std::optional<SignedRrSet> fetch(const DnsName& name, RrType type) = 0;
  virtual bool name_exists(const DnsName& name) = 0;
  virtual SignedRrSet dnskey() = 0;
  virtual std::vector<SignedRrSet> all_signed() = 0;
};

// Authoritative view over an in-memory zone, with a connectivity switch so
// offline operation can be exercised.
class ZoneBackedSource : public ZoneSource {
public:
  explicit ZoneBackedSource(const Zone* zone) : zone_(zone) {}

  void set_connected(bool connected) { connected_ = connected; }

  bool reachable() const override { return connected_ && zone_ != nullptr; }
  std::optional<SignedRrSet> fetch(const DnsName& name, RrType type) override;
  bool name_exists(const DnsName& name) override;
  SignedRrSet dnskey() override;
  std::vector<SignedRrSet> all_signed() override;

private:
  const Zone* zone_;
  bool connected_ = true;
};

struct PreloadReport {
  size_t cached = 0;
  size_t rejected = 0;
  std::vector<DnsName> rejected_names;
};

// Extended offline use of expired credentials is a recognized degradation
// mode without agreed semantics; only strict is implemented.
enum class ExpiryPolicy { strict, degraded };

// Validating, caching resolver. Validation happens here; endpoints trust
// the returned status (and may re-validate through verify()).
class Resolver {
public:
  explicit Resolver(crypto::KeyPair trust_anchor);

  void set_source(ZoneSource* source) { source_ = source; }
  void set_expiry_policy(ExpiryPolicy policy);
  ExpiryPolicy expiry_policy() const { return expiry_policy_; }

  ResolveResult resolve(const DnsName& name, RrType type, VirtualTime now);
  PreloadReport preload(VirtualTime now);

  ValidationStatus verify(const SignedRrSet& data, const SignedRrSet& dnskey,
                          VirtualTime now) const;

  uint64_t upstream_fetches() const { return upstream_fetches_; }
  size_t cache_size() const { return cache_.size() + negative_.size(); }
  void flush();

private:
  struct CacheEntry {
    std::vector<std::string> rdatas;
    uint32_t ttl = 0;
    ValidationStatus status = ValidationStatus::indeterminate;
    VirtualTime inserted_at = 0;
  };
  struct NegativeEntry {
    Rcode rcode = Rcode::nxdomain;
    VirtualTime inserted_at = 0;
  };

  bool fresh(VirtualTime inserted_at, uint32_t ttl, VirtualTime now) const {
    return now < inserted_at + static_cast<VirtualTime>(ttl) * kNsPerSec;
  }

  // Returns the validated zone keys from the cached or freshly fetched
  // DNSKEY rrset; empty when the delegation cannot be validated.
  std::vector<crypto::KeyPair> zone_keys(VirtualTime now, bool* servfail);
  ValidationStatus validate_with_keys(const SignedRrSet& data,
                                      const std::vector<crypto::KeyPair>& keys,
                                      VirtualTime now) const;

  crypto::KeyPair trust_anchor_;
  ZoneSource* source_ = nullptr;
  ExpiryPolicy expiry_policy_ = ExpiryPolicy::strict;
  std::map<std::pair<DnsName, RrType>, CacheEntry> cache_;
  std::map<std::pair<DnsName, RrType>, NegativeEntry> negative_;
  uint64_t upstream_fetches_ = 0;
};

} // namespace danesd::dnssec
