// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/crypto.hpp"
#include "danesd/records.hpp"
#include "danesd/resolver.hpp"
#include "danesd/time.hpp"
#include "danesd/wire.hpp"

#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace danesd::discovery {

enum class Variant { vanilla, pre_deployed, dnssec };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

enum class SecurityMode { secure, insecure_permitted };

using records::Endpoint;

struct TimingConfig {
  VirtualTime initial_delay_min = 10 * kNsPerMs;
  VirtualTime initial_delay_max = 100 * kNsPerMs;
  int max_repetitions = 3;
  VirtualTime repetition_base_delay = 200 * kNsPerMs;
  VirtualTime cyclic_offer_delay = 2 * kNsPerSec;
};

// Deterministic randomness for delays and nonces; the host seeds each
// endpoint. Production deployments seed from entropy instead.
class RandomSource {
public:
  explicit RandomSource(uint64_t seed) : engine_(seed) {}

  uint32_t nonce() { return static_cast<uint32_t>(engine_()); }
  VirtualTime uniform_delay(VirtualTime lo, VirtualTime hi) {
    return std::uniform_int_distribution<VirtualTime>(lo, hi)(engine_);
  }

private:
  std::mt19937_64 engine_;
};

// ---- events ----

struct EvStart {};

enum class TimerKind { initial, repetition, cyclic_offer };

struct EvTimer {
  TimerKind kind = TimerKind::initial;
  uint64_t generation = 0;
};

struct EvMessage {
  wire::SdMessage msg;
  Endpoint source;
};

enum class QueryPurpose { publisher_svcb, publisher_tlsa, client_tlsa };

struct EvDnsResult {
  QueryPurpose purpose = QueryPurpose::publisher_svcb;
  records::DnsName name;
  dnssec::ResolveResult result;
  uint16_t pending_client = 0; // client_tlsa: whose subscribe is waiting
};

struct EvStopService {}; // publisher: announce StopOffer and cease offering
struct EvRekey {};       // publisher: bump the group key epoch

using Event = std::variant<EvStart, EvTimer, EvMessage, EvDnsResult, EvStopService, EvRekey>;

// ---- actions ----

struct SendMessage {
  wire::SdMessage msg;
  Endpoint dest;      // ignored when multicast
  bool multicast = false;
};

struct DnsQuery {
  records::DnsName name;
  dnssec::RrType type = dnssec::RrType::svcb;
  QueryPurpose purpose = QueryPurpose::publisher_svcb;
  uint16_t pending_client = 0;
};

struct StartTimer {
  TimerKind kind = TimerKind::initial;
  VirtualTime delay = 0;
  uint64_t generation = 0;
};

struct EstablishSession {
  uint32_t group_key_id = 0;
  uint32_t group_epoch = 0;
};

enum class RejectCause {
  none,
  svcb_mismatch,
  unauthorized,
  bad_signature,
  insecure_tlsa,
  stale_nonce,
};

std::string to_string(RejectCause c);

enum class LogKind { rejected, subscribed, acked, insecure_ack, stopped, info };

struct LogEvent {
  LogKind kind = LogKind::info;
  RejectCause cause = RejectCause::none;
  std::string detail;
};

using Action = std::variant<SendMessage, DnsQuery, StartTimer, EstablishSession, LogEvent>;
using Actions = std::vector<Action>;

// ---- authorization ----

struct AuthorizationPolicy {
  std::set<records::ScopeKind> accepted = {records::ScopeKind::service_specific};
};

struct AuthOutcome {
  bool authorized = false;
  records::ScopeKind scope = records::ScopeKind::vehicle_wide;
  std::string reason;
};

// A client name authorizes against a publisher when its scope kind is
// accepted by policy and every scope field present in the name equals the
// publisher's corresponding field.
AuthOutcome authorize_client_name(const records::DnsName& client_name,
                                  const records::ServiceKey& publisher,
                                  const AuthorizationPolicy& policy);

// ---- subscriber ----

enum class SubPhase { idle, awaiting_offer_and_dns, offer_validated, subscribe_pending, subscribed };

std::string to_string(SubPhase p);

struct SubscriberConfig {
  records::ClientKey client;
  records::ServiceKey service;
  uint16_t eventgroup = 1;
  Endpoint local_endpoint;
  // Enables the parallel TLSA query at start; otherwise the query waits for
  // the port from the SVCB answer.
  std::optional<uint16_t> expected_service_port;
  uint32_t subscribe_ttl = 300;
  Variant variant = Variant::dnssec;
  SecurityMode mode = SecurityMode::secure;
  TimingConfig timing;
  crypto::KeyPair key;
  crypto::Certificate cert;
  crypto::KaGroup ka_group = crypto::KaGroup::x25519;
  std::optional<crypto::Certificate> pinned_publisher_cert; // pre_deployed
};

class SubscriberFsm {
public:
  SubscriberFsm(SubscriberConfig config, uint64_t rng_seed);

  Actions step(const Event& event, VirtualTime now);

  SubPhase phase() const { return phase_; }
  const SubscriberConfig& config() const { return config_; }
  const std::optional<crypto::SessionKeyMaterial>& session_key() const { return session_key_; }
  const std::optional<crypto::GroupKey>& group_key() const { return group_key_; }
  std::optional<Endpoint> publisher_endpoint() const { return validated_endpoint_; }

  // Canonical encoding of the protocol-relevant state, for trace enumeration.
  std::string state_fingerprint() const;

private:
  struct PendingOffer {
    records::OfferInfo info;
    Endpoint endpoint;
    std::optional<uint32_t> challenge;
    wire::SdEntry entry;
  };

  Actions on_start(VirtualTime now);
  Actions on_timer(const EvTimer& timer, VirtualTime now);
  Actions on_message(const EvMessage& ev, VirtualTime now);
  Actions on_dns(const EvDnsResult& ev, VirtualTime now);
  void handle_offer(const wire::SdEntry& entry, const wire::SdMessage& msg, Endpoint source,
                    Actions& out);
  void handle_stop_offer(const wire::SdEntry& entry, const wire::SdMessage& msg, Actions& out);
  void handle_ack(const wire::SdEntry& entry, const wire::SdMessage& msg, Actions& out);
  void try_validate_offer(Actions& out);
  void send_subscribe(Actions& out);
  void request_publisher_tlsa(uint16_t port, Actions& out);
  bool security_ready() const;

  wire::SdMessage base_message();
  records::DnsName own_name() const;

  SubscriberConfig config_;
  RandomSource rng_;
  SubPhase phase_ = SubPhase::idle;
  uint64_t timer_generation_ = 0;
  int find_repetition_ = 0;
  uint16_t session_counter_ = 1;

  std::optional<PendingOffer> pending_offer_; // only the latest is kept
  std::optional<std::vector<records::SvcbParams>> svcb_records_; // validated Secure
  bool svcb_failed_ = false;
  std::vector<crypto::Certificate> publisher_certs_; // from the TLSA answer
  bool tlsa_insecure_ = false;
  bool tlsa_requested_ = false;

  std::optional<Endpoint> validated_endpoint_;
  std::optional<uint32_t> offer_nonce_;   // publisher challenge we answered
  std::optional<uint32_t> my_nonce_;      // our challenge to the publisher
  std::optional<crypto::KaKeys> ka_keys_;
  std::optional<crypto::SessionKeyMaterial> session_key_;
  std::optional<crypto::GroupKey> group_key_;
  std::set<uint32_t> seen_stop_nonces_;
};

// ---- publisher ----

enum class ClientPhase { offering, awaiting_client_tlsa, acked };

struct PublisherConfig {
  records::ServiceKey service;
  Endpoint endpoint;
  std::optional<Endpoint> multicast_endpoint;
  uint32_t offer_ttl = 3;
  Variant variant = Variant::dnssec;
  SecurityMode mode = SecurityMode::secure;
  TimingConfig timing;
  AuthorizationPolicy policy;
  crypto::KeyPair key;
  crypto::Certificate cert;
  crypto::KaGroup ka_group = crypto::KaGroup::x25519;
  std::map<uint16_t, crypto::Certificate> pinned_client_certs; // pre_deployed
  size_t max_live_nonces = 64;
  size_t max_pending_subscribes = 256;
};

struct Subscription {
  uint16_t client_id = 0;
  records::DnsName client_name;
  Endpoint endpoint;
  bool insecure = false;
};

class PublisherFsm {
public:
  PublisherFsm(PublisherConfig config, uint64_t rng_seed);

  Actions step(const Event& event, VirtualTime now);

  const PublisherConfig& config() const { return config_; }
  const std::map<uint16_t, Subscription>& subscriptions() const { return subscriptions_; }
  uint32_t group_epoch() const { return group_key_ ? group_key_->epoch : 0; }
  const std::optional<crypto::GroupKey>& group_key() const { return group_key_; }
  bool stopped() const { return stopped_; }
  size_t live_nonce_count() const { return issued_nonces_.size(); }
  size_t pending_subscribe_count() const { return pending_.size(); }

  std::string state_fingerprint() const;

private:
  struct PendingSubscribe {
    uint16_t client_id = 0;
    records::DnsName client_name;
    Endpoint reply_to;
    uint32_t answered_nonce = 0; // our challenge the client signed
    uint32_t client_nonce = 0;   // their challenge we must answer
    Bytes response_signature;
    Bytes entry_digest;
    crypto::KaGroup ka_group = crypto::KaGroup::x25519;
    Bytes ka_share;
    wire::SdEntry entry;
    VirtualTime arrived_at = 0;
  };

  Actions on_start(VirtualTime now);
  Actions on_timer(const EvTimer& timer, VirtualTime now);
  Actions on_message(const EvMessage& ev, VirtualTime now);
  Actions on_dns(const EvDnsResult& ev, VirtualTime now);
  Actions on_stop(VirtualTime now);
  Actions on_rekey(VirtualTime now);

  void handle_subscribe(const wire::SdEntry& entry, const wire::SdMessage& msg, Endpoint source,
                        VirtualTime now, Actions& out);
  void handle_stop_subscribe(const wire::SdEntry& entry, const wire::SdMessage& msg, Actions& out);
  bool verify_response(PendingSubscribe& pending, const std::vector<crypto::Certificate>& certs,
                       const crypto::Certificate** matched, VirtualTime now, Actions& out);
  void finish_subscribe(PendingSubscribe pending, const crypto::Certificate* client_cert,
                        bool insecure, Actions& out);
  void send_offer(bool multicast, Endpoint dest, VirtualTime now, Actions& out);
  wire::SdMessage build_ack(const PendingSubscribe& pending, bool insecure);

  uint32_t issue_nonce(VirtualTime now);
  bool nonce_live(uint32_t nonce, VirtualTime now) const;
  bool nonce_known(uint32_t nonce) const;

  wire::SdMessage base_message();
  records::DnsName own_tlsa_name() const;

  PublisherConfig config_;
  RandomSource rng_;
  bool started_ = false;
  bool stopped_ = false;
  uint64_t timer_generation_ = 0;
  int offer_repetition_ = 0;
  uint16_t session_counter_ = 1;

  // Challenge bookkeeping: live nonces expire one offer cycle after issue,
  // remembered ones distinguish stale responses from forged ones.
  std::deque<std::pair<uint32_t, VirtualTime>> issued_nonces_;
  std::set<std::pair<uint16_t, uint32_t>> answered_;
  std::deque<PendingSubscribe> pending_;
  std::map<uint16_t, Subscription> subscriptions_;
  std::map<uint16_t, crypto::Certificate> client_certs_;
  std::map<uint16_t, crypto::SessionKeyMaterial> session_keys_;
  std::optional<crypto::GroupKey> group_key_;
  uint32_t group_key_id_ = 0;
  std::set<uint32_t> seen_stop_nonces_;
};

// Digest over the semantic entry fields; binds signatures to the action
// they authenticate (type, service, instance, version, ttl, eventgroup).
Bytes entry_core_digest(const wire::SdEntry& entry);

} // namespace danesd::discovery
