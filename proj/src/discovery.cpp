// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/discovery.hpp"

#include <algorithm>
#include <sstream>

namespace danesd::discovery {

using records::DnsName;
using wire::ConfigItem;
using wire::EntryType;
using wire::SdEntry;
using wire::SdMessage;

std::string to_string(Variant v) {
  switch (v) {
  case Variant::vanilla:
    return "vanilla";
  case Variant::pre_deployed:
    return "pre-deployed";
  case Variant::dnssec:
    return "dnssec";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "vanilla")
    return Variant::vanilla;
  if (s == "pre-deployed" || s == "pre_deployed")
    return Variant::pre_deployed;
  if (s == "dnssec")
    return Variant::dnssec;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(RejectCause c) {
  switch (c) {
  case RejectCause::none:
    return "None";
  case RejectCause::svcb_mismatch:
    return "SvcbMismatch";
  case RejectCause::unauthorized:
    return "Unauthorized";
  case RejectCause::bad_signature:
    return "BadSignature";
  case RejectCause::insecure_tlsa:
    return "InsecureTlsa";
  case RejectCause::stale_nonce:
    return "StaleNonce";
  }
  return "?";
}

std::string to_string(SubPhase p) {
  switch (p) {
  case SubPhase::idle:
    return "Idle";
  case SubPhase::awaiting_offer_and_dns:
    return "AwaitingOfferAndDns";
  case SubPhase::offer_validated:
    return "OfferValidated";
  case SubPhase::subscribe_pending:
    return "SubscribePending";
  case SubPhase::subscribed:
    return "Subscribed";
  }
  return "?";
}

Bytes entry_core_digest(const SdEntry& entry) {
  ByteWriter w;
  w.u8(static_cast<uint8_t>(entry.type));
  w.u16(entry.service_id);
  w.u16(entry.instance_id);
  w.u8(entry.major_version);
  w.u24(entry.ttl);
  w.u32(entry.minor_or_eventgroup);
  return crypto::sha256(w.data());
}

AuthOutcome authorize_client_name(const DnsName& client_name,
                                  const records::ServiceKey& publisher,
                                  const AuthorizationPolicy& policy) {
  AuthOutcome out;
  records::ClientKey key;
  try {
    key = records::parse_client_tlsa_name(client_name, publisher.vehicle);
  } catch (const records::NameError& e) {
    out.reason = e.what();
    return out;
  }
  out.scope = records::scope_kind(key);
  if (!policy.accepted.count(out.scope)) {
    out.reason = "scope " + records::to_string(out.scope) + " not accepted";
    return out;
  }
  if (key.scope) {
    if (key.scope->service_id != publisher.service_id ||
        key.scope->instance_id != publisher.instance_id || key.scope->major != publisher.major) {
      out.reason = "scope fields do not match this publisher";
      return out;
    }
  }
  if (key.domain && key.domain != publisher.domain) {
    out.reason = "domain label does not match this publisher";
    return out;
  }
  out.authorized = true;
  return out;
}

namespace {

struct EntryOptions {
  std::optional<wire::Ipv4EndpointOption> endpoint;
  std::optional<wire::Ipv4MulticastOption> multicast;
  std::vector<ConfigItem> items;
};

EntryOptions collect_options(const SdMessage& msg, const SdEntry& entry) {
  EntryOptions out;
  auto scan = [&](uint8_t index, uint8_t count) {
    for (size_t i = index; i < static_cast<size_t>(index) + count && i < msg.options.size(); ++i) {
      const auto& opt = msg.options[i];
      if (const auto* ep = std::get_if<wire::Ipv4EndpointOption>(&opt)) {
        if (!out.endpoint)
          out.endpoint = *ep;
      } else if (const auto* mc = std::get_if<wire::Ipv4MulticastOption>(&opt)) {
        if (!out.multicast)
          out.multicast = *mc;
      } else if (const auto* cfg = std::get_if<wire::ConfigurationOption>(&opt)) {
        out.items.insert(out.items.end(), cfg->items.begin(), cfg->items.end());
      }
    }
  };
  scan(entry.option_index_1, entry.option_count_1);
  scan(entry.option_index_2, entry.option_count_2);
  return out;
}

std::optional<uint32_t> find_challenge(const EntryOptions& opts) {
  for (const auto& item : opts.items)
    if (item.key == wire::kKeyChallenge)
      if (auto sec = wire::security_from_config_item(item))
        if (const auto* c = std::get_if<wire::Challenge>(&*sec))
          return c->nonce;
  return std::nullopt;
}

std::optional<Bytes> find_response(const EntryOptions& opts) {
  for (const auto& item : opts.items)
    if (item.key == wire::kKeyResponse)
      if (auto sec = wire::security_from_config_item(item))
        if (const auto* r = std::get_if<wire::Response>(&*sec))
          return r->signature;
  return std::nullopt;
}

std::optional<wire::KeyExchange> find_kex(const EntryOptions& opts) {
  for (const auto& item : opts.items)
    if (item.key == wire::kKeyKeyExchange)
      if (auto sec = wire::security_from_config_item(item))
        if (const auto* k = std::get_if<wire::KeyExchange>(&*sec))
          return *k;
  return std::nullopt;
}

std::optional<Bytes> find_session_key(const EntryOptions& opts) {
  for (const auto& item : opts.items)
    if (item.key == wire::kKeySessionKey)
      if (auto sec = wire::security_from_config_item(item))
        if (const auto* s = std::get_if<wire::SessionKey>(&*sec))
          return s->ciphertext;
  return std::nullopt;
}

std::optional<std::string> find_client_name(const EntryOptions& opts) {
  for (const auto& item : opts.items)
    if (item.key == wire::kKeyClientName)
      return item.value;
  return std::nullopt;
}

std::vector<crypto::Certificate> certificates_from_tlsa_rdatas(
    const std::vector<std::string>& rdatas) {
  std::vector<crypto::Certificate> certs;
  for (const auto& rdata : rdatas) {
    try {
      records::TlsaParams tlsa = records::tlsa_from_presentation(rdata);
      if (tlsa.usage == 3 && tlsa.selector == 0 && tlsa.matching == 0)
        certs.push_back(crypto::certificate_from_der(tlsa.association_data));
    } catch (const std::exception&) {
      // Digest-only or malformed associations cannot yield a verification key.
    }
  }
  return certs;
}

bool verify_with_any(const std::vector<crypto::Certificate>& certs, uint32_t nonce,
                     std::span<const uint8_t> context, std::span<const uint8_t> signature) {
  for (const auto& cert : certs)
    if (crypto::verify_nonce(cert, nonce, context, signature))
      return true;
  return false;
}

Action rejected(RejectCause cause, std::string detail) {
  return LogEvent{LogKind::rejected, cause, std::move(detail)};
}

Action info(std::string detail) {
  return LogEvent{LogKind::info, RejectCause::none, std::move(detail)};
}

} // namespace

// ---------------------------------------------------------------- subscriber

SubscriberFsm::SubscriberFsm(SubscriberConfig config, uint64_t rng_seed)
    : config_(std::move(config)), rng_(rng_seed) {}

DnsName SubscriberFsm::own_name() const {
  return records::client_tlsa_name(config_.client);
}

SdMessage SubscriberFsm::base_message() {
  SdMessage msg;
  msg.header.client_id = config_.client.client_id;
  msg.header.session_id = session_counter_++;
  return msg;
}

Actions SubscriberFsm::step(const Event& event, VirtualTime now) {
  if (const auto* ev = std::get_if<EvStart>(&event)) {
    (void)ev;
    return on_start(now);
  }
  if (const auto* ev = std::get_if<EvTimer>(&event))
    return on_timer(*ev, now);
  if (const auto* ev = std::get_if<EvMessage>(&event))
    return on_message(*ev, now);
  if (const auto* ev = std::get_if<EvDnsResult>(&event))
    return on_dns(*ev, now);
  return {info("event ignored in phase " + to_string(phase_))};
}

Actions SubscriberFsm::on_start(VirtualTime) {
  Actions out;
  if (phase_ != SubPhase::idle)
    return {info("start ignored: already running")};
  phase_ = SubPhase::awaiting_offer_and_dns;
  out.push_back(StartTimer{TimerKind::initial,
                           rng_.uniform_delay(config_.timing.initial_delay_min,
                                              config_.timing.initial_delay_max),
                           ++timer_generation_});
  if (config_.variant == Variant::dnssec) {
    out.push_back(DnsQuery{records::publisher_service_name(config_.service), dnssec::RrType::svcb,
                           QueryPurpose::publisher_svcb, 0});
    if (config_.expected_service_port) {
      request_publisher_tlsa(*config_.expected_service_port, out);
    }
  }
  return out;
}

void SubscriberFsm::request_publisher_tlsa(uint16_t port, Actions& out) {
  if (tlsa_requested_)
    return;
  tlsa_requested_ = true;
  out.push_back(DnsQuery{records::publisher_tlsa_name(config_.service, port),
                         dnssec::RrType::tlsa, QueryPurpose::publisher_tlsa, 0});
}

Actions SubscriberFsm::on_timer(const EvTimer& timer, VirtualTime) {
  Actions out;
  if (timer.generation != timer_generation_)
    return out; // superseded
  if (phase_ != SubPhase::awaiting_offer_and_dns)
    return out; // find cycle only drives initial discovery

  SdMessage msg = base_message();
  SdEntry find;
  find.type = EntryType::find;
  find.service_id = config_.service.service_id;
  find.instance_id = config_.service.instance_id;
  find.major_version = config_.service.major;
  find.ttl = 3;
  find.minor_or_eventgroup = config_.service.minor;
  msg.entries.push_back(find);
  out.push_back(SendMessage{std::move(msg), {}, true});

  if (timer.kind == TimerKind::initial)
    find_repetition_ = 0;
  if (find_repetition_ < config_.timing.max_repetitions) {
    VirtualTime delay = config_.timing.repetition_base_delay << find_repetition_;
    ++find_repetition_;
    out.push_back(StartTimer{TimerKind::repetition, delay, ++timer_generation_});
  }
  return out;
}

Actions SubscriberFsm::on_message(const EvMessage& ev, VirtualTime) {
  Actions out;
  for (const auto& entry : ev.msg.entries) {
    if (entry.service_id != config_.service.service_id ||
        entry.instance_id != config_.service.instance_id ||
        entry.major_version != config_.service.major)
      continue;
    switch (entry.type) {
    case EntryType::offer:
      if (entry.is_stop())
        handle_stop_offer(entry, ev.msg, out);
      else
        handle_offer(entry, ev.msg, ev.source, out);
      break;
    case EntryType::subscribe_ack:
      handle_ack(entry, ev.msg, out);
      break;
    default:
      break;
    }
  }
  return out;
}

void SubscriberFsm::handle_offer(const SdEntry& entry, const SdMessage& msg, Endpoint source,
                                 Actions& out) {
  if (phase_ == SubPhase::idle)
    return;
  EntryOptions opts = collect_options(msg, entry);
  if (!opts.endpoint) {
    out.push_back(info("offer without endpoint option ignored"));
    return;
  }
  (void)source;

  Endpoint offered{opts.endpoint->addr, opts.endpoint->port, opts.endpoint->ip_proto};

  if (config_.variant == Variant::vanilla) {
    validated_endpoint_ = offered;
    send_subscribe(out);
    return;
  }
  if (config_.variant == Variant::pre_deployed) {
    validated_endpoint_ = offered;
    offer_nonce_ = find_challenge(opts);
    send_subscribe(out);
    return;
  }

  // Only the latest unvalidated offer is kept.
  PendingOffer pending;
  pending.info = records::OfferInfo{opts.endpoint->addr, opts.endpoint->port,
                                    opts.endpoint->ip_proto, entry.instance_id,
                                    entry.major_version, entry.minor_or_eventgroup};
  pending.endpoint = offered;
  pending.challenge = find_challenge(opts);
  pending.entry = entry;
  pending_offer_ = std::move(pending);
  try_validate_offer(out);
}

void SubscriberFsm::try_validate_offer(Actions& out) {
  if (!pending_offer_)
    return;
  if (svcb_failed_) {
    if (config_.mode == SecurityMode::secure) {
      out.push_back(rejected(RejectCause::insecure_tlsa,
                             "svcb not secure; offers cannot be validated"));
      pending_offer_.reset();
      return;
    }
    // Insecure fallback: trust the offer endpoint as-is.
    validated_endpoint_ = pending_offer_->endpoint;
    offer_nonce_ = pending_offer_->challenge;
    pending_offer_.reset();
    send_subscribe(out);
    return;
  }
  if (!svcb_records_)
    return; // resolution still in flight

  auto matched = records::match_offer_against_svcb(pending_offer_->info, *svcb_records_);
  if (!matched) {
    out.push_back(rejected(RejectCause::svcb_mismatch,
                           "offer endpoint " + to_string(pending_offer_->endpoint) +
                               " does not match any secure svcb record"));
    pending_offer_.reset();
    return;
  }
  validated_endpoint_ = pending_offer_->endpoint;
  offer_nonce_ = pending_offer_->challenge;
  pending_offer_.reset();
  if (phase_ == SubPhase::awaiting_offer_and_dns)
    phase_ = SubPhase::offer_validated;
  request_publisher_tlsa(matched->port, out);
  if (security_ready())
    send_subscribe(out);
}

bool SubscriberFsm::security_ready() const {
  switch (config_.variant) {
  case Variant::vanilla:
    return true;
  case Variant::pre_deployed:
    return config_.pinned_publisher_cert.has_value();
  case Variant::dnssec:
    return !publisher_certs_.empty() ||
        (config_.mode == SecurityMode::insecure_permitted && tlsa_insecure_);
  }
  return false;
}

void SubscriberFsm::send_subscribe(Actions& out) {
  if (!validated_endpoint_)
    return;
  if (config_.variant == Variant::dnssec && !security_ready())
    return; // wait for the parallel TLSA answer

  SdMessage msg = base_message();
  SdEntry entry;
  entry.type = EntryType::subscribe;
  entry.service_id = config_.service.service_id;
  entry.instance_id = config_.service.instance_id;
  entry.major_version = config_.service.major;
  entry.ttl = config_.subscribe_ttl;
  entry.minor_or_eventgroup = config_.eventgroup;

  msg.options.push_back(wire::Ipv4EndpointOption{config_.local_endpoint.addr,
                                                 config_.local_endpoint.proto,
                                                 config_.local_endpoint.port});
  uint8_t option_count = 1;

  bool secure_handshake = config_.variant != Variant::vanilla &&
      !(config_.variant == Variant::dnssec && publisher_certs_.empty());
  if (secure_handshake && offer_nonce_) {
    wire::ConfigurationOption cfg;
    Bytes context = crypto::nonce_context(own_name(), entry_core_digest(entry));
    cfg.items.push_back(wire::to_config_item(
        wire::Response{crypto::sign_nonce(config_.key, *offer_nonce_, context)}));
    my_nonce_ = rng_.nonce();
    cfg.items.push_back(wire::to_config_item(wire::Challenge{*my_nonce_}));
    ka_keys_ = crypto::ka_generate(config_.ka_group);
    cfg.items.push_back(wire::to_config_item(wire::KeyExchange{
        static_cast<uint16_t>(config_.ka_group), ka_keys_->public_share}));
    cfg.items.push_back(ConfigItem{wire::kKeyClientName, own_name()});
    msg.options.push_back(std::move(cfg));
    ++option_count;
  }
  entry.option_index_1 = 0;
  entry.option_count_1 = option_count;
  msg.entries.push_back(entry);

  out.push_back(SendMessage{std::move(msg), *validated_endpoint_, false});
  if (phase_ != SubPhase::subscribed)
    phase_ = SubPhase::subscribe_pending;
}

void SubscriberFsm::handle_ack(const SdEntry& entry, const SdMessage& msg, Actions& out) {
  if (phase_ != SubPhase::subscribe_pending && phase_ != SubPhase::subscribed) {
    out.push_back(info("ack ignored in phase " + to_string(phase_)));
    return;
  }
  EntryOptions opts = collect_options(msg, entry);
  auto response = find_response(opts);
  auto kex = find_kex(opts);
  auto skey = find_session_key(opts);

  if (config_.variant == Variant::vanilla) {
    bool first = phase_ != SubPhase::subscribed;
    phase_ = SubPhase::subscribed;
    if (first)
      out.push_back(LogEvent{LogKind::subscribed, RejectCause::none, "plain ack"});
    return;
  }

  // Rekey path: a bare session-key refresh authenticated by the AEAD under
  // the established pairwise key.
  if (!response && skey && phase_ == SubPhase::subscribed && session_key_) {
    try {
      group_key_ = crypto::unwrap_group_key(*session_key_, *skey);
      out.push_back(info("group key epoch " + std::to_string(group_key_->epoch)));
    } catch (const crypto::CryptoError&) {
      out.push_back(rejected(RejectCause::bad_signature, "rekey failed authentication"));
    }
    return;
  }

  if (!response) {
    if (config_.mode == SecurityMode::insecure_permitted &&
        (config_.variant == Variant::dnssec && tlsa_insecure_)) {
      bool first = phase_ != SubPhase::subscribed;
      phase_ = SubPhase::subscribed;
      if (first)
        out.push_back(LogEvent{LogKind::insecure_ack, RejectCause::none, "insecure ack accepted"});
      return;
    }
    out.push_back(rejected(RejectCause::bad_signature, "ack without authentication response"));
    return;
  }
  if (!my_nonce_) {
    out.push_back(rejected(RejectCause::stale_nonce, "no outstanding challenge for this ack"));
    return;
  }

  std::vector<crypto::Certificate> certs;
  if (config_.variant == Variant::pre_deployed) {
    if (config_.pinned_publisher_cert)
      certs.push_back(*config_.pinned_publisher_cert);
  } else {
    certs = publisher_certs_;
  }
  uint16_t port = validated_endpoint_ ? validated_endpoint_->port : 0;
  DnsName publisher_name = records::publisher_tlsa_name(config_.service, port ? port : 1);
  Bytes context = crypto::nonce_context(publisher_name, entry_core_digest(entry));
  if (certs.empty() || !verify_with_any(certs, *my_nonce_, context, *response)) {
    out.push_back(rejected(RejectCause::bad_signature,
                           "ack response failed verification against the publisher tlsa"));
    return;
  }

  if (kex && ka_keys_) {
    try {
      Bytes shared = crypto::ka_shared(*ka_keys_, static_cast<crypto::KaGroup>(kex->group_id),
                                       kex->public_share);
      crypto::Transcript transcript{own_name(), publisher_name, *my_nonce_,
                                    offer_nonce_.value_or(0)};
      session_key_ = crypto::derive_session_key(shared, transcript);
      if (skey)
        group_key_ = crypto::unwrap_group_key(*session_key_, *skey);
    } catch (const crypto::CryptoError& e) {
      out.push_back(rejected(RejectCause::bad_signature,
                             std::string("session establishment failed: ") + e.what()));
      return;
    }
  }

  bool first = phase_ != SubPhase::subscribed;
  phase_ = SubPhase::subscribed;
  if (first) {
    out.push_back(LogEvent{LogKind::subscribed, RejectCause::none, "authenticated ack"});
    if (session_key_)
      out.push_back(EstablishSession{group_key_ ? group_key_->key_id : 0,
                                     group_key_ ? group_key_->epoch : 0});
  }
}

void SubscriberFsm::handle_stop_offer(const SdEntry& entry, const SdMessage& msg, Actions& out) {
  if (phase_ == SubPhase::idle)
    return;
  EntryOptions opts = collect_options(msg, entry);

  if (config_.variant == Variant::vanilla) {
    phase_ = SubPhase::awaiting_offer_and_dns;
    session_key_.reset();
    group_key_.reset();
    out.push_back(LogEvent{LogKind::stopped, RejectCause::none, "offer withdrawn"});
    return;
  }

  auto nonce = find_challenge(opts);
  auto response = find_response(opts);
  std::vector<crypto::Certificate> certs = config_.variant == Variant::pre_deployed
      ? (config_.pinned_publisher_cert
             ? std::vector<crypto::Certificate>{*config_.pinned_publisher_cert}
             : std::vector<crypto::Certificate>{})
      : publisher_certs_;

  if (!nonce || !response || certs.empty()) {
    out.push_back(rejected(RejectCause::bad_signature, "unauthenticated stop offer ignored"));
    return;
  }
  if (seen_stop_nonces_.count(*nonce)) {
    out.push_back(rejected(RejectCause::stale_nonce, "stop offer nonce replayed"));
    return;
  }
  uint16_t port = validated_endpoint_ ? validated_endpoint_->port : 1;
  DnsName publisher_name = records::publisher_tlsa_name(config_.service, port);
  Bytes context = crypto::nonce_context(publisher_name, entry_core_digest(entry));
  if (!verify_with_any(certs, *nonce, context, *response)) {
    out.push_back(rejected(RejectCause::bad_signature, "stop offer signature invalid"));
    return;
  }
  seen_stop_nonces_.insert(*nonce);
  phase_ = SubPhase::awaiting_offer_and_dns;
  validated_endpoint_.reset();
  session_key_.reset();
  group_key_.reset();
  out.push_back(LogEvent{LogKind::stopped, RejectCause::none, "authenticated stop offer"});
}

Actions SubscriberFsm::on_dns(const EvDnsResult& ev, VirtualTime) {
  Actions out;
  if (ev.purpose == QueryPurpose::publisher_svcb) {
    if (ev.result.rcode == dnssec::Rcode::ok &&
        ev.result.status == dnssec::ValidationStatus::secure) {
      std::vector<records::SvcbParams> parsed;
      for (const auto& rdata : ev.result.rdatas) {
        try {
          parsed.push_back(records::svcb_from_presentation(rdata));
        } catch (const std::exception&) {
        }
      }
      svcb_records_ = std::move(parsed);
      svcb_failed_ = svcb_records_->empty();
    } else {
      svcb_failed_ = true;
      out.push_back(info("svcb resolution not secure: " + to_string(ev.result.status)));
    }
    try_validate_offer(out);
  } else if (ev.purpose == QueryPurpose::publisher_tlsa) {
    if (ev.result.rcode == dnssec::Rcode::ok &&
        ev.result.status == dnssec::ValidationStatus::secure) {
      publisher_certs_ = certificates_from_tlsa_rdatas(ev.result.rdatas);
      tlsa_insecure_ = publisher_certs_.empty();
    } else {
      tlsa_insecure_ = true;
      out.push_back(info("publisher tlsa not secure: " + to_string(ev.result.status)));
    }
    if (phase_ == SubPhase::offer_validated && security_ready())
      send_subscribe(out);
  }
  return out;
}

std::string SubscriberFsm::state_fingerprint() const {
  std::ostringstream os;
  os << to_string(phase_) << "|" << (pending_offer_ ? 1 : 0) << "|" << (svcb_records_ ? 1 : 0)
     << svcb_failed_ << "|" << publisher_certs_.size() << tlsa_insecure_ << "|"
     << (validated_endpoint_ ? to_string(*validated_endpoint_) : "-") << "|"
     << (offer_nonce_ ? *offer_nonce_ : 0) << "|" << (my_nonce_ ? *my_nonce_ : 0) << "|"
     << (session_key_ ? 1 : 0) << (group_key_ ? group_key_->epoch : 0);
  return os.str();
}

// ---------------------------------------------------------------- publisher

PublisherFsm::PublisherFsm(PublisherConfig config, uint64_t rng_seed)
    : config_(std::move(config)), rng_(rng_seed) {
  group_key_id_ = static_cast<uint32_t>(config_.service.service_id) << 16 |
      config_.service.instance_id;
}

DnsName PublisherFsm::own_tlsa_name() const {
  return records::publisher_tlsa_name(config_.service, config_.endpoint.port);
}

SdMessage PublisherFsm::base_message() {
  SdMessage msg;
  msg.header.client_id = 0;
  msg.header.session_id = session_counter_++;
  return msg;
}

uint32_t PublisherFsm::issue_nonce(VirtualTime now) {
  uint32_t nonce = rng_.nonce();
  issued_nonces_.emplace_back(nonce, now + config_.timing.cyclic_offer_delay);
  while (issued_nonces_.size() > config_.max_live_nonces)
    issued_nonces_.pop_front();
  return nonce;
}

bool PublisherFsm::nonce_live(uint32_t nonce, VirtualTime now) const {
  for (const auto& [n, expires] : issued_nonces_)
    if (n == nonce && now < expires)
      return true;
  return false;
}

bool PublisherFsm::nonce_known(uint32_t nonce) const {
  for (const auto& [n, _] : issued_nonces_)
    if (n == nonce)
      return true;
  return false;
}

Actions PublisherFsm::step(const Event& event, VirtualTime now) {
  if (std::get_if<EvStart>(&event))
    return on_start(now);
  if (const auto* ev = std::get_if<EvTimer>(&event))
    return on_timer(*ev, now);
  if (const auto* ev = std::get_if<EvMessage>(&event))
    return on_message(*ev, now);
  if (const auto* ev = std::get_if<EvDnsResult>(&event))
    return on_dns(*ev, now);
  if (std::get_if<EvStopService>(&event))
    return on_stop(now);
  if (std::get_if<EvRekey>(&event))
    return on_rekey(now);
  return {};
}

Actions PublisherFsm::on_start(VirtualTime) {
  if (started_)
    return {info("start ignored: already offering")};
  started_ = true;
  Actions out;
  out.push_back(StartTimer{TimerKind::initial,
                           rng_.uniform_delay(config_.timing.initial_delay_min,
                                              config_.timing.initial_delay_max),
                           ++timer_generation_});
  return out;
}

void PublisherFsm::send_offer(bool multicast, Endpoint dest, VirtualTime now, Actions& out) {
  SdMessage msg = base_message();
  SdEntry entry;
  entry.type = EntryType::offer;
  entry.service_id = config_.service.service_id;
  entry.instance_id = config_.service.instance_id;
  entry.major_version = config_.service.major;
  entry.ttl = config_.offer_ttl;
  entry.minor_or_eventgroup = config_.service.minor;

  msg.options.push_back(wire::Ipv4EndpointOption{config_.endpoint.addr, config_.endpoint.proto,
                                                 config_.endpoint.port});
  uint8_t option_count = 1;
  if (config_.variant != Variant::vanilla) {
    wire::ConfigurationOption cfg;
    cfg.items.push_back(wire::to_config_item(wire::Challenge{issue_nonce(now)}));
    msg.options.push_back(std::move(cfg));
    ++option_count;
  }
  entry.option_index_1 = 0;
  entry.option_count_1 = option_count;
  msg.entries.push_back(entry);
  out.push_back(SendMessage{std::move(msg), dest, multicast});
}

Actions PublisherFsm::on_timer(const EvTimer& timer, VirtualTime now) {
  Actions out;
  if (timer.generation != timer_generation_ || stopped_)
    return out;
  send_offer(true, {}, now, out);
  if (timer.kind == TimerKind::initial)
    offer_repetition_ = 0;
  if (offer_repetition_ < config_.timing.max_repetitions) {
    VirtualTime delay = config_.timing.repetition_base_delay << offer_repetition_;
    ++offer_repetition_;
    out.push_back(StartTimer{TimerKind::repetition, delay, ++timer_generation_});
  } else {
    out.push_back(
        StartTimer{TimerKind::cyclic_offer, config_.timing.cyclic_offer_delay, ++timer_generation_});
  }
  return out;
}

Actions PublisherFsm::on_message(const EvMessage& ev, VirtualTime now) {
  Actions out;
  if (stopped_ || !started_)
    return out;
  for (const auto& entry : ev.msg.entries) {
    if (entry.service_id != config_.service.service_id ||
        entry.instance_id != config_.service.instance_id ||
        entry.major_version != config_.service.major)
      continue;
    switch (entry.type) {
    case EntryType::find:
      send_offer(false, ev.source, now, out);
      break;
    case EntryType::subscribe:
      if (entry.is_stop())
        handle_stop_subscribe(entry, ev.msg, out);
      else
        handle_subscribe(entry, ev.msg, ev.source, now, out);
      break;
    default:
      break;
    }
  }
  return out;
}

void PublisherFsm::handle_subscribe(const SdEntry& entry, const SdMessage& msg, Endpoint source,
                                    VirtualTime now, Actions& out) {
  EntryOptions opts = collect_options(msg, entry);

  if (config_.variant == Variant::vanilla) {
    Subscription sub;
    sub.client_id = msg.header.client_id;
    sub.endpoint = source;
    subscriptions_[sub.client_id] = sub;
    PendingSubscribe pending;
    pending.client_id = msg.header.client_id;
    pending.reply_to = source;
    pending.entry = entry;
    out.push_back(SendMessage{build_ack(pending, true), source, false});
    out.push_back(LogEvent{LogKind::acked, RejectCause::none, "plain subscription"});
    return;
  }

  auto response = find_response(opts);
  auto client_nonce = find_challenge(opts);
  auto kex = find_kex(opts);
  auto cname = find_client_name(opts);

  if (!response || !client_nonce || !kex || !cname) {
    if (config_.mode == SecurityMode::insecure_permitted) {
      PendingSubscribe pending;
      pending.client_id = msg.header.client_id;
      pending.reply_to = source;
      pending.entry = entry;
      finish_subscribe(std::move(pending), nullptr, true, out);
    } else {
      out.push_back(rejected(RejectCause::bad_signature,
                             "subscribe lacks authentication options"));
    }
    return;
  }

  AuthOutcome auth = authorize_client_name(*cname, config_.service, config_.policy);
  if (!auth.authorized) {
    out.push_back(rejected(RejectCause::unauthorized, *cname + ": " + auth.reason));
    return;
  }

  PendingSubscribe pending;
  pending.client_id = msg.header.client_id;
  pending.client_name = *cname;
  pending.reply_to = source;
  pending.client_nonce = *client_nonce;
  pending.response_signature = *response;
  pending.entry_digest = entry_core_digest(entry);
  pending.ka_group = static_cast<crypto::KaGroup>(kex->group_id);
  pending.ka_share = kex->public_share;
  pending.entry = entry;
  pending.arrived_at = now;

  if (config_.variant == Variant::pre_deployed) {
    auto it = config_.pinned_client_certs.find(pending.client_id);
    if (it == config_.pinned_client_certs.end()) {
      out.push_back(rejected(RejectCause::insecure_tlsa,
                             "no pre-deployed certificate for client " +
                                 std::to_string(pending.client_id)));
      return;
    }
    std::vector<crypto::Certificate> certs{it->second};
    const crypto::Certificate* matched = nullptr;
    if (verify_response(pending, certs, &matched, now, out))
      finish_subscribe(std::move(pending), matched, false, out);
    return;
  }

  // Latest subscribe per client wins while the certificate is in flight.
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (it->client_id == pending.client_id)
      it = pending_.erase(it);
    else
      ++it;
  }
  pending_.push_back(std::move(pending));
  while (pending_.size() > config_.max_pending_subscribes)
    pending_.pop_front();
  out.push_back(DnsQuery{pending_.back().client_name, dnssec::RrType::tlsa,
                         QueryPurpose::client_tlsa, pending_.back().client_id});
}

Actions PublisherFsm::on_dns(const EvDnsResult& ev, VirtualTime now) {
  Actions out;
  if (ev.purpose != QueryPurpose::client_tlsa)
    return out;
  auto it = std::find_if(pending_.begin(), pending_.end(), [&](const PendingSubscribe& p) {
    return p.client_id == ev.pending_client && p.client_name == ev.name;
  });
  if (it == pending_.end())
    return out; // evicted or already answered
  PendingSubscribe pending = std::move(*it);
  pending_.erase(it);
  (void)now;

  if (ev.result.rcode != dnssec::Rcode::ok ||
      ev.result.status != dnssec::ValidationStatus::secure) {
    if (config_.mode == SecurityMode::insecure_permitted) {
      finish_subscribe(std::move(pending), nullptr, true, out);
    } else {
      out.push_back(rejected(RejectCause::insecure_tlsa,
                             pending.client_name + ": tlsa " + to_string(ev.result.status) +
                                 "/" + to_string(ev.result.rcode)));
    }
    return out;
  }
  std::vector<crypto::Certificate> certs = certificates_from_tlsa_rdatas(ev.result.rdatas);
  if (certs.empty()) {
    out.push_back(rejected(RejectCause::insecure_tlsa,
                           pending.client_name + ": tlsa carries no usable certificate"));
    return out;
  }
  const crypto::Certificate* matched = nullptr;
  if (verify_response(pending, certs, &matched, now, out))
    finish_subscribe(std::move(pending), matched, false, out);
  return out;
}

// Which of our live challenges did the client answer? Sets answered_nonce
// on success; emits the reject cause otherwise.
bool PublisherFsm::verify_response(PendingSubscribe& pending,
                                   const std::vector<crypto::Certificate>& certs,
                                   const crypto::Certificate** matched, VirtualTime now,
                                   Actions& out) {
  Bytes context = crypto::nonce_context(pending.client_name, pending.entry_digest);
  for (const auto& cert : certs) {
    for (const auto& [nonce, expires] : issued_nonces_) {
      if (!crypto::verify_nonce(cert, nonce, context, pending.response_signature))
        continue;
      if (now >= expires || answered_.count({pending.client_id, nonce})) {
        out.push_back(rejected(RejectCause::stale_nonce,
                               pending.client_name + ": challenge expired or already answered"));
        return false;
      }
      pending.answered_nonce = nonce;
      *matched = &cert;
      return true;
    }
  }
  out.push_back(rejected(RejectCause::bad_signature,
                         pending.client_name + ": response matches no live challenge"));
  return false;
}

wire::SdMessage PublisherFsm::build_ack(const PendingSubscribe& pending, bool insecure) {
  SdMessage msg = base_message();
  SdEntry entry;
  entry.type = EntryType::subscribe_ack;
  entry.service_id = config_.service.service_id;
  entry.instance_id = config_.service.instance_id;
  entry.major_version = config_.service.major;
  entry.ttl = pending.entry.ttl;
  entry.minor_or_eventgroup = pending.entry.minor_or_eventgroup;

  uint8_t option_count = 0;
  if (config_.multicast_endpoint) {
    msg.options.push_back(wire::Ipv4MulticastOption{config_.multicast_endpoint->addr,
                                                    config_.multicast_endpoint->proto,
                                                    config_.multicast_endpoint->port});
    ++option_count;
  }
  if (!insecure) {
    wire::ConfigurationOption cfg;
    Bytes context = crypto::nonce_context(own_tlsa_name(), entry_core_digest(entry));
    cfg.items.push_back(wire::to_config_item(
        wire::Response{crypto::sign_nonce(config_.key, pending.client_nonce, context)}));
    crypto::KaKeys ka = crypto::ka_generate(pending.ka_group);
    cfg.items.push_back(wire::to_config_item(
        wire::KeyExchange{static_cast<uint16_t>(ka.group), ka.public_share}));
    Bytes shared = crypto::ka_shared(ka, pending.ka_group, pending.ka_share);
    crypto::Transcript transcript{pending.client_name, own_tlsa_name(), pending.client_nonce,
                                  pending.answered_nonce};
    crypto::SessionKeyMaterial derived = crypto::derive_session_key(shared, transcript);
    session_keys_[pending.client_id] = derived;
    if (config_.multicast_endpoint) {
      if (!group_key_)
        group_key_ = crypto::make_group_key(group_key_id_, 1);
      cfg.items.push_back(
          wire::to_config_item(wire::SessionKey{crypto::wrap_group_key(derived, *group_key_)}));
    }
    msg.options.push_back(std::move(cfg));
    ++option_count;
  }
  entry.option_index_1 = 0;
  entry.option_count_1 = option_count;
  msg.entries.push_back(entry);
  return msg;
}

void PublisherFsm::finish_subscribe(PendingSubscribe pending,
                                    const crypto::Certificate* client_cert, bool insecure,
                                    Actions& out) {
  if (!insecure)
    answered_.insert({pending.client_id, pending.answered_nonce});

  Subscription sub;
  sub.client_id = pending.client_id;
  sub.client_name = pending.client_name;
  sub.endpoint = pending.reply_to;
  sub.insecure = insecure;
  if (client_cert)
    client_certs_[pending.client_id] = *client_cert;
  subscriptions_[sub.client_id] = sub;

  out.push_back(SendMessage{build_ack(pending, insecure), pending.reply_to, false});
  out.push_back(insecure
                    ? LogEvent{LogKind::insecure_ack, RejectCause::none,
                               "acknowledged without authentication"}
                    : LogEvent{LogKind::acked, RejectCause::none,
                               pending.client_name + " authorized and verified"});
}

void PublisherFsm::handle_stop_subscribe(const SdEntry& entry, const SdMessage& msg, Actions& out) {
  uint16_t client_id = msg.header.client_id;
  auto it = subscriptions_.find(client_id);
  if (it == subscriptions_.end())
    return;

  if (config_.variant == Variant::vanilla) {
    subscriptions_.erase(it);
    out.push_back(LogEvent{LogKind::stopped, RejectCause::none, "subscription withdrawn"});
    return;
  }

  EntryOptions opts = collect_options(msg, entry);
  auto nonce = find_challenge(opts);
  auto response = find_response(opts);
  auto cert = client_certs_.find(client_id);
  if (!nonce || !response || cert == client_certs_.end()) {
    out.push_back(rejected(RejectCause::bad_signature,
                           "unauthenticated stop subscribe ignored; subscription persists"));
    return;
  }
  if (seen_stop_nonces_.count(*nonce)) {
    out.push_back(rejected(RejectCause::stale_nonce, "stop subscribe nonce replayed"));
    return;
  }
  Bytes context = crypto::nonce_context(it->second.client_name, entry_core_digest(entry));
  if (!crypto::verify_nonce(cert->second, *nonce, context, *response)) {
    out.push_back(rejected(RejectCause::bad_signature,
                           "stop subscribe signature invalid; subscription persists"));
    return;
  }
  seen_stop_nonces_.insert(*nonce);
  session_keys_.erase(client_id);
  subscriptions_.erase(it);
  out.push_back(LogEvent{LogKind::stopped, RejectCause::none, "authenticated stop subscribe"});
}

Actions PublisherFsm::on_stop(VirtualTime) {
  Actions out;
  if (stopped_)
    return out;
  stopped_ = true;

  SdMessage msg = base_message();
  SdEntry entry;
  entry.type = EntryType::offer;
  entry.service_id = config_.service.service_id;
  entry.instance_id = config_.service.instance_id;
  entry.major_version = config_.service.major;
  entry.ttl = 0; // StopOffer
  entry.minor_or_eventgroup = config_.service.minor;

  if (config_.variant != Variant::vanilla) {
    wire::ConfigurationOption cfg;
    uint32_t nonce = rng_.nonce();
    Bytes context = crypto::nonce_context(own_tlsa_name(), entry_core_digest(entry));
    cfg.items.push_back(wire::to_config_item(wire::Challenge{nonce}));
    cfg.items.push_back(
        wire::to_config_item(wire::Response{crypto::sign_nonce(config_.key, nonce, context)}));
    msg.options.push_back(std::move(cfg));
    entry.option_index_1 = 0;
    entry.option_count_1 = 1;
  }
  msg.entries.push_back(entry);
  out.push_back(SendMessage{std::move(msg), {}, true});
  out.push_back(LogEvent{LogKind::stopped, RejectCause::none, "service withdrawn"});
  return out;
}

Actions PublisherFsm::on_rekey(VirtualTime) {
  Actions out;
  if (!group_key_) {
    out.push_back(info("rekey ignored: no group key issued yet"));
    return out;
  }
  group_key_ = crypto::make_group_key(group_key_id_, group_key_->epoch + 1);
  for (const auto& [client_id, sub] : subscriptions_) {
    if (sub.insecure)
      continue;
    auto session = session_keys_.find(client_id);
    if (session == session_keys_.end())
      continue;
    SdMessage msg = base_message();
    SdEntry entry;
    entry.type = EntryType::subscribe_ack;
    entry.service_id = config_.service.service_id;
    entry.instance_id = config_.service.instance_id;
    entry.major_version = config_.service.major;
    entry.ttl = config_.offer_ttl;
    entry.minor_or_eventgroup = 1;
    wire::ConfigurationOption cfg;
    cfg.items.push_back(wire::to_config_item(
        wire::SessionKey{crypto::wrap_group_key(session->second, *group_key_)}));
    msg.options.push_back(std::move(cfg));
    entry.option_index_1 = 0;
    entry.option_count_1 = 1;
    msg.entries.push_back(entry);
    out.push_back(SendMessage{std::move(msg), sub.endpoint, false});
  }
  out.push_back(info("group key rotated to epoch " + std::to_string(group_key_->epoch)));
  return out;
}

std::string PublisherFsm::state_fingerprint() const {
  std::ostringstream os;
  os << started_ << stopped_ << "|" << issued_nonces_.size() << "|" << answered_.size() << "|"
     << pending_.size() << "|";
  for (const auto& [id, sub] : subscriptions_)
    os << id << (sub.insecure ? "i" : "s") << ",";
  os << "|" << (group_key_ ? group_key_->epoch : 0);
  return os.str();
}

} // namespace danesd::discovery
