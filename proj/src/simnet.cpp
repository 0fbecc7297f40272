// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/simnet.hpp"

#include <algorithm>
#include <chrono>
#include <queue>
#include <sstream>

namespace danesd::simnet {

using discovery::Variant;

const Host* Topology::host(const std::string& name) const {
  for (const auto& h : hosts)
    if (h.name == name)
      return &h;
  return nullptr;
}

const Host* Topology::host_by_addr(const std::array<uint8_t, 4>& addr) const {
  for (const auto& h : hosts)
    if (h.addr == addr)
      return &h;
  return nullptr;
}

int Topology::hops(const std::string& from_host, const std::string& to_host) const {
  const Host* a = host(from_host);
  const Host* b = host(to_host);
  if (!a || !b)
    throw SimError("unknown host in hop computation");
  if (a->name == b->name)
    return 0;
  if (a->attached_switch == b->attached_switch)
    return 2; // host-switch-host
  auto up = [this](const std::string& sw) {
    auto it = uplink.find(sw);
    return it == uplink.end() ? sw : it->second;
  };
  // Through the star core unless one side already sits on it.
  if (up(a->attached_switch) == b->attached_switch || up(b->attached_switch) == a->attached_switch)
    return 3;
  return 4;
}

Topology Topology::ivn_star() {
  Topology t;
  t.switches = {"core", "sw1", "sw2", "sw3", "sw4"};
  t.uplink = {{"sw1", "core"}, {"sw2", "core"}, {"sw3", "core"}, {"sw4", "core"}};
  auto add = [&t](const std::string& name, uint8_t octet, const std::string& sw) {
    t.hosts.push_back({name, {10, 0, 0, octet}, sw});
  };
  add("lidar1", 11, "sw1");
  add("lidar2", 12, "sw2");
  add("lidar3", 13, "sw3");
  add("lidar4", 14, "sw4");
  add("cam1", 21, "sw2");
  add("cam2", 22, "sw3");
  add("zc1", 31, "sw1");
  add("zc2", 32, "sw2");
  add("zc3", 33, "sw3");
  add("zc4", 34, "sw4");
  add("hpc-adas", 41, "core");
  add("hpc-info", 42, "core");
  add("hpc-tele", 43, "core");
  return t;
}

Topology Topology::tiny() {
  Topology t;
  t.switches = {"sw"};
  t.hosts.push_back({"a", {10, 0, 0, 2}, "sw"});
  t.hosts.push_back({"b", {10, 0, 0, 3}, "sw"});
  return t;
}

bool MsgSelector::matches(const wire::SdMessage& msg) const {
  for (const auto& entry : msg.entries) {
    if (entry_type && entry.type != *entry_type)
      continue;
    if (service_id && entry.service_id != *service_id)
      continue;
    if (stop && entry.is_stop() != *stop)
      continue;
    return true;
  }
  return false;
}

namespace {

struct StatAcc {
  size_t count = 0;
  double sum = 0, min = 0, max = 0;
  void add(double v) {
    if (count == 0) {
      min = max = v;
    } else {
      min = std::min(min, v);
      max = std::max(max, v);
    }
    sum += v;
    ++count;
  }
  Stat finish() const {
    return Stat{count, count ? min : 0, count ? sum / static_cast<double>(count) : 0,
                count ? max : 0};
  }
};

struct App {
  size_t id = 0;
  bool is_publisher = false;
  std::string node;
  records::Endpoint endpoint;
  uint16_t service_id = 0; // own service (publisher) or target (subscriber)
  size_t pub_index = SIZE_MAX;
  bool rogue = false;
  int rogue_action = -1;

  std::unique_ptr<discovery::PublisherFsm> pub;
  std::unique_ptr<discovery::SubscriberFsm> sub;

  VirtualTime first_offer_at = -1;
  VirtualTime first_subscribe_at = -1;
  VirtualTime subscribed_at = -1;
  double wall_ms = 0;
};

struct QueuedEvent {
  VirtualTime at = 0;
  uint64_t seq = 0;
  size_t app_id = 0;
  discovery::Event event;
  int taint = -1;
};

struct EventOrder {
  bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
    return std::tie(a.at, a.seq) > std::tie(b.at, b.seq);
  }
};

class Engine : public crypto::CryptoMeter {
public:
  Engine(const ScenarioConfig& config, const AdversaryScript* script)
      : config_(config), script_(script), loss_rng_(config.seed ^ 0x10551055) {}

  ~Engine() override { crypto::set_meter(nullptr); }

  void record(const std::string& op, double millis) override {
    wall_stats_[op].add(millis);
    if (current_app_ != SIZE_MAX)
      apps_[current_app_].wall_ms += millis;
  }

  RunMetrics run();
  AttackReport attack_report() const;

private:
  void build_world();
  void schedule(VirtualTime at, size_t app, discovery::Event event, int taint) {
    queue_.push({at, seq_++, app, std::move(event), taint});
  }
  void process(const QueuedEvent& qe);
  void process_actions(size_t app_id, const discovery::Actions& actions, int taint);
  void deliver(size_t from_app, const discovery::SendMessage& send, int taint,
               const records::Endpoint& source);
  void run_adversary_action(size_t index);
  dnssec::ResolveResult timed_resolve(const records::DnsName& name, dnssec::RrType type,
                                      const char* stat_name);
  void note_taint_effect(int taint, const discovery::Actions& actions);

  const ScenarioConfig& config_;
  const AdversaryScript* script_;

  std::vector<App> apps_;
  std::map<records::Endpoint, size_t> by_endpoint_;
  std::map<uint16_t, std::vector<size_t>> pubs_by_service_;
  std::map<uint16_t, std::vector<size_t>> subs_by_service_;

  std::optional<dnssec::Zone> zone_;
  std::optional<dnssec::ZoneBackedSource> source_;
  std::optional<dnssec::Resolver> resolver_;
  uint64_t fetches_after_preload_ = 0;

  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, EventOrder> queue_;
  uint64_t seq_ = 0;
  VirtualTime now_ = 0;
  std::mt19937_64 loss_rng_;
  size_t current_app_ = SIZE_MAX;

  std::map<std::string, StatAcc> wall_stats_;
  std::map<std::string, uint64_t> counters_;
  std::vector<std::string> rejection_log_;
  size_t established_ = 0;
  size_t insecure_acks_ = 0;

  std::vector<ActionOutcome> outcomes_;
  std::vector<bool> replay_captured_;
  std::vector<std::optional<std::pair<wire::SdMessage, records::Endpoint>>> replay_messages_;
  std::vector<bool> modify_used_;
};

void Engine::build_world() {
  const auto& plan = config_.plan;

  // Credentials for every identity; the zone mirrors them for dnssec runs.
  crypto::KeyPair supplier =
      crypto::KeyPair::generate(config_.identity_scheme, crypto::KeyUsage::supplier);
  std::vector<zoneforge::SupplierBundle> bundles = zoneforge::issue_for_plan(
      plan, supplier, "tier1", {0, 86400L * 365}, config_.identity_scheme);

  std::vector<zoneforge::SupplierBundle> rogue_bundles;
  if (script_) {
    outcomes_.resize(script_->actions.size());
    replay_captured_.assign(script_->actions.size(), false);
    replay_messages_.resize(script_->actions.size());
    modify_used_.assign(script_->actions.size(), false);
    for (size_t i = 0; i < script_->actions.size(); ++i) {
      outcomes_[i].action = script_->actions[i].name;
      if (script_->actions[i].kind == AdversaryAction::Kind::rogue_client) {
        zoneforge::SubscriberIdentity identity{script_->actions[i].rogue_client};
        rogue_bundles.push_back(zoneforge::supplier_issue(identity, {0, 86400L * 365}, supplier,
                                                          "rogue", config_.identity_scheme,
                                                          Bytes{6, 6, 6}));
      }
    }
  }

  if (config_.variant == Variant::dnssec) {
    crypto::KeyPair supplier_pub = crypto::KeyPair::from_public_key_der(
        supplier.public_key_der(), config_.identity_scheme, crypto::KeyUsage::supplier);
    crypto::KeyPair zsk =
        crypto::KeyPair::generate(config_.identity_scheme, crypto::KeyUsage::zone_signing);
    crypto::KeyPair ksk =
        crypto::KeyPair::generate(config_.identity_scheme, crypto::KeyUsage::key_signing);
    zone_ = zoneforge::build_vehicle_zone(plan, bundles, supplier_pub, std::move(zsk), ksk, 0);
    // Rogue clients hold valid published credentials; only their scope is
    // insufficient.
    for (const auto& bundle : rogue_bundles)
      zoneforge::oem_publish(*zone_, bundle, supplier_pub, 0);

    source_.emplace(&*zone_);
    resolver_.emplace(crypto::KeyPair::from_public_key_der(ksk.public_key_der(), ksk.scheme(),
                                                           crypto::KeyUsage::key_signing));
    resolver_->set_source(&*source_);
    auto report = resolver_->preload(0);
    counters_["preload_cached"] = report.cached;
    counters_["preload_rejected"] = report.rejected;
    if (config_.disconnect_after_preload)
      source_->set_connected(false);
    fetches_after_preload_ = resolver_->upstream_fetches();
  }

  // Bundle lookup by the published TLSA name.
  std::map<records::DnsName, const zoneforge::SupplierBundle*> by_name;
  for (const auto& b : bundles)
    by_name[zoneforge::tlsa_name_of(b.identity)] = &b;
  for (const auto& b : rogue_bundles)
    by_name[zoneforge::tlsa_name_of(b.identity)] = &b;

  auto pub_of = [&plan](const records::ServiceKey& target) -> size_t {
    for (size_t i = 0; i < plan.publishers.size(); ++i) {
      const auto& p = plan.publishers[i];
      if (p.service.service_id == target.service_id &&
          p.service.instance_id == target.instance_id && p.service.major == target.major)
        return i;
    }
    throw SimError("subscriber targets unknown service " + std::to_string(target.service_id));
  };

  // Publisher apps.
  for (size_t i = 0; i < plan.publishers.size(); ++i) {
    const auto& p = plan.publishers[i];
    const Host* host = config_.topology.host(p.node);
    if (!host)
      throw SimError("publisher placed on unknown node '" + p.node + "'");
    App app;
    app.id = apps_.size();
    app.is_publisher = true;
    app.node = p.node;
    app.endpoint = p.endpoint;
    app.endpoint.addr = host->addr;
    app.service_id = p.service.service_id;
    app.pub_index = i;

    discovery::PublisherConfig cfg;
    cfg.service = p.service;
    cfg.endpoint = app.endpoint;
    cfg.multicast_endpoint =
        records::Endpoint{{239, 0, static_cast<uint8_t>(i >> 8), static_cast<uint8_t>(i)},
                          static_cast<uint16_t>(45000 + (i % 1000)), wire::kIpProtoUdp};
    cfg.variant = config_.variant;
    cfg.mode = config_.mode;
    cfg.timing = config_.timing;
    cfg.policy = config_.publisher_policy;
    const auto* bundle = by_name.at(records::publisher_tlsa_name(p.service, app.endpoint.port));
    cfg.key = bundle->keypair;
    cfg.cert = bundle->certificate;
    if (config_.variant == Variant::pre_deployed) {
      for (const auto& s : plan.subscribers)
        if (pub_of(s.target) == i)
          cfg.pinned_client_certs[s.client.client_id] =
              by_name.at(records::client_tlsa_name(s.client))->certificate;
    }
    app.pub = std::make_unique<discovery::PublisherFsm>(std::move(cfg),
                                                        config_.seed ^ (0x9E3779B9ULL * (i + 1)));
    pubs_by_service_[app.service_id].push_back(app.id);
    by_endpoint_[app.endpoint] = app.id;
    apps_.push_back(std::move(app));
  }

  // Subscriber apps, including rogue ones from the script.
  auto add_subscriber = [&](const zoneforge::PlanSubscriber& s, bool rogue, int action_index) {
    const Host* host = config_.topology.host(s.node);
    if (!host)
      throw SimError("subscriber placed on unknown node '" + s.node + "'");
    size_t pub_index = pub_of(s.target);
    const auto& p = plan.publishers[pub_index];

    App app;
    app.id = apps_.size();
    app.node = s.node;
    app.endpoint = records::Endpoint{host->addr,
                                     static_cast<uint16_t>(30000 + apps_.size()),
                                     wire::kIpProtoUdp};
    app.service_id = s.target.service_id;
    app.pub_index = pub_index;
    app.rogue = rogue;
    app.rogue_action = action_index;

    discovery::SubscriberConfig cfg;
    cfg.client = s.client;
    cfg.service = p.service;
    cfg.local_endpoint = app.endpoint;
    cfg.expected_service_port = p.endpoint.port;
    cfg.variant = config_.variant;
    cfg.mode = config_.mode;
    cfg.timing = config_.timing;
    const auto* bundle = by_name.at(records::client_tlsa_name(s.client));
    cfg.key = bundle->keypair;
    cfg.cert = bundle->certificate;
    if (config_.variant == Variant::pre_deployed)
      cfg.pinned_publisher_cert =
          by_name.at(records::publisher_tlsa_name(p.service, p.endpoint.port))->certificate;
    app.sub = std::make_unique<discovery::SubscriberFsm>(
        std::move(cfg), config_.seed ^ (0xC2B2AE35ULL * (apps_.size() + 1)));
    subs_by_service_[app.service_id].push_back(app.id);
    by_endpoint_[app.endpoint] = app.id;
    apps_.push_back(std::move(app));
  };

  for (const auto& s : plan.subscribers)
    add_subscriber(s, false, -1);

  if (script_) {
    for (size_t i = 0; i < script_->actions.size(); ++i) {
      const auto& action = script_->actions[i];
      if (action.kind != AdversaryAction::Kind::rogue_client)
        continue;
      zoneforge::PlanSubscriber rogue;
      rogue.client = action.rogue_client;
      for (const auto& p : plan.publishers)
        if (p.service.service_id == action.rogue_target_service)
          rogue.target = p.service;
      rogue.node = config_.topology.hosts.back().name;
      add_subscriber(rogue, true, static_cast<int>(i));
    }
  }

  // Rogue apps start untainted; only the messages they emit carry their
  // action's taint, so acceptance is judged at the victim.
  for (auto& app : apps_)
    schedule(0, app.id, discovery::EvStart{}, -1);

  if (script_) {
    for (size_t i = 0; i < script_->actions.size(); ++i) {
      const auto& action = script_->actions[i];
      if (action.kind == AdversaryAction::Kind::inject)
        schedule(action.at, SIZE_MAX, discovery::EvStart{}, static_cast<int>(i));
    }
  }
}

dnssec::ResolveResult Engine::timed_resolve(const records::DnsName& name, dnssec::RrType type,
                                            const char* stat_name) {
  if (!resolver_)
    return {};
  // Resolver-internal validation is the resolver's business; keep the
  // handshake crypto rows clean while measuring the full call.
  crypto::set_meter(nullptr);
  auto t0 = std::chrono::steady_clock::now();
  auto result = resolver_->resolve(name, type, now_);
  auto t1 = std::chrono::steady_clock::now();
  crypto::set_meter(this);
  double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  wall_stats_[stat_name].add(ms);
  if (current_app_ != SIZE_MAX)
    apps_[current_app_].wall_ms += ms;
  return result;
}

void Engine::deliver(size_t from_app, const discovery::SendMessage& send, int taint,
                     const records::Endpoint& source) {
  Bytes encoded;
  try {
    encoded = wire::encode_message(send.msg);
  } catch (const wire::WireError& e) {
    rejection_log_.push_back("t=" + std::to_string(to_millis(now_)) + " encode-error " + e.what());
    return;
  }
  wire::SdMessage decoded = wire::decode_message(encoded);

  // Recipients: unicast by exact endpoint, multicast by service interest.
  std::vector<size_t> recipients;
  if (send.multicast) {
    std::set<size_t> unique;
    for (const auto& entry : decoded.entries) {
      const bool to_publishers =
          entry.type == wire::EntryType::find || entry.type == wire::EntryType::subscribe;
      const auto& index = to_publishers ? pubs_by_service_ : subs_by_service_;
      auto it = index.find(entry.service_id);
      if (it != index.end())
        for (size_t id : it->second)
          if (id != from_app)
            unique.insert(id);
    }
    recipients.assign(unique.begin(), unique.end());
  } else {
    auto it = by_endpoint_.find(send.dest);
    if (it != by_endpoint_.end() && it->second != from_app)
      recipients.push_back(it->second);
  }

  // Adversary capture for replay actions.
  if (script_ && from_app != SIZE_MAX) {
    for (size_t i = 0; i < script_->actions.size(); ++i) {
      const auto& action = script_->actions[i];
      if (action.kind == AdversaryAction::Kind::replay && !replay_captured_[i] &&
          now_ >= action.at && action.selector.matches(decoded)) {
        replay_captured_[i] = true;
        replay_messages_[i] = {decoded, source};
        schedule(now_ + action.replay_delay, SIZE_MAX, discovery::EvStart{},
                 static_cast<int>(i));
      }
    }
  }

  const std::string& from_node = from_app == SIZE_MAX
      ? config_.topology.hosts.front().name
      : apps_[from_app].node;

  for (size_t recipient : recipients) {
    counters_["messages_sent"] += 1;
    wire::SdMessage for_recipient = decoded;
    int recipient_taint = taint;

    if (script_) {
      bool blocked = false;
      for (size_t i = 0; i < script_->actions.size(); ++i) {
        const auto& action = script_->actions[i];
        if (action.kind == AdversaryAction::Kind::block && now_ >= action.at &&
            now_ < action.block_until && action.selector.matches(decoded)) {
          counters_["messages_blocked"] += 1;
          outcomes_[i].succeeded = true;
          outcomes_[i].deliveries += 1;
          blocked = true;
          break;
        }
        if (action.kind == AdversaryAction::Kind::modify && !modify_used_[i] &&
            now_ >= action.at && action.selector.matches(decoded) && action.modify_port) {
          modify_used_[i] = true;
          for (auto& opt : for_recipient.options)
            if (auto* ep = std::get_if<wire::Ipv4EndpointOption>(&opt))
              ep->port = *action.modify_port;
          recipient_taint = static_cast<int>(i);
        }
      }
      if (blocked)
        continue;
    }

    if (config_.loss_rate > 0 &&
        std::uniform_real_distribution<double>(0, 1)(loss_rng_) < config_.loss_rate) {
      counters_["messages_dropped"] += 1;
      continue;
    }

    VirtualTime latency = config_.topology.latency(from_node, apps_[recipient].node);
    schedule(now_ + latency, recipient, discovery::EvMessage{for_recipient, source},
             recipient_taint);
    counters_["messages_in_flight"] += 1;
  }
}

void Engine::note_taint_effect(int taint, const discovery::Actions& actions) {
  if (taint < 0 || static_cast<size_t>(taint) >= outcomes_.size())
    return;
  auto& outcome = outcomes_[static_cast<size_t>(taint)];
  outcome.deliveries += 1;
  for (const auto& action : actions) {
    if (const auto* send = std::get_if<discovery::SendMessage>(&action)) {
      // Finds are answered unauthenticated by design; only a subscription
      // issued in response to adversarial input counts as a compromise.
      if (!send->msg.entries.empty() &&
          send->msg.entries[0].type == wire::EntryType::subscribe &&
          !send->msg.entries[0].is_stop()) {
        outcome.succeeded = true;
        outcome.detail = "endpoint subscribed in response to the adversarial message";
      }
    } else if (const auto* log = std::get_if<discovery::LogEvent>(&action)) {
      switch (log->kind) {
      case discovery::LogKind::subscribed:
      case discovery::LogKind::acked:
      case discovery::LogKind::insecure_ack:
      case discovery::LogKind::stopped:
        outcome.succeeded = true;
        outcome.detail = log->detail;
        break;
      case discovery::LogKind::rejected:
        if (outcome.cause == discovery::RejectCause::none)
          outcome.cause = log->cause;
        break;
      default:
        break;
      }
    }
  }
}

void Engine::process_actions(size_t app_id, const discovery::Actions& actions, int taint) {
  App& app = apps_[app_id];
  for (const auto& action : actions) {
    if (const auto* send = std::get_if<discovery::SendMessage>(&action)) {
      if (app.is_publisher && !send->msg.entries.empty() &&
          send->msg.entries[0].type == wire::EntryType::offer && app.first_offer_at < 0)
        app.first_offer_at = now_;
      if (!app.is_publisher && !send->msg.entries.empty() &&
          send->msg.entries[0].type == wire::EntryType::subscribe && app.first_subscribe_at < 0)
        app.first_subscribe_at = now_;
      deliver(app_id, *send, app.rogue ? app.rogue_action : -1, app.endpoint);
    } else if (const auto* query = std::get_if<discovery::DnsQuery>(&action)) {
      counters_["dns_queries"] += 1;
      const char* stat = query->purpose == discovery::QueryPurpose::publisher_svcb
          ? "resolve_pub_svcb"
          : (query->purpose == discovery::QueryPurpose::publisher_tlsa ? "resolve_pub_tlsa"
                                                                       : "resolve_sub_tlsa");
      auto result = timed_resolve(query->name, query->type, stat);
      schedule(now_ + config_.dns_latency, app_id,
               discovery::EvDnsResult{query->purpose, query->name, result,
                                      query->pending_client},
               taint);
    } else if (const auto* timer = std::get_if<discovery::StartTimer>(&action)) {
      schedule(now_ + timer->delay, app_id, discovery::EvTimer{timer->kind, timer->generation},
               -1);
    } else if (const auto* log = std::get_if<discovery::LogEvent>(&action)) {
      switch (log->kind) {
      case discovery::LogKind::rejected:
        counters_["rejected_" + to_string(log->cause)] += 1;
        rejection_log_.push_back("t=" + std::to_string(to_millis(now_)) + "ms app=" +
                                 std::to_string(app_id) + " cause=" + to_string(log->cause) +
                                 " " + log->detail);
        break;
      case discovery::LogKind::subscribed:
        if (!app.rogue && app.subscribed_at < 0) {
          app.subscribed_at = now_;
          ++established_;
        }
        break;
      case discovery::LogKind::insecure_ack:
        if (app.is_publisher)
          ++insecure_acks_;
        break;
      default:
        break;
      }
    }
  }
}

void Engine::run_adversary_action(size_t index) {
  const auto& action = script_->actions[index];
  if (action.kind == AdversaryAction::Kind::inject) {
    discovery::SendMessage send;
    send.msg = action.message;
    send.multicast = !action.dest.has_value();
    if (action.dest)
      send.dest = *action.dest;
    deliver(SIZE_MAX, send, static_cast<int>(index), action.attacker);
  } else if (action.kind == AdversaryAction::Kind::replay && replay_messages_[index]) {
    discovery::SendMessage send;
    send.msg = replay_messages_[index]->first;
    // Replays go back to where the original went: unicast subscribes to the
    // publisher of the targeted service, everything else multicast.
    send.multicast = true;
    if (!send.msg.entries.empty() && send.msg.entries[0].type == wire::EntryType::subscribe) {
      auto it = pubs_by_service_.find(send.msg.entries[0].service_id);
      if (it != pubs_by_service_.end() && !it->second.empty()) {
        send.multicast = false;
        send.dest = apps_[it->second.front()].endpoint;
      }
    }
    deliver(SIZE_MAX, send, static_cast<int>(index), replay_messages_[index]->second);
  }
}

void Engine::process(const QueuedEvent& qe) {
  now_ = qe.at;
  if (qe.app_id == SIZE_MAX) {
    run_adversary_action(static_cast<size_t>(qe.taint));
    return;
  }
  App& app = apps_[qe.app_id];
  if (std::get_if<discovery::EvMessage>(&qe.event))
    counters_["messages_delivered"] += 1, counters_["messages_in_flight"] -= 1;

  current_app_ = qe.app_id;
  discovery::Actions actions =
      app.is_publisher ? app.pub->step(qe.event, now_) : app.sub->step(qe.event, now_);
  current_app_ = SIZE_MAX;

  if (qe.taint >= 0)
    note_taint_effect(qe.taint, actions);
  // DNS continuations keep the taint of the message that caused them;
  // everything else propagates nothing.
  process_actions(qe.app_id, actions, qe.taint);
}

RunMetrics Engine::run() {
  build_world();
  crypto::set_meter(this);

  size_t expected = 0;
  for (const auto& app : apps_)
    if (!app.is_publisher && !app.rogue)
      ++expected;

  bool adversary_active = script_ && !script_->actions.empty();
  while (!queue_.empty() && queue_.top().at <= config_.run_limit) {
    if (!adversary_active && established_ == expected)
      break;
    QueuedEvent qe = queue_.top();
    queue_.pop();
    process(qe);
  }
  crypto::set_meter(nullptr);

  RunMetrics out;
  out.subscriptions_expected = expected;
  out.subscriptions_established = established_;
  out.insecure_acks = insecure_acks_;
  out.counters = counters_;
  out.counters["insecure_acks"] = insecure_acks_;
  out.counters["subscriptions_established"] = established_;
  out.counters["subscriptions_failed"] = expected - established_;
  if (resolver_)
    out.counters["upstream_fetches_during_run"] =
        resolver_->upstream_fetches() - fetches_after_preload_;
  out.rejection_log = rejection_log_;

  // Group key reachability: every secure subscriber of a multicast service
  // must hold the publisher's key at the publisher's current epoch.
  if (config_.variant != Variant::vanilla) {
    uint64_t holders = 0, mismatches = 0;
    for (const auto& sub : apps_) {
      if (sub.is_publisher || sub.rogue || sub.subscribed_at < 0 || sub.pub_index == SIZE_MAX)
        continue;
      const auto& sub_key = sub.sub->group_key();
      const auto& pub_key = apps_[sub.pub_index].pub->group_key();
      if (!sub_key || !pub_key)
        continue;
      ++holders;
      if (sub_key->key != pub_key->key || sub_key->epoch != pub_key->epoch)
        ++mismatches;
    }
    out.counters["group_key_holders"] = holders;
    out.counters["group_key_mismatches"] = mismatches;
  }

  // Per-service setup: first offer to the last of its subscribers
  // subscribing, reported when every subscriber of the service made it.
  StatAcc service_setup, service_setup_compute, sub_setup, sub_setup_compute;
  VirtualTime first_offer_any = -1, last_subscribed = -1;
  for (const auto& pub : apps_) {
    if (!pub.is_publisher)
      continue;
    if (pub.first_offer_at >= 0 && (first_offer_any < 0 || pub.first_offer_at < first_offer_any))
      first_offer_any = pub.first_offer_at;
    VirtualTime latest = -1;
    double compute_ms = pub.wall_ms;
    bool all = true;
    size_t n_subs = 0;
    for (const auto& sub : apps_) {
      if (sub.is_publisher || sub.rogue || sub.pub_index != pub.pub_index)
        continue;
      ++n_subs;
      if (sub.subscribed_at < 0) {
        all = false;
        break;
      }
      latest = std::max(latest, sub.subscribed_at);
      compute_ms += sub.wall_ms;
      if (sub.subscribed_at > last_subscribed)
        last_subscribed = sub.subscribed_at;
    }
    if (all && n_subs > 0 && pub.first_offer_at >= 0 && latest >= pub.first_offer_at) {
      double virt = to_millis(latest - pub.first_offer_at);
      service_setup.add(virt);
      service_setup_compute.add(virt + compute_ms);
    }
  }
  for (const auto& sub : apps_) {
    if (sub.is_publisher || sub.rogue || sub.subscribed_at < 0 || sub.first_subscribe_at < 0)
      continue;
    double virt = to_millis(sub.subscribed_at - sub.first_subscribe_at);
    sub_setup.add(virt);
    double pub_share = 0;
    if (sub.pub_index != SIZE_MAX) {
      const App& pub = apps_[sub.pub_index];
      size_t siblings = 0;
      for (const auto& other : apps_)
        if (!other.is_publisher && !other.rogue && other.pub_index == sub.pub_index)
          ++siblings;
      pub_share = pub.wall_ms / static_cast<double>(std::max<size_t>(siblings, 1));
    }
    sub_setup_compute.add(virt + sub.wall_ms + pub_share);
  }
  out.virtual_stats["service_setup"] = service_setup.finish();
  out.virtual_stats["subscription_setup"] = sub_setup.finish();
  if (first_offer_any >= 0 && last_subscribed >= first_offer_any) {
    Stat net{1, to_millis(last_subscribed - first_offer_any),
             to_millis(last_subscribed - first_offer_any),
             to_millis(last_subscribed - first_offer_any)};
    out.virtual_stats["network_setup"] = net;
  }
  out.wall_stats["service_setup_incl_compute"] = service_setup_compute.finish();
  out.wall_stats["subscription_setup_incl_compute"] = sub_setup_compute.finish();
  for (const auto& [name, acc] : wall_stats_)
    out.wall_stats[name] = acc.finish();
  return out;
}

AttackReport Engine::attack_report() const {
  AttackReport report;
  report.script = script_ ? script_->name : "";
  report.outcomes = outcomes_;
  for (const auto& o : outcomes_)
    report.any_succeeded |= o.succeeded;
  return report;
}

} // namespace

RunMetrics run_scenario(const ScenarioConfig& config) {
  Engine engine(config, nullptr);
  return engine.run();
}

AttackReport run_attack(const ScenarioConfig& config, const AdversaryScript& script,
                        RunMetrics* metrics_out) {
  Engine engine(config, &script);
  RunMetrics metrics = engine.run();
  if (metrics_out)
    *metrics_out = metrics;
  return engine.attack_report();
}

static void append_stat_rows(std::ostringstream& os, const std::map<std::string, Stat>& stats,
                             const char* clock) {
  for (const auto& [name, stat] : stats) {
    os << name << "," << clock << "," << stat.count << "," << std::fixed << stat.min << ","
       << stat.mean << "," << stat.max << "\n";
  }
}

std::string RunMetrics::to_csv() const {
  std::ostringstream os;
  os.precision(4);
  os << "metric,clock,count,min_ms,mean_ms,max_ms\n";
  append_stat_rows(os, virtual_stats, "virtual");
  append_stat_rows(os, wall_stats, "wall");
  for (const auto& [name, value] : counters)
    os << name << ",count," << value << "," << value << "," << value << "," << value << "\n";
  return os.str();
}

std::string RunMetrics::deterministic_csv() const {
  std::ostringstream os;
  os.precision(4);
  os << "metric,clock,count,min_ms,mean_ms,max_ms\n";
  append_stat_rows(os, virtual_stats, "virtual");
  for (const auto& [name, value] : counters)
    os << name << ",count," << value << "," << value << "," << value << "," << value << "\n";
  return os.str();
}

std::string AttackReport::to_text() const {
  std::ostringstream os;
  os << "script " << script << "\n";
  for (const auto& o : outcomes) {
    os << "action " << o.action << " outcome="
       << (o.succeeded ? "succeeded" : "rejected");
    if (!o.succeeded && o.cause != discovery::RejectCause::none)
      os << " cause=" << to_string(o.cause);
    os << " deliveries=" << o.deliveries;
    if (!o.detail.empty())
      os << " detail=\"" << o.detail << "\"";
    os << "\n";
  }
  os << "result " << (any_succeeded ? "attack-succeeded" : "all-rejected") << "\n";
  return os.str();
}

} // namespace danesd::simnet
