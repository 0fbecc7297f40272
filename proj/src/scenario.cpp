// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/simnet.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace danesd::simnet {

using discovery::Variant;

namespace {

// Per-node placement quotas. Chosen to reproduce the published aggregates:
// 212 publishers (node mean 16.3, min 0, max 79) and 448 subscribers
// (node mean 34.5, min 0, max 131).
struct NodeQuota {
  const char* node;
  int publishers;
  int subscribers;
};

constexpr NodeQuota kIvnQuotas[] = {
    {"hpc-adas", 79, 131}, {"hpc-info", 30, 60}, {"hpc-tele", 20, 40}, {"zc1", 12, 35},
    {"zc2", 11, 30},       {"zc3", 10, 28},      {"zc4", 9, 25},       {"cam1", 8, 20},
    {"cam2", 7, 15},       {"lidar1", 12, 25},   {"lidar2", 8, 20},    {"lidar3", 6, 19},
    {"lidar4", 0, 0},
};

} // namespace

zoneforge::VehicleZonePlan generate_ivn_plan(uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x1B7);
  Topology topo = Topology::ivn_star();

  zoneforge::VehicleZonePlan plan;
  plan.vehicle = "vehicle1.oem";

  int total_pubs = 0, total_subs = 0;
  for (const auto& q : kIvnQuotas) {
    total_pubs += q.publishers;
    total_subs += q.subscribers;
  }
  if (total_pubs != 212 || total_subs != 448)
    throw SimError("ivn quotas out of sync with the published totals");

  // Publishers: unique service ids, one per app, endpoints on their node.
  size_t pub_index = 0;
  for (const auto& q : kIvnQuotas) {
    const Host* host = topo.host(q.node);
    for (int k = 0; k < q.publishers; ++k, ++pub_index) {
      zoneforge::PlanPublisher pub;
      pub.service.service_id = static_cast<uint16_t>(100 + pub_index);
      pub.service.instance_id = 1;
      pub.service.major = 1;
      pub.service.minor = 0;
      pub.service.vehicle = plan.vehicle;
      pub.endpoint = records::Endpoint{host->addr, static_cast<uint16_t>(20000 + pub_index),
                                       wire::kIpProtoUdp};
      pub.node = q.node;
      plan.publishers.push_back(std::move(pub));
    }
  }

  // Subscribers per publisher: 448 total over 212 publishers, each within
  // [1,4] (mean 2.11). Everyone starts at one; the remainder lands randomly
  // but publisher 0 is pushed to the maximum and publisher 1 pinned to the
  // minimum so the published extremes always appear.
  std::vector<int> per_pub(plan.publishers.size(), 1);
  int extra = 448 - static_cast<int>(plan.publishers.size());
  per_pub[0] = 4;
  extra -= 3;
  std::uniform_int_distribution<size_t> pick(2, plan.publishers.size() - 1);
  while (extra > 0) {
    size_t i = pick(rng);
    if (per_pub[i] < 4) {
      ++per_pub[i];
      --extra;
    }
  }

  // Publisher slots shuffled, then dealt to subscribers node by node.
  std::vector<size_t> slots;
  for (size_t i = 0; i < per_pub.size(); ++i)
    for (int k = 0; k < per_pub[i]; ++k)
      slots.push_back(i);
  std::shuffle(slots.begin(), slots.end(), rng);

  size_t sub_index = 0;
  for (const auto& q : kIvnQuotas) {
    for (int k = 0; k < q.subscribers; ++k, ++sub_index) {
      const auto& target = plan.publishers[slots[sub_index]];
      zoneforge::PlanSubscriber sub;
      sub.client.client_id = static_cast<uint16_t>(1000 + sub_index);
      sub.client.scope = records::ClientScope{target.service.service_id,
                                              target.service.instance_id, target.service.major};
      sub.client.vehicle = plan.vehicle;
      sub.target = target.service;
      sub.node = q.node;
      plan.subscribers.push_back(std::move(sub));
    }
  }
  return plan;
}

ScenarioConfig ivn_scenario(Variant variant, uint64_t seed) {
  ScenarioConfig config;
  config.topology = Topology::ivn_star();
  config.plan = generate_ivn_plan(seed);
  config.variant = variant;
  config.seed = seed;
  config.publisher_policy.accepted = {records::ScopeKind::service_specific};
  return config;
}

ScenarioConfig parse_scenario(const std::string& text) {
  ScenarioConfig config;
  config.topology = Topology::ivn_star();
  bool generated = false;
  std::string plan_lines;

  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    std::string kind, value;
    ls >> kind;
    if (kind == "variant") {
      ls >> value;
      config.variant = discovery::variant_from_string(value);
    } else if (kind == "seed") {
      ls >> config.seed;
    } else if (kind == "loss") {
      ls >> config.loss_rate;
    } else if (kind == "offline") {
      ls >> std::boolalpha >> config.disconnect_after_preload;
    } else if (kind == "run_limit_ms") {
      int64_t ms = 0;
      ls >> ms;
      config.run_limit = ms * kNsPerMs;
    } else if (kind == "topology") {
      ls >> value;
      if (value == "ivn-star")
        config.topology = Topology::ivn_star();
      else if (value == "tiny")
        config.topology = Topology::tiny();
      else
        throw SimError("unknown topology: " + value);
    } else if (kind == "generate") {
      ls >> value;
      if (value != "ivn")
        throw SimError("unknown generator: " + value);
      generated = true;
    } else if (kind == "scheme") {
      ls >> value;
      config.identity_scheme = crypto::scheme_from_string(value);
    } else if (kind == "policy") {
      config.publisher_policy.accepted.clear();
      while (ls >> value) {
        if (value == "service")
          config.publisher_policy.accepted.insert(records::ScopeKind::service_specific);
        else if (value == "domain")
          config.publisher_policy.accepted.insert(records::ScopeKind::domain);
        else if (value == "vehicle")
          config.publisher_policy.accepted.insert(records::ScopeKind::vehicle_wide);
        else
          throw SimError("unknown policy scope: " + value);
      }
    } else if (kind == "vehicle" || kind == "publisher" || kind == "subscriber") {
      plan_lines += line + "\n";
    } else {
      throw SimError("unknown scenario directive: " + kind);
    }
  }
  if (generated)
    config.plan = generate_ivn_plan(config.seed);
  else
    config.plan = zoneforge::parse_plan(plan_lines);
  return config;
}

// Minimal scenario for attacks and synthetic studies: one publisher on
// host a, subscribers on host b.
static ScenarioConfig small_scenario(Variant variant, uint64_t seed, int subscribers) {
  ScenarioConfig config;
  config.topology = Topology::tiny();
  config.variant = variant;
  config.seed = seed;
  config.publisher_policy.accepted = {records::ScopeKind::service_specific};
  config.plan.vehicle = "vehicle1.oem";
  zoneforge::PlanPublisher pub;
  pub.service = records::ServiceKey{42, 1, 2, 3, std::nullopt, "vehicle1.oem"};
  pub.endpoint = records::Endpoint{{10, 0, 0, 2}, 5000, wire::kIpProtoUdp};
  pub.node = "a";
  config.plan.publishers.push_back(pub);
  for (int i = 0; i < subscribers; ++i) {
    zoneforge::PlanSubscriber sub;
    sub.client.client_id = static_cast<uint16_t>(17 + i);
    sub.client.scope = records::ClientScope{42, 1, 2};
    sub.client.vehicle = "vehicle1.oem";
    sub.target = pub.service;
    sub.node = "b";
    config.plan.subscribers.push_back(sub);
  }
  return config;
}

std::vector<ScaleRow> run_scalability(Variant variant, int max_subscribers, uint64_t seed) {
  std::vector<ScaleRow> rows;
  for (int n = 1; n <= max_subscribers; ++n) {
    ScenarioConfig config = small_scenario(variant, seed + static_cast<uint64_t>(n), n);
    RunMetrics metrics = run_scenario(config);
    ScaleRow row;
    row.subscribers = n;
    auto it = metrics.virtual_stats.find("subscription_setup");
    if (it != metrics.virtual_stats.end())
      row.mean_setup_virtual_ms = it->second.mean;
    auto wall = metrics.wall_stats.find("subscription_setup_incl_compute");
    if (wall != metrics.wall_stats.end())
      row.mean_setup_with_compute_ms = wall->second.mean;
    row.established = static_cast<double>(metrics.subscriptions_established);
    rows.push_back(row);
  }
  return rows;
}

std::string scalability_csv(const std::vector<ScaleRow>& rows) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << "sub_count,established,setup_delay_mean_ms,setup_incl_compute_mean_ms\n";
  for (const auto& row : rows)
    os << row.subscribers << "," << row.established << "," << row.mean_setup_virtual_ms << ","
       << row.mean_setup_with_compute_ms << "\n";
  return os.str();
}

// ---- adversary scripts ----

namespace {

wire::SdMessage offer_template(uint16_t service, uint16_t instance, uint8_t major, uint32_t minor,
                               const records::Endpoint& endpoint, uint32_t ttl) {
  wire::SdMessage msg;
  wire::SdEntry entry;
  entry.type = wire::EntryType::offer;
  entry.service_id = service;
  entry.instance_id = instance;
  entry.major_version = major;
  entry.ttl = ttl;
  entry.minor_or_eventgroup = minor;
  entry.option_count_1 = ttl == 0 ? 0 : 1;
  if (ttl != 0)
    msg.options.push_back(wire::Ipv4EndpointOption{endpoint.addr, endpoint.proto, endpoint.port});
  msg.entries.push_back(entry);
  return msg;
}

} // namespace

AdversaryScript builtin_script(const std::string& name) {
  AdversaryScript script;
  script.name = name;
  records::Endpoint attacker{{10, 99, 99, 99}, 4999, wire::kIpProtoUdp};

  if (name == "spoofed_offer") {
    AdversaryAction a;
    a.kind = AdversaryAction::Kind::inject;
    a.name = "spoofed_offer";
    a.at = 300 * kNsPerMs;
    a.attacker = attacker;
    a.message = offer_template(42, 1, 2, 3, attacker, 3);
    script.actions.push_back(a);
  } else if (name == "spoofed_subscribe") {
    AdversaryAction a;
    a.kind = AdversaryAction::Kind::inject;
    a.name = "spoofed_subscribe";
    a.at = 300 * kNsPerMs;
    a.attacker = attacker;
    wire::SdMessage msg;
    msg.header.client_id = 17; // claims the legitimate client
    wire::SdEntry entry;
    entry.type = wire::EntryType::subscribe;
    entry.service_id = 42;
    entry.instance_id = 1;
    entry.major_version = 2;
    entry.ttl = 300;
    entry.minor_or_eventgroup = 1;
    entry.option_count_1 = 2;
    msg.options.push_back(wire::Ipv4EndpointOption{attacker.addr, attacker.proto, attacker.port});
    wire::ConfigurationOption cfg;
    cfg.items.push_back(wire::to_config_item(wire::Response{Bytes(70, 0xAA)}));
    cfg.items.push_back(wire::to_config_item(wire::Challenge{0xA77A11}));
    cfg.items.push_back(wire::to_config_item(wire::KeyExchange{1, Bytes(32, 0xBB)}));
    cfg.items.push_back(
        wire::ConfigItem{wire::kKeyClientName, "_someip-client.2.1.42.17.client.vehicle1.oem."});
    msg.options.push_back(cfg);
    msg.entries.push_back(entry);
    a.message = msg;
    a.dest = records::Endpoint{{10, 0, 0, 2}, 5000, wire::kIpProtoUdp};
    script.actions.push_back(a);
  } else if (name == "forged_ack") {
    AdversaryAction a;
    a.kind = AdversaryAction::Kind::inject;
    a.name = "forged_ack";
    a.at = 300 * kNsPerMs;
    a.attacker = attacker;
    wire::SdMessage msg;
    wire::SdEntry entry;
    entry.type = wire::EntryType::subscribe_ack;
    entry.service_id = 42;
    entry.instance_id = 1;
    entry.major_version = 2;
    entry.ttl = 300;
    entry.minor_or_eventgroup = 1;
    entry.option_count_1 = 1;
    wire::ConfigurationOption cfg;
    cfg.items.push_back(wire::to_config_item(wire::Response{Bytes(70, 0xCC)}));
    cfg.items.push_back(wire::to_config_item(wire::KeyExchange{1, Bytes(32, 0xDD)}));
    cfg.items.push_back(wire::to_config_item(wire::SessionKey{Bytes(48, 0xEE)}));
    msg.options.push_back(cfg);
    msg.entries.push_back(entry);
    a.message = msg;
    script.actions.push_back(a);
  } else if (name == "forged_stop") {
    AdversaryAction stop_offer;
    stop_offer.kind = AdversaryAction::Kind::inject;
    stop_offer.name = "forged_stop_offer";
    stop_offer.at = 1500 * kNsPerMs;
    stop_offer.attacker = attacker;
    stop_offer.message = offer_template(42, 1, 2, 3, attacker, 0);
    script.actions.push_back(stop_offer);

    AdversaryAction stop_subscribe;
    stop_subscribe.kind = AdversaryAction::Kind::inject;
    stop_subscribe.name = "forged_stop_subscribe";
    stop_subscribe.at = 1500 * kNsPerMs;
    stop_subscribe.attacker = attacker;
    wire::SdMessage msg;
    msg.header.client_id = 17;
    wire::SdEntry entry;
    entry.type = wire::EntryType::subscribe;
    entry.service_id = 42;
    entry.instance_id = 1;
    entry.major_version = 2;
    entry.ttl = 0; // StopSubscribe
    entry.minor_or_eventgroup = 1;
    msg.entries.push_back(entry);
    stop_subscribe.message = msg;
    stop_subscribe.dest = records::Endpoint{{10, 0, 0, 2}, 5000, wire::kIpProtoUdp};
    script.actions.push_back(stop_subscribe);
  } else if (name == "replayed_response") {
    AdversaryAction a;
    a.kind = AdversaryAction::Kind::replay;
    a.name = "replayed_response";
    a.at = 0;
    a.selector.entry_type = wire::EntryType::subscribe;
    a.selector.stop = false;
    a.replay_delay = 300 * kNsPerMs;
    script.actions.push_back(a);
  } else if (name == "unauthorized_scope") {
    AdversaryAction a;
    a.kind = AdversaryAction::Kind::rogue_client;
    a.name = "unauthorized_scope";
    a.at = 0;
    a.rogue_client = records::ClientKey{999, std::nullopt, std::nullopt, "vehicle1.oem"};
    a.rogue_target_service = 42;
    script.actions.push_back(a);
  } else {
    throw SimError("unknown adversary script: " + name);
  }
  return script;
}

std::vector<std::string> builtin_script_names() {
  return {"spoofed_offer", "spoofed_subscribe", "forged_ack",
          "forged_stop",  "replayed_response", "unauthorized_scope"};
}

ScenarioConfig attack_scenario(Variant variant, uint64_t seed);

ScenarioConfig attack_scenario(Variant variant, uint64_t seed) {
  ScenarioConfig config = small_scenario(variant, seed, 1);
  config.run_limit = 5 * kNsPerSec;
  return config;
}

} // namespace danesd::simnet
