// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#pragma once

#include "danesd/discovery.hpp"
#include "danesd/resolver.hpp"
#include "danesd/zoneforge.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace danesd::simnet {

class SimError : public std::runtime_error {
public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// ---- topology ----

struct Host {
  std::string name;
  std::array<uint8_t, 4> addr{};
  std::string attached_switch;
};

struct Topology {
  std::vector<std::string> switches;
  std::map<std::string, std::string> uplink; // zone switch -> core switch
  std::vector<Host> hosts;
  VirtualTime per_hop_latency = 10 * kNsPerUs;

  const Host* host(const std::string& name) const;
  const Host* host_by_addr(const std::array<uint8_t, 4>& addr) const;
  // Links traversed host-to-host through the switch fabric.
  int hops(const std::string& from_host, const std::string& to_host) const;
  VirtualTime latency(const std::string& from_host, const std::string& to_host) const {
    return per_hop_latency * hops(from_host, to_host);
  }

  // Star backbone: one core switch, four zone switches, thirteen hosts
  // (four lidars, two cameras, four zone controllers, three HPCs).
  static Topology ivn_star();
  // Two hosts on one switch, for synthetic studies.
  static Topology tiny();
};

// ---- scenario ----

struct ScenarioConfig {
  Topology topology;
  zoneforge::VehicleZonePlan plan;
  discovery::Variant variant = discovery::Variant::dnssec;
  discovery::TimingConfig timing;
  uint64_t seed = 1;
  double loss_rate = 0.0;
  bool disconnect_after_preload = false; // offline operation check
  VirtualTime run_limit = 20 * kNsPerSec;
  VirtualTime dns_latency = 100 * kNsPerUs;
  crypto::SignatureScheme identity_scheme = crypto::SignatureScheme::ecdsa_p256_sha256;
  discovery::AuthorizationPolicy publisher_policy;
  discovery::SecurityMode mode = discovery::SecurityMode::secure;
};

// The in-vehicle deployment: 212 publishers and 448 subscribers placed to
// match the published aggregate statistics (node means and extremes, 2.1
// subscribers per publisher within [1,4]). Only those aggregates are
// matched; the true per-node joint distribution is not public.
zoneforge::VehicleZonePlan generate_ivn_plan(uint64_t seed);

ScenarioConfig ivn_scenario(discovery::Variant variant, uint64_t seed);

// Scenario files: plan directives plus variant/seed/loss/offline/generate.
ScenarioConfig parse_scenario(const std::string& text);

// ---- metrics ----

struct Stat {
  size_t count = 0;
  double min = 0, mean = 0, max = 0;
};

struct RunMetrics {
  std::map<std::string, Stat> virtual_stats; // milliseconds of virtual time
  std::map<std::string, Stat> wall_stats;    // measured milliseconds
  std::map<std::string, uint64_t> counters;
  std::vector<std::string> rejection_log;

  size_t subscriptions_expected = 0;
  size_t subscriptions_established = 0;
  size_t insecure_acks = 0;

  std::string to_csv() const;
  // The deterministic portion: wall-clock rows stripped.
  std::string deterministic_csv() const;
};

// ---- adversary ----

struct MsgSelector {
  std::optional<wire::EntryType> entry_type;
  std::optional<uint16_t> service_id;
  std::optional<bool> stop; // ttl == 0
  bool matches(const wire::SdMessage& msg) const;
};

struct AdversaryAction {
  enum class Kind { inject, replay, block, modify, rogue_client };
  Kind kind = Kind::inject;
  std::string name;
  VirtualTime at = 0;

  // inject
  wire::SdMessage message;
  records::Endpoint attacker{{10, 99, 99, 99}, 4999, wire::kIpProtoUdp};
  std::optional<records::Endpoint> dest; // unicast target; multicast otherwise

  // replay / block / modify
  MsgSelector selector;
  VirtualTime replay_delay = 1 * kNsPerMs;
  VirtualTime block_until = 0;
  std::optional<uint16_t> modify_port; // modify: rewrite offered endpoint port

  // rogue_client: valid credentials, insufficient scope
  records::ClientKey rogue_client;
  uint16_t rogue_target_service = 0;
};

struct AdversaryScript {
  std::string name;
  std::vector<AdversaryAction> actions;
};

struct ActionOutcome {
  std::string action;
  bool succeeded = false;
  discovery::RejectCause cause = discovery::RejectCause::none;
  size_t deliveries = 0;
  std::string detail;
};

struct AttackReport {
  std::string script;
  std::vector<ActionOutcome> outcomes;
  bool any_succeeded = false;
  std::string to_text() const;
};

// The six canonical scripts: spoofed_offer, spoofed_subscribe, forged_ack,
// forged_stop, replayed_response, unauthorized_scope.
AdversaryScript builtin_script(const std::string& name);
std::vector<std::string> builtin_script_names();

// ---- runners ----

RunMetrics run_scenario(const ScenarioConfig& config);

struct ScaleRow {
  int subscribers = 0;
  double mean_setup_virtual_ms = 0;
  double mean_setup_with_compute_ms = 0;
  double established = 0;
};

std::vector<ScaleRow> run_scalability(discovery::Variant variant, int max_subscribers,
                                      uint64_t seed);
std::string scalability_csv(const std::vector<ScaleRow>& rows);

AttackReport run_attack(const ScenarioConfig& config, const AdversaryScript& script,
                        RunMetrics* metrics_out = nullptr);

// One publisher, one subscriber, tiny topology: the stage the canonical
// adversary scripts run on.
ScenarioConfig attack_scenario(discovery::Variant variant, uint64_t seed);

} // namespace danesd::simnet
