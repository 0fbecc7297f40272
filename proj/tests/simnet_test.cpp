#include "doctest.h"

#include "danesd/simnet.hpp"

using namespace danesd;
using namespace danesd::simnet;
using discovery::Variant;

namespace {

ScenarioConfig small(Variant variant, uint64_t seed, int subs) {
  ScenarioConfig config = attack_scenario(variant, seed);
  config.plan.subscribers.clear();
  for (int i = 0; i < subs; ++i) {
    zoneforge::PlanSubscriber s;
    s.client.client_id = static_cast<uint16_t>(17 + i);
    s.client.scope = records::ClientScope{42, 1, 2};
    s.client.vehicle = "vehicle1.oem";
    s.target = config.plan.publishers[0].service;
    s.node = "b";
    config.plan.subscribers.push_back(s);
  }
  return config;
}

} // namespace

TEST_CASE("topology hop counts follow the star") {
  Topology t = Topology::ivn_star();
  CHECK(t.hops("lidar1", "lidar1") == 0);
  CHECK(t.hops("lidar1", "zc1") == 2);    // same zone switch
  CHECK(t.hops("lidar1", "hpc-adas") == 3); // zone switch to core host
  CHECK(t.hops("lidar1", "lidar2") == 4); // across two zone switches
}

TEST_CASE("small dnssec scenario establishes all subscriptions securely") {
  RunMetrics metrics = run_scenario(small(Variant::dnssec, 7, 3));
  CHECK(metrics.subscriptions_expected == 3);
  CHECK(metrics.subscriptions_established == 3);
  CHECK(metrics.insecure_acks == 0);
  CHECK(metrics.virtual_stats.at("service_setup").count == 1);
  CHECK(metrics.counters.at("dns_queries") > 0);
  CHECK(metrics.wall_stats.count("create_signature"));
  CHECK(metrics.wall_stats.count("verify_signature"));
  // All three subscribers hold the publisher's current group key.
  CHECK(metrics.counters.at("group_key_holders") == 3);
  CHECK(metrics.counters.at("group_key_mismatches") == 0);
}

TEST_CASE("vanilla variant runs without dns queries or crypto rows") {
  RunMetrics metrics = run_scenario(small(Variant::vanilla, 7, 3));
  CHECK(metrics.subscriptions_established == 3);
  CHECK(metrics.counters.count("dns_queries") == 0);
  CHECK_FALSE(metrics.wall_stats.count("create_signature"));
  CHECK_FALSE(metrics.wall_stats.count("verify_signature"));
}

TEST_CASE("pre-deployed variant authenticates without dns") {
  RunMetrics metrics = run_scenario(small(Variant::pre_deployed, 7, 2));
  CHECK(metrics.subscriptions_established == 2);
  CHECK(metrics.counters.count("dns_queries") == 0);
  CHECK(metrics.wall_stats.count("create_signature"));
}

TEST_CASE("identical config and seed reproduce identical deterministic csv") {
  ScenarioConfig config = small(Variant::dnssec, 1234, 4);
  RunMetrics a = run_scenario(config);
  RunMetrics b = run_scenario(config);
  CHECK(a.deterministic_csv() == b.deterministic_csv());
  CHECK(a.deterministic_csv() != "");

  ScenarioConfig other = config;
  other.seed = 1235;
  RunMetrics c = run_scenario(other);
  CHECK(a.deterministic_csv() != c.deterministic_csv());
}

TEST_CASE("message conservation holds under loss") {
  ScenarioConfig config = small(Variant::dnssec, 42, 4);
  config.loss_rate = 0.2;
  config.run_limit = 12 * kNsPerSec;
  RunMetrics metrics = run_scenario(config);

  uint64_t sent = metrics.counters.at("messages_sent");
  uint64_t delivered = metrics.counters.count("messages_delivered")
      ? metrics.counters.at("messages_delivered")
      : 0;
  uint64_t dropped =
      metrics.counters.count("messages_dropped") ? metrics.counters.at("messages_dropped") : 0;
  uint64_t blocked =
      metrics.counters.count("messages_blocked") ? metrics.counters.at("messages_blocked") : 0;
  uint64_t in_flight = metrics.counters.count("messages_in_flight")
      ? metrics.counters.at("messages_in_flight")
      : 0;
  CHECK(sent == delivered + dropped + blocked + in_flight);
  CHECK(dropped > 0);
  // Liveness under loss: repetitions and cyclic offers recover.
  CHECK(metrics.subscriptions_established == 4);
}

TEST_CASE("ivn plan matches the published aggregate statistics") {
  auto plan = generate_ivn_plan(7);
  CHECK(plan.publishers.size() == 212);
  CHECK(plan.subscribers.size() == 448);

  // Subscribers per publisher: mean 2.1, min 1, max 4.
  std::map<uint16_t, int> per_pub;
  for (const auto& p : plan.publishers)
    per_pub[p.service.service_id] = 0;
  for (const auto& s : plan.subscribers)
    per_pub[s.target.service_id] += 1;
  int min = 99, max = 0, sum = 0;
  for (const auto& [_, n] : per_pub) {
    min = std::min(min, n);
    max = std::max(max, n);
    sum += n;
  }
  CHECK(min == 1);
  CHECK(max == 4);
  double mean = static_cast<double>(sum) / static_cast<double>(per_pub.size());
  CHECK(mean > 2.0);
  CHECK(mean < 2.2);

  // Node quotas: publisher mean 16.3 (min 0, max 79), subscriber mean 34.5
  // (min 0, max 131).
  std::map<std::string, int> pubs_per_node, subs_per_node;
  for (const auto& h : Topology::ivn_star().hosts) {
    pubs_per_node[h.name] = 0;
    subs_per_node[h.name] = 0;
  }
  for (const auto& p : plan.publishers)
    pubs_per_node[p.node] += 1;
  for (const auto& s : plan.subscribers)
    subs_per_node[s.node] += 1;
  int pmax = 0, pmin = 999, smax = 0, smin = 999;
  for (const auto& [_, n] : pubs_per_node) {
    pmax = std::max(pmax, n);
    pmin = std::min(pmin, n);
  }
  for (const auto& [_, n] : subs_per_node) {
    smax = std::max(smax, n);
    smin = std::min(smin, n);
  }
  CHECK(pmax == 79);
  CHECK(pmin == 0);
  CHECK(smax == 131);
  CHECK(smin == 0);

  // Zone size formula: 2P + S record names.
  CHECK(2 * plan.publishers.size() + plan.subscribers.size() == 872);
}

TEST_CASE("spoofed offer succeeds under vanilla and is rejected under dnssec") {
  AdversaryScript script = builtin_script("spoofed_offer");

  AttackReport vanilla = run_attack(attack_scenario(Variant::vanilla, 5), script);
  CHECK(vanilla.any_succeeded);

  AttackReport dnssec = run_attack(attack_scenario(Variant::dnssec, 5), script);
  CHECK_FALSE(dnssec.any_succeeded);
  REQUIRE(dnssec.outcomes.size() == 1);
  CHECK(dnssec.outcomes[0].cause == discovery::RejectCause::svcb_mismatch);
}

TEST_CASE("all six scripts are rejected under dnssec with their causes") {
  using discovery::RejectCause;
  struct Expect {
    const char* script;
    RejectCause cause;
  };
  const Expect expected[] = {
      {"spoofed_offer", RejectCause::svcb_mismatch},
      {"spoofed_subscribe", RejectCause::bad_signature},
      {"forged_ack", RejectCause::bad_signature},
      {"forged_stop", RejectCause::bad_signature},
      {"replayed_response", RejectCause::stale_nonce},
      {"unauthorized_scope", RejectCause::unauthorized},
  };
  for (const auto& e : expected) {
    RunMetrics metrics;
    AttackReport report =
        run_attack(attack_scenario(Variant::dnssec, 11), builtin_script(e.script), &metrics);
    CAPTURE(e.script);
    CHECK_FALSE(report.any_succeeded);
    bool cause_seen = false;
    for (const auto& o : report.outcomes)
      cause_seen |= o.cause == e.cause;
    CHECK(cause_seen);
    // The legitimate subscription itself still goes through.
    CHECK(metrics.subscriptions_established == metrics.subscriptions_expected);
  }
}

TEST_CASE("offline run after preload never fetches upstream") {
  ScenarioConfig config = small(Variant::dnssec, 31, 3);
  config.disconnect_after_preload = true;
  RunMetrics metrics = run_scenario(config);
  CHECK(metrics.subscriptions_established == 3);
  CHECK(metrics.counters.at("upstream_fetches_during_run") == 0);
  CHECK(metrics.counters.at("preload_rejected") == 0);
}

TEST_CASE("scalability sweep completes for all variants") {
  for (Variant v : {Variant::vanilla, Variant::pre_deployed, Variant::dnssec}) {
    auto rows = run_scalability(v, 5, 99);
    REQUIRE(rows.size() == 5);
    for (const auto& row : rows) {
      CAPTURE(to_string(v));
      CAPTURE(row.subscribers);
      CHECK(row.established == row.subscribers);
    }
  }
}

TEST_CASE("scenario files parse with overrides and inline plans") {
  ScenarioConfig generated = parse_scenario("variant dnssec\nseed 9\ngenerate ivn\n");
  CHECK(generated.plan.publishers.size() == 212);
  CHECK(generated.seed == 9);

  ScenarioConfig inline_plan = parse_scenario(
      "variant vanilla\n"
      "topology tiny\n"
      "vehicle vehicle1.oem\n"
      "publisher service=42 instance=1 major=2 minor=3 endpoint=10.0.0.2:5000/udp node=a\n"
      "subscriber client=17 scope=service target=42/1/2 node=b\n");
  CHECK(inline_plan.variant == Variant::vanilla);
  CHECK(inline_plan.plan.publishers.size() == 1);
  RunMetrics metrics = run_scenario(inline_plan);
  CHECK(metrics.subscriptions_established == 1);
}
