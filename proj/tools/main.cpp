// Copyright (c) the danesd contributors. All rights reserved.
// Licensed under the Apache 2.0 License.

#include "danesd/resolver.hpp"
#include "danesd/simnet.hpp"
#include "danesd/wire.hpp"
#include "danesd/zoneforge.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace danesd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream os;
    os << std::cin.rdbuf();
    return os.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string strip_whitespace(std::string s) {
  std::string out;
  for (char c : s)
    if (!isspace(static_cast<unsigned char>(c)))
      out.push_back(c);
  return out;
}

json bundle_to_json(const zoneforge::SupplierBundle& bundle) {
  json j;
  if (const auto* pub = std::get_if<zoneforge::PublisherIdentity>(&bundle.identity)) {
    j["kind"] = "publisher";
    j["service"] = pub->service.service_id;
    j["instance"] = pub->service.instance_id;
    j["major"] = pub->service.major;
    j["minor"] = pub->service.minor;
    j["vehicle"] = pub->service.vehicle;
    j["endpoint"] = records::to_string(pub->endpoint);
  } else {
    const auto& sub = std::get<zoneforge::SubscriberIdentity>(bundle.identity);
    j["kind"] = "subscriber";
    j["client"] = sub.client.client_id;
    j["vehicle"] = sub.client.vehicle;
    if (sub.client.scope) {
      j["scope_service"] = sub.client.scope->service_id;
      j["scope_instance"] = sub.client.scope->instance_id;
      j["scope_major"] = sub.client.scope->major;
    }
    if (sub.client.domain)
      j["domain"] = *sub.client.domain;
  }
  j["certificate_der_b64"] = base64_encode(bundle.certificate.der);
  j["private_key_pem"] = bundle.keypair.private_key_pem();
  j["binary_digest_b64"] = base64_encode(bundle.binary_digest);
  j["supplier_signature_b64"] = base64_encode(bundle.supplier_signature);
  j["supplier"] = bundle.supplier_name;
  return j;
}

zoneforge::SupplierBundle bundle_from_json(const json& j) {
  zoneforge::SupplierBundle bundle;
  if (j.at("kind") == "publisher") {
    zoneforge::PublisherIdentity identity;
    identity.service.service_id = j.at("service").get<uint16_t>();
    identity.service.instance_id = j.at("instance").get<uint16_t>();
    identity.service.major = j.at("major").get<uint8_t>();
    identity.service.minor = j.at("minor").get<uint32_t>();
    identity.service.vehicle = j.at("vehicle").get<std::string>();
    identity.endpoint = records::endpoint_from_string(j.at("endpoint").get<std::string>());
    bundle.identity = identity;
  } else {
    zoneforge::SubscriberIdentity identity;
    identity.client.client_id = j.at("client").get<uint16_t>();
    identity.client.vehicle = j.at("vehicle").get<std::string>();
    if (j.contains("scope_service"))
      identity.client.scope =
          records::ClientScope{j.at("scope_service").get<uint16_t>(),
                               j.at("scope_instance").get<uint16_t>(),
                               j.at("scope_major").get<uint8_t>()};
    if (j.contains("domain"))
      identity.client.domain = j.at("domain").get<std::string>();
    bundle.identity = identity;
  }
  bundle.certificate =
      crypto::certificate_from_der(base64_decode(j.at("certificate_der_b64").get<std::string>()));
  bundle.keypair = crypto::KeyPair::from_private_pem(j.at("private_key_pem").get<std::string>(),
                                                     crypto::KeyUsage::identity);
  bundle.binary_digest = base64_decode(j.at("binary_digest_b64").get<std::string>());
  bundle.supplier_signature = base64_decode(j.at("supplier_signature_b64").get<std::string>());
  bundle.supplier_name = j.at("supplier").get<std::string>();
  return bundle;
}

crypto::KeyUsage usage_from_string(const std::string& s) {
  if (s == "identity")
    return crypto::KeyUsage::identity;
  if (s == "supplier")
    return crypto::KeyUsage::supplier;
  if (s == "zsk")
    return crypto::KeyUsage::zone_signing;
  if (s == "ksk")
    return crypto::KeyUsage::key_signing;
  throw std::runtime_error("unknown key usage: " + s);
}

int verify_zone(const dnssec::Zone& zone, const crypto::KeyPair& anchor, VirtualTime now) {
  dnssec::SignedRrSet dnskey;
  dnskey.rrset = zone.dnskey_rrset();
  dnskey.rrsig = zone.dnskey_rrsig();
  int bogus = 0;
  if (!dnskey.rrsig ||
      dnssec::validate_rrset(dnskey.rrset, *dnskey.rrsig, anchor, now) !=
          dnssec::ValidationStatus::secure) {
    std::cout << "BOGUS " << zone.apex() << " DNSKEY (delegation does not verify)\n";
    ++bogus;
  }
  for (const auto& [key, rrset] : zone.rrsets()) {
    dnssec::SignedRrSet data;
    data.rrset = rrset;
    auto sig = zone.rrsigs().find(key);
    if (sig != zone.rrsigs().end())
      data.rrsig = sig->second;
    auto status = dnssec::validate_chain(data, dnskey, anchor, now);
    if (status != dnssec::ValidationStatus::secure) {
      std::cout << "BOGUS " << key.first << " " << dnssec::to_string(key.second) << " ("
                << dnssec::to_string(status) << ")\n";
      ++bogus;
    }
  }
  if (bogus == 0) {
    std::cout << "zone " << zone.apex() << ": " << zone.rrset_count()
              << " rrsets validate Secure\n";
    return 0;
  }
  std::cout << bogus << " rrsets failed validation\n";
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"DNSSEC/DANE-authenticated service discovery toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  uint64_t seed = 1;
  bool verbose = false;
  app.add_option("--seed", seed, "seed for stochastic components")->capture_default_str();
  app.add_flag("-v,--verbose", verbose, "print per-event detail where available");
  app.set_config("--config", "", "read defaults from an ini-style file");

  if (argc <= 1) {
    std::cout << app.help();
    return 2;
  }

  // ---- wire ----
  auto* wire_cmd = app.add_subcommand("wire", "wire format utilities");
  wire_cmd->require_subcommand(1);
  auto* wire_dump = wire_cmd->add_subcommand("dump", "decode a hex message and pretty-print it");
  std::string wire_input = "-";
  wire_dump->add_option("input", wire_input, "file with hex bytes, or - for stdin");

  // ---- zone ----
  auto* zone_cmd = app.add_subcommand("zone", "zone lifecycle");
  zone_cmd->require_subcommand(1);

  auto* zone_keygen = zone_cmd->add_subcommand("keygen", "generate a signing key");
  std::string kg_usage = "zsk", kg_scheme = "rsa2048-sha256", kg_out = "key.pem";
  zone_keygen->add_option("--usage", kg_usage, "identity|supplier|zsk|ksk");
  zone_keygen->add_option("--scheme", kg_scheme, "rsa2048-sha256|ecdsa-p256-sha256");
  zone_keygen->add_option("-o,--out", kg_out, "output PEM path");
  std::string kg_pub;
  zone_keygen->add_option("--pub-out", kg_pub, "also write the public key PEM here");

  auto* zone_sign = zone_cmd->add_subcommand("sign", "sign every rrset in a zone file");
  std::string zs_zone, zs_zsk, zs_ksk, zs_out = "-";
  int64_t zs_now = 0;
  zone_sign->add_option("--zone", zs_zone, "zone file (unsigned or previously signed)")->required();
  zone_sign->add_option("--zsk", zs_zsk, "vehicle zone-signing key PEM")->required();
  zone_sign->add_option("--ksk", zs_ksk, "OEM key-signing key PEM")->required();
  zone_sign->add_option("-o,--out", zs_out, "signed zone output (- = stdout)");
  zone_sign->add_option("--now-sec", zs_now, "signing time, seconds of virtual time");

  auto* zone_verify = zone_cmd->add_subcommand("verify", "validate a signed zone file");
  std::string zv_zone, zv_anchor;
  int64_t zv_now = 0;
  zone_verify->add_option("--zone", zv_zone, "signed zone file")->required();
  zone_verify->add_option("--anchor", zv_anchor, "trust anchor public key PEM")->required();
  zone_verify->add_option("--now-sec", zv_now, "validation time, seconds of virtual time");

  auto* zone_preload = zone_cmd->add_subcommand("preload", "preload a resolver from the zone");
  std::string zp_zone, zp_anchor;
  bool zp_offline = false;
  int64_t zp_now = 0;
  zone_preload->add_option("--zone", zp_zone, "signed zone file")->required();
  zone_preload->add_option("--anchor", zp_anchor, "trust anchor public key PEM")->required();
  zone_preload->add_flag("--offline-check", zp_offline,
                         "after preload, disconnect and re-resolve everything from cache");
  zone_preload->add_option("--now-sec", zp_now, "preload time, seconds of virtual time");

  // ---- forge ----
  auto* forge_cmd = app.add_subcommand("forge", "credential lifecycle tooling");
  forge_cmd->require_subcommand(1);

  auto* forge_issue = forge_cmd->add_subcommand("issue", "issue a supplier bundle");
  std::string fi_supplier, fi_out = "bundle.json", fi_vehicle = "vehicle1.oem";
  std::string fi_endpoint, fi_scheme = "rsa2048-sha256", fi_binary;
  int64_t fi_not_before = 0, fi_days = 365;
  uint16_t fi_service = 0, fi_instance = 0, fi_client = 0;
  int fi_major = 0;
  uint32_t fi_minor = 0;
  bool fi_subscriber = false;
  uint16_t fi_scope_service = 0, fi_scope_instance = 0;
  int fi_scope_major = -1;
  forge_issue->add_option("--supplier", fi_supplier, "supplier signing key PEM")->required();
  forge_issue->add_option("--vehicle", fi_vehicle, "vehicle zone labels");
  forge_issue->add_flag("--subscriber", fi_subscriber, "issue a subscriber identity");
  forge_issue->add_option("--service", fi_service, "publisher service id");
  forge_issue->add_option("--instance", fi_instance, "publisher instance id");
  forge_issue->add_option("--major", fi_major, "publisher major version");
  forge_issue->add_option("--minor", fi_minor, "publisher minor version");
  forge_issue->add_option("--endpoint", fi_endpoint, "publisher endpoint a.b.c.d:port[/proto]");
  forge_issue->add_option("--client", fi_client, "subscriber client id");
  forge_issue->add_option("--scope-service", fi_scope_service, "subscriber scope: service id");
  forge_issue->add_option("--scope-instance", fi_scope_instance, "subscriber scope: instance");
  forge_issue->add_option("--scope-major", fi_scope_major, "subscriber scope: major version");
  forge_issue->add_option("--not-before-sec", fi_not_before, "validity start (virtual seconds)");
  forge_issue->add_option("--days", fi_days, "validity length in days");
  forge_issue->add_option("--scheme", fi_scheme, "identity key scheme");
  forge_issue->add_option("--binary", fi_binary, "software image the supplier signs");
  forge_issue->add_option("-o,--out", fi_out, "bundle JSON output");

  auto* forge_publish = forge_cmd->add_subcommand("publish", "publish a bundle into a zone");
  std::string fp_zone, fp_bundle, fp_supplier_pub, fp_zsk, fp_out = "-";
  int64_t fp_now = 0;
  forge_publish->add_option("--zone", fp_zone, "signed zone file")->required();
  forge_publish->add_option("--bundle", fp_bundle, "bundle JSON")->required();
  forge_publish->add_option("--supplier-pub", fp_supplier_pub, "supplier public key PEM")
      ->required();
  forge_publish->add_option("--zsk", fp_zsk, "vehicle ZSK PEM (re-signs touched rrsets)")
      ->required();
  forge_publish->add_option("-o,--out", fp_out, "updated zone output (- = stdout)");
  forge_publish->add_option("--now-sec", fp_now, "publication time");

  auto* forge_build = forge_cmd->add_subcommand("build", "build a complete vehicle zone");
  std::string fb_plan, fb_out = "zoneforge-out", fb_scheme = "ecdsa-p256-sha256";
  bool fb_bundles = false;
  forge_build->add_option("--plan", fb_plan, "plan file")->required();
  forge_build->add_option("-o,--out", fb_out, "output directory");
  forge_build->add_option("--scheme", fb_scheme, "identity key scheme");
  forge_build->add_flag("--bundles", fb_bundles, "also write bundles.json");

  auto* forge_audit = forge_cmd->add_subcommand("audit", "report certificates nearing expiry");
  std::string fa_zone;
  int64_t fa_horizon = 30, fa_now = 0;
  forge_audit->add_option("--zone", fa_zone, "signed zone file")->required();
  forge_audit->add_option("--horizon", fa_horizon, "horizon in days");
  forge_audit->add_option("--now-sec", fa_now, "audit time");

  // ---- sim ----
  auto* sim_cmd = app.add_subcommand("sim", "deterministic network simulation");
  sim_cmd->require_subcommand(1);

  auto* sim_run = sim_cmd->add_subcommand("run", "run a scenario and write metrics");
  std::string sr_scenario, sr_variant, sr_out = ".";
  double sr_loss = -1;
  bool sr_offline = false;
  sim_run->add_option("--scenario", sr_scenario, "scenario file (or 'ivn' for the built-in)")
      ->required();
  sim_run->add_option("--variant", sr_variant, "vanilla|pre-deployed|dnssec (overrides file)");
  sim_run->add_option("--loss", sr_loss, "message loss probability (overrides file)");
  sim_run->add_flag("--offline", sr_offline, "disconnect the zone source after preload");
  sim_run->add_option("--out", sr_out, "output directory");

  auto* sim_scale = sim_cmd->add_subcommand("scale", "1 publisher, 1..N subscribers sweep");
  std::string sc_variant = "dnssec", sc_out = ".";
  int sc_max = 50;
  sim_scale->add_option("--variant", sc_variant, "vanilla|pre-deployed|dnssec");
  sim_scale->add_option("--max", sc_max, "maximum subscriber count");
  sim_scale->add_option("--out", sc_out, "output directory");

  auto* sim_attack = sim_cmd->add_subcommand("attack", "run adversary scripts");
  std::string sa_script = "all", sa_variant = "dnssec", sa_out;
  sim_attack->add_option("--script", sa_script, "script name or 'all'");
  sim_attack->add_option("--variant", sa_variant, "vanilla|pre-deployed|dnssec");
  sim_attack->add_option("--out", sa_out, "write the report here as well");

  auto* sim_plot = sim_cmd->add_subcommand("plot-data", "scalability data for all variants");
  std::string sp_out = ".";
  int sp_max = 50;
  sim_plot->add_option("--max", sp_max, "maximum subscriber count");
  sim_plot->add_option("--out", sp_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*wire_dump) {
      Bytes bytes = from_hex(strip_whitespace(read_file(wire_input)));
      std::cout << wire::dump(wire::decode_message(bytes));
      return 0;
    }

    if (*zone_keygen) {
      crypto::KeyPair key = crypto::KeyPair::generate(crypto::scheme_from_string(kg_scheme),
                                                      usage_from_string(kg_usage));
      write_file(kg_out, key.private_key_pem());
      if (!kg_pub.empty())
        write_file(kg_pub, key.public_key_pem());
      std::cout << "wrote " << kg_out << " (" << kg_usage << ", " << kg_scheme << ")\n";
      return 0;
    }
    if (*zone_sign) {
      dnssec::Zone zone = dnssec::Zone::from_zone_file(read_file(zs_zone));
      zone.set_zsk(crypto::KeyPair::from_private_pem(read_file(zs_zsk),
                                                     crypto::KeyUsage::zone_signing));
      crypto::KeyPair ksk =
          crypto::KeyPair::from_private_pem(read_file(zs_ksk), crypto::KeyUsage::key_signing);
      zone.sign(zs_now * kNsPerSec, &ksk);
      std::string text = zone.to_zone_file();
      if (zs_out == "-")
        std::cout << text;
      else
        write_file(zs_out, text);
      std::cout << "signed " << zone.rrset_count() << " rrsets in " << zone.apex() << "\n";
      return 0;
    }
    if (*zone_verify) {
      dnssec::Zone zone = dnssec::Zone::from_zone_file(read_file(zv_zone));
      crypto::KeyPair anchor =
          crypto::KeyPair::from_public_pem(read_file(zv_anchor), crypto::KeyUsage::key_signing);
      return verify_zone(zone, anchor, zv_now * kNsPerSec);
    }
    if (*zone_preload) {
      dnssec::Zone zone = dnssec::Zone::from_zone_file(read_file(zp_zone));
      crypto::KeyPair anchor =
          crypto::KeyPair::from_public_pem(read_file(zp_anchor), crypto::KeyUsage::key_signing);
      dnssec::ZoneBackedSource source(&zone);
      dnssec::Resolver resolver(std::move(anchor));
      resolver.set_source(&source);
      VirtualTime now = zp_now * kNsPerSec;
      auto report = resolver.preload(now);
      std::cout << "preloaded " << report.cached << " rrsets, rejected " << report.rejected
                << "\n";
      for (const auto& name : report.rejected_names)
        std::cout << "rejected " << name << "\n";
      if (zp_offline) {
        source.set_connected(false);
        uint64_t fetches = resolver.upstream_fetches();
        size_t secure = 0, total = 0;
        for (const auto& [key, _] : zone.rrsets()) {
          ++total;
          auto result = resolver.resolve(key.first, key.second, now + kNsPerSec);
          if (result.status == dnssec::ValidationStatus::secure && result.from_cache)
            ++secure;
        }
        bool ok = secure == total && resolver.upstream_fetches() == fetches;
        std::cout << "offline check: " << secure << "/" << total
                  << " served Secure from cache, upstream fetches during check: "
                  << (resolver.upstream_fetches() - fetches) << "\n";
        if (!ok)
          return 1;
      }
      return report.rejected == 0 ? 0 : 1;
    }

    if (*forge_issue) {
      crypto::KeyPair supplier =
          crypto::KeyPair::from_private_pem(read_file(fi_supplier), crypto::KeyUsage::supplier);
      zoneforge::Identity identity;
      if (fi_subscriber) {
        records::ClientKey client;
        client.client_id = fi_client;
        client.vehicle = fi_vehicle;
        if (fi_scope_major >= 0)
          client.scope = records::ClientScope{fi_scope_service, fi_scope_instance,
                                              static_cast<uint8_t>(fi_scope_major)};
        identity = zoneforge::SubscriberIdentity{client};
      } else {
        records::ServiceKey service{fi_service, fi_instance, static_cast<uint8_t>(fi_major),
                                    fi_minor, std::nullopt, fi_vehicle};
        identity = zoneforge::PublisherIdentity{service,
                                                records::endpoint_from_string(fi_endpoint)};
      }
      Bytes binary = fi_binary.empty() ? Bytes{0xB1, 0x4A, 0x17}
                                       : Bytes(read_file(fi_binary).begin(),
                                               read_file(fi_binary).end());
      zoneforge::SupplierBundle bundle = zoneforge::supplier_issue(
          identity, {fi_not_before, fi_not_before + fi_days * 86400}, supplier, "supplier",
          crypto::scheme_from_string(fi_scheme), binary);
      write_file(fi_out, bundle_to_json(bundle).dump(2) + "\n");
      std::cout << "issued " << zoneforge::tlsa_name_of(identity) << " -> " << fi_out << "\n";
      return 0;
    }
    if (*forge_publish) {
      dnssec::Zone zone = dnssec::Zone::from_zone_file(read_file(fp_zone));
      zone.set_zsk(crypto::KeyPair::from_private_pem(read_file(fp_zsk),
                                                     crypto::KeyUsage::zone_signing));
      zoneforge::SupplierBundle bundle = bundle_from_json(json::parse(read_file(fp_bundle)));
      crypto::KeyPair supplier_pub = crypto::KeyPair::from_public_pem(read_file(fp_supplier_pub),
                                                                      crypto::KeyUsage::supplier);
      zoneforge::oem_publish(zone, bundle, supplier_pub, fp_now * kNsPerSec);
      std::string text = zone.to_zone_file();
      if (fp_out == "-")
        std::cout << text;
      else
        write_file(fp_out, text);
      std::cout << "published " << zoneforge::tlsa_name_of(bundle.identity) << "\n";
      return 0;
    }
    if (*forge_build) {
      zoneforge::VehicleZonePlan plan = zoneforge::parse_plan(read_file(fb_plan));
      crypto::SignatureScheme scheme = crypto::scheme_from_string(fb_scheme);
      crypto::KeyPair supplier = crypto::KeyPair::generate(scheme, crypto::KeyUsage::supplier);
      crypto::KeyPair zsk = crypto::KeyPair::generate(scheme, crypto::KeyUsage::zone_signing);
      crypto::KeyPair ksk = crypto::KeyPair::generate(scheme, crypto::KeyUsage::key_signing);
      crypto::KeyPair supplier_pub = crypto::KeyPair::from_public_key_der(
          supplier.public_key_der(), scheme, crypto::KeyUsage::supplier);
      auto bundles = zoneforge::issue_for_plan(plan, supplier, "supplier", {0, 86400L * 365},
                                               scheme);
      dnssec::Zone zone =
          zoneforge::build_vehicle_zone(plan, bundles, supplier_pub, std::move(zsk), ksk, 0);

      fs::create_directories(fb_out);
      write_file(fb_out + "/vehicle.zone", zone.to_zone_file());
      write_file(fb_out + "/zsk.pem", zone.zsk().private_key_pem());
      write_file(fb_out + "/ksk.pem", ksk.private_key_pem());
      write_file(fb_out + "/anchor.pem", ksk.public_key_pem());
      write_file(fb_out + "/supplier.pem", supplier.private_key_pem());
      write_file(fb_out + "/supplier_pub.pem", supplier.public_key_pem());
      if (fb_bundles) {
        json arr = json::array();
        for (const auto& b : bundles)
          arr.push_back(bundle_to_json(b));
        write_file(fb_out + "/bundles.json", arr.dump(2) + "\n");
      }
      std::cout << "built zone " << zone.apex() << ": " << zone.record_name_count()
                << " record names, " << zone.rrset_count() << " rrsets -> " << fb_out << "\n";
      return 0;
    }
    if (*forge_audit) {
      dnssec::Zone zone = dnssec::Zone::from_zone_file(read_file(fa_zone));
      auto report = zoneforge::audit_expiring(zone, fa_now * kNsPerSec, fa_horizon * 86400);
      for (const auto& entry : report)
        std::cout << "expiring " << entry.name << " not_after=" << entry.not_after << "s\n";
      std::cout << report.size() << " certificates expire within " << fa_horizon << " days\n";
      return 0;
    }

    if (*sim_run) {
      simnet::ScenarioConfig config;
      if (sr_scenario == "ivn")
        config = simnet::ivn_scenario(discovery::Variant::dnssec, seed);
      else
        config = simnet::parse_scenario(read_file(sr_scenario));
      if (app.count("--seed")) {
        config.seed = seed;
        if (sr_scenario == "ivn")
          config.plan = simnet::generate_ivn_plan(seed);
      }
      if (!sr_variant.empty())
        config.variant = discovery::variant_from_string(sr_variant);
      if (sr_loss >= 0)
        config.loss_rate = sr_loss;
      if (sr_offline)
        config.disconnect_after_preload = true;

      simnet::RunMetrics metrics = simnet::run_scenario(config);
      fs::create_directories(sr_out);
      write_file(sr_out + "/metrics.csv", metrics.to_csv());
      std::string log;
      for (const auto& line : metrics.rejection_log)
        log += line + "\n";
      write_file(sr_out + "/rejections.log", log);
      if (verbose)
        std::cout << log;
      std::cout << "variant=" << to_string(config.variant) << " subscriptions "
                << metrics.subscriptions_established << "/" << metrics.subscriptions_expected
                << ", insecure acks " << metrics.insecure_acks << "\n";
      std::cout << "metrics -> " << sr_out << "/metrics.csv\n";
      return metrics.subscriptions_established == metrics.subscriptions_expected ? 0 : 1;
    }
    if (*sim_scale) {
      auto rows = simnet::run_scalability(discovery::variant_from_string(sc_variant), sc_max,
                                          seed);
      fs::create_directories(sc_out);
      std::string path = sc_out + "/scalability-" + sc_variant + ".csv";
      write_file(path, simnet::scalability_csv(rows));
      std::cout << "wrote " << path << "\n";
      return 0;
    }
    if (*sim_attack) {
      std::vector<std::string> names = sa_script == "all"
          ? simnet::builtin_script_names()
          : std::vector<std::string>{sa_script};
      std::string full_report;
      int rc = 0;
      for (const auto& name : names) {
        auto report = simnet::run_attack(
            simnet::attack_scenario(discovery::variant_from_string(sa_variant), seed),
            simnet::builtin_script(name));
        full_report += report.to_text() + "\n";
        std::cout << report.to_text() << "\n";
      }
      if (!sa_out.empty())
        write_file(sa_out, full_report);
      return rc;
    }
    if (*sim_plot) {
      fs::create_directories(sp_out);
      for (auto variant : {discovery::Variant::vanilla, discovery::Variant::pre_deployed,
                           discovery::Variant::dnssec}) {
        auto rows = simnet::run_scalability(variant, sp_max, seed);
        std::string path = sp_out + "/scalability-" + to_string(variant) + ".csv";
        write_file(path, simnet::scalability_csv(rows));
        std::cout << "wrote " << path << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
