#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Exec {
  int exit_code = -1;
  std::string output;
};

Exec run(const std::string& args) {
  std::string cmd = std::string(DANESD_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  Exec result;
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe))
    result.output += buf;
  int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("danesd_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

const char* kPlan =
    "vehicle vehicle1.oem\n"
    "publisher service=42 instance=1 major=2 minor=3 endpoint=10.0.0.2:5000/udp node=a\n"
    "subscriber client=17 scope=service target=42/1/2 node=b\n";

const char* kTinyScenario =
    "variant dnssec\n"
    "topology tiny\n"
    "vehicle vehicle1.oem\n"
    "publisher service=42 instance=1 major=2 minor=3 endpoint=10.0.0.2:5000/udp node=a\n"
    "subscriber client=17 scope=service target=42/1/2 node=b\n";

} // namespace

TEST_CASE("no arguments prints help and exits 2") {
  Exec r = run("");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("Usage") != std::string::npos);
}

TEST_CASE("wire dump renders a hex message") {
  TempDir tmp;
  write(tmp / "msg.hex",
        "ffff8100000000300000000101010200c00000000000001001000010002a0001020000030000"
        "00030000000c000904000a00000200111388");
  Exec r = run("wire dump " + (tmp / "msg.hex"));
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("Offer") != std::string::npos);
  CHECK(r.output.find("10.0.0.2:5000") != std::string::npos);
}

TEST_CASE("forge build, zone verify, preload, audit round trip") {
  TempDir tmp;
  write(tmp / "plan.txt", kPlan);
  Exec build = run("forge build --plan " + (tmp / "plan.txt") + " -o " + (tmp / "out"));
  CHECK(build.exit_code == 0);
  CHECK(build.output.find("3 record names") != std::string::npos);

  Exec verify =
      run("zone verify --zone " + (tmp / "out/vehicle.zone") + " --anchor " + (tmp / "out/anchor.pem"));
  CHECK(verify.exit_code == 0);
  CHECK(verify.output.find("validate Secure") != std::string::npos);

  Exec preload = run("zone preload --zone " + (tmp / "out/vehicle.zone") + " --anchor " +
                     (tmp / "out/anchor.pem") + " --offline-check");
  CHECK(preload.exit_code == 0);
  CHECK(preload.output.find("upstream fetches during check: 0") != std::string::npos);

  Exec audit = run("forge audit --zone " + (tmp / "out/vehicle.zone") + " --horizon 400");
  CHECK(audit.exit_code == 0);
  CHECK(audit.output.find("2 certificates expire") != std::string::npos);
}

TEST_CASE("zone verify names the tampered record and fails") {
  TempDir tmp;
  write(tmp / "plan.txt", kPlan);
  REQUIRE(run("forge build --plan " + (tmp / "plan.txt") + " -o " + (tmp / "out")).exit_code == 0);

  std::ifstream in(tmp / "out/vehicle.zone");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string zone = ss.str();
  auto at = zone.find("ipv4hint=10.0.0.2");
  REQUIRE(at != std::string::npos);
  zone.replace(at, 17, "ipv4hint=10.0.0.9");
  write(tmp / "tampered.zone", zone);

  Exec verify =
      run("zone verify --zone " + (tmp / "tampered.zone") + " --anchor " + (tmp / "out/anchor.pem"));
  CHECK(verify.exit_code == 1);
  CHECK(verify.output.find("BOGUS _someip.3.2.1.42.service.vehicle1.oem.") != std::string::npos);
}

TEST_CASE("zone sign re-signs a zone that then verifies") {
  TempDir tmp;
  write(tmp / "plan.txt", kPlan);
  REQUIRE(run("forge build --plan " + (tmp / "plan.txt") + " -o " + (tmp / "out")).exit_code == 0);

  Exec sign = run("zone sign --zone " + (tmp / "out/vehicle.zone") + " --zsk " +
                  (tmp / "out/zsk.pem") + " --ksk " + (tmp / "out/ksk.pem") + " --now-sec 1000 -o " +
                  (tmp / "resigned.zone"));
  CHECK(sign.exit_code == 0);
  Exec verify = run("zone verify --zone " + (tmp / "resigned.zone") + " --anchor " +
                    (tmp / "out/anchor.pem") + " --now-sec 1000");
  CHECK(verify.exit_code == 0);
}

TEST_CASE("forge issue and publish add a coexisting certificate") {
  TempDir tmp;
  write(tmp / "plan.txt", kPlan);
  REQUIRE(run("forge build --plan " + (tmp / "plan.txt") + " -o " + (tmp / "out")).exit_code == 0);

  Exec issue = run("forge issue --supplier " + (tmp / "out/supplier.pem") +
                   " --service 42 --instance 1 --major 2 --minor 3 --endpoint 10.0.0.2:5000/udp" +
                   " --vehicle vehicle1.oem --days 30 --scheme ecdsa-p256-sha256 -o " +
                   (tmp / "bundle.json"));
  CHECK(issue.exit_code == 0);
  CHECK(issue.output.find("_5000._someip.3.2.1.42.service.vehicle1.oem.") != std::string::npos);

  Exec publish = run("forge publish --zone " + (tmp / "out/vehicle.zone") + " --bundle " +
                     (tmp / "bundle.json") + " --supplier-pub " + (tmp / "out/supplier_pub.pem") +
                     " --zsk " + (tmp / "out/zsk.pem") + " -o " + (tmp / "updated.zone"));
  CHECK(publish.exit_code == 0);

  std::ifstream in(tmp / "updated.zone");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string zone = ss.str();
  size_t first = zone.find("_5000._someip.3.2.1.42.service.vehicle1.oem. 86400 IN TLSA");
  size_t second = zone.find("_5000._someip.3.2.1.42.service.vehicle1.oem. 86400 IN TLSA", first + 1);
  CHECK(first != std::string::npos);
  CHECK(second != std::string::npos);
}

TEST_CASE("sim run writes a metrics csv") {
  TempDir tmp;
  write(tmp / "tiny.scn", kTinyScenario);
  Exec r = run("sim run --scenario " + (tmp / "tiny.scn") + " --out " + (tmp / "sim") + " --seed 7");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("subscriptions 1/1") != std::string::npos);
  CHECK(fs::exists(tmp / "sim/metrics.csv"));

  std::ifstream in(tmp / "sim/metrics.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("service_setup,virtual") != std::string::npos);
}

TEST_CASE("sim attack differentiates vanilla and dnssec") {
  Exec vanilla = run("sim attack --script spoofed_offer --variant vanilla");
  CHECK(vanilla.exit_code == 0);
  CHECK(vanilla.output.find("attack-succeeded") != std::string::npos);

  Exec dnssec = run("sim attack --script spoofed_offer --variant dnssec");
  CHECK(dnssec.exit_code == 0);
  CHECK(dnssec.output.find("all-rejected") != std::string::npos);
  CHECK(dnssec.output.find("cause=SvcbMismatch") != std::string::npos);
}

TEST_CASE("sim scale writes the sweep csv") {
  TempDir tmp;
  Exec r = run("sim scale --variant vanilla --max 3 --out " + (tmp / "scale") + " --seed 5");
  CHECK(r.exit_code == 0);
  std::ifstream in(tmp / "scale/scalability-vanilla.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "sub_count,established,setup_delay_mean_ms,setup_incl_compute_mean_ms");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty())
      ++rows;
  CHECK(rows == 3);
}
