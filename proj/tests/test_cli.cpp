#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "datpg/builtin_circuits.hpp"
#include "datpg/cli.hpp"

using namespace datpg;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "datpg_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& dir, const std::string& name, std::string_view text) {
  const fs::path p = dir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("atpg writes every output") {
  const fs::path dir = scratch("atpg");
  const auto c17 = write(dir, "c17.bench", c17_bench()).string();
  const Run r = cli({"atpg", "--netlist", c17, "--budget", "32", "--seed", "1",
                     "--out", (dir / "out").string()});
  CHECK(r.code == 0);
  for (const char* f : {"patterns.txt", "summary.json", "trace.csv", "coverage.csv", "report.csv"}) {
    CHECK(fs::exists(dir / "out" / f));
  }
  const std::string summary = slurp(dir / "out" / "summary.json");
  CHECK(summary.find("\"total_faults\": 34") != std::string::npos);
  CHECK(summary.find("\"detected\": 34") != std::string::npos);
  CHECK(summary.find("wall_time") == std::string::npos);
}

TEST_CASE("input errors map to exit codes") {
  const fs::path dir = scratch("errors");
  const auto c17 = write(dir, "c17.bench", c17_bench()).string();
  CHECK(cli({"atpg", "--netlist", (dir / "missing.bench").string()}).code == 2);
  CHECK(cli({"atpg", "--netlist", c17, "--budget", "0"}).code == 4);
  CHECK(cli({"atpg", "--netlist", c17, "--no-such-flag"}).code == 4);
  const auto bad_faults = write(dir, "bad.faults", "nosuch 1\n").string();
  CHECK(cli({"atpg", "--netlist", c17, "--faults", bad_faults}).code == 3);
  const auto broken = write(dir, "broken.bench", "INPUT(a)\nOUTPUT(z)\nz = AND(a)\n").string();
  const Run r = cli({"oracle", "--netlist", broken});
  CHECK(r.code == 2);
  CHECK(r.err.find("ArityViolation") != std::string::npos);
}

TEST_CASE("oracle verdicts") {
  const fs::path dir = scratch("oracle");
  const auto x = write(dir, "x.bench", xnor_bench()).string();
  const auto f = write(dir, "x.faults", "z 1\n").string();
  const Run r = cli({"oracle", "--netlist", x, "--faults", f});
  CHECK(r.code == 0);
  CHECK(r.out == "fault_id,site_net,stuck_value,verdict,witness\n0,z,1,detectable,01\n");
  const auto red = write(dir, "r.bench", redundant_bench()).string();
  const auto rf = write(dir, "r.faults", "y 0\n").string();
  CHECK(cli({"oracle", "--netlist", red, "--faults", rf}).out.find("redundant") != std::string::npos);

  RandomCircuitOptions opt;
  opt.num_pis = 30;
  opt.num_gates = 40;
  const auto big = write(dir, "big.bench", write_bench(random_circuit(opt, 2))).string();
  CHECK(cli({"oracle", "--netlist", big}).code == 5);
}

TEST_CASE("faultsim on a pattern file") {
  const fs::path dir = scratch("faultsim");
  const auto x = write(dir, "x.bench", xnor_bench()).string();
  const auto p = write(dir, "x.pat", "01\n11\n").string();
  const auto f = write(dir, "x.faults", "z 1\nz 0\n").string();
  const Run r = cli({"faultsim", "--netlist", x, "--faults", f, "--patterns", p});
  CHECK(r.code == 0);
  CHECK(r.out == "fault_id,site_net,stuck_value,detected_by\n0,z,1,0\n1,z,0,1\n");
  const auto wrong = write(dir, "w.pat", "011\n").string();
  CHECK(cli({"faultsim", "--netlist", x, "--patterns", wrong}).code == 2);
}

TEST_CASE("selftest") {
  const Run ok = cli({"selftest", "--seeds", "2"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS gradient") != std::string::npos);
  CHECK(ok.out.find("2 seed(s)") != std::string::npos);
  const Run bug = cli({"selftest", "--inject-bug"});
  CHECK(bug.code == 1);
  CHECK(bug.out.find("FAIL gradient") != std::string::npos);
}

TEST_CASE("help lists the defaults") {
  const Run r = cli({"atpg", "--help"});
  CHECK(r.code == 0);
  for (const char* s : {"--T UINT [4]", "--K UINT [8]", "--max-iters UINT [1000]",
                        "--tau-start FLOAT [5]", "--tau-end FLOAT [0.5]", "--lr FLOAT [0.1]",
                        "--explore-frac FLOAT [0.5]", "--seed UINT [0]", "--x-lo FLOAT [0.0001]",
                        "--x-hi FLOAT [0.9999]", "--init-jitter FLOAT [0.01]"}) {
    CHECK_MESSAGE(r.out.find(s) != std::string::npos, s);
  }
}

}  // TEST_SUITE
