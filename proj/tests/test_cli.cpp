#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "wigtomo/cli.hpp"
#include "wigtomo/io.hpp"

using namespace wigtomo;
namespace cli = wigtomo::cli;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::string> kSmall = {"--segments", "2000", "--vacuum-segments", "2000",
                                         "--samples", "200"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kExitInput);
  CHECK(run({"bogus"}).code == cli::kExitInput);
  CHECK(run({"simulate", "--segments", "ten"}).code == cli::kExitInput);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("full command chain") {
  testsupport::TempDir dir("cli");
  const std::string out = dir.path().string();

  auto sim = run(with({"simulate", "--out", out, "--seed", "21"}, kSmall));
  REQUIRE(sim.code == cli::kExitOk);
  CHECK(sim.out.find("seed 21") != std::string::npos);
  CHECK(read_batch(dir / "heralded.hseg").size() == 2000);

  auto ex = run({"extract", "--out", out});
  REQUIRE(ex.code == cli::kExitOk);
  const auto vac = read_quadratures_csv(dir / "vacuum_quadratures.csv");
  CHECK(sample_variance(vac.data.values) == doctest::Approx(0.5).epsilon(0.02));
  CHECK(vac.metadata["seed"] == 21);
  CHECK(fs::exists(dir / "mode.csv"));
  CHECK(fs::exists(dir / "variance_trace.csv"));

  auto rec = run({"reconstruct", "--out", out});
  REQUIRE(rec.code == cli::kExitOk);
  const json r = read_json(dir / "reconstruction.json");
  CHECK(r["seed"] == 21);
  CHECK(r["em"]["p"].size() == 6);
  CHECK(r["least_squares"]["p"].size() == 6);
  CHECK(r["histogram"]["counts"].size() == 100);
  const double p1 = r["em"]["p"][1].get<double>();
  CHECK(p1 > 0.45);
  CHECK(p1 < 0.7);

  auto an = run({"analyze", "--out", out, "--replicas", "2", "--resolution", "51"});
  REQUIRE(an.code == cli::kExitOk);
  CHECK(an.err.find("unreliable") != std::string::npos);
  CHECK(an.out.find("W(0,0) = -") != std::string::npos);
  CHECK(an.out.find("sigma)") != std::string::npos);
  const json b = read_json(dir / "bootstrap.json");
  CHECK(b["bootstrap"]["replicas"] == 2);
  CHECK(b["seed"] == 21);
  CHECK(fs::exists(dir / "wigner_grid.pgm"));

  auto grid_only = run({"analyze", "--out", (dir / "g").string(), "--reconstruction",
                        (dir / "reconstruction.json").string(), "--resolution", "21"});
  CHECK(grid_only.code == cli::kExitOk);
  CHECK(grid_only.out.find("no bootstrap") != std::string::npos);
}

TEST_CASE("simulation is reproducible") {
  testsupport::TempDir a("cli_a");
  testsupport::TempDir b("cli_b");
  REQUIRE(run({"simulate", "--out", a.path().string(), "--segments", "10", "--vacuum-segments", "10",
               "--seed", "5"}).code == 0);
  REQUIRE(run({"simulate", "--out", b.path().string(), "--segments", "10", "--vacuum-segments", "10",
               "--seed", "5"}).code == 0);
  CHECK(read_batch(a / "heralded.hseg").size() == 10);
  for (const char* name : {"heralded.hseg", "vacuum.hseg", "heralded.hseg.json"}) {
    CHECK(slurp(a / name) == slurp(b / name));
  }
}

TEST_CASE("no-signal and corrupt inputs") {
  testsupport::TempDir dir("cli_bad");
  const std::string out = dir.path().string();
  REQUIRE(run(with({"simulate", "--out", out}, kSmall)).code == 0);

  auto vac_as_heralded = run({"extract", "--out", out, "--heralded", (dir / "vacuum.hseg").string()});
  CHECK(vac_as_heralded.code == cli::kExitNoSignal);
  CHECK(vac_as_heralded.err.find("no signal") != std::string::npos);

  {
    std::fstream f(dir / "heralded.hseg", std::ios::in | std::ios::out | std::ios::binary);
    f.write("JUNK", 4);
  }
  auto corrupt = run({"extract", "--out", out});
  CHECK(corrupt.code == cli::kExitInput);
  CHECK(corrupt.err.find("magic") != std::string::npos);

  CHECK(run({"extract", "--out", (dir / "nothing").string()}).code == cli::kExitInput);

  std::ofstream(dir / "empty.csv").close();
  CHECK(run({"reconstruct", "--out", out, "--input", (dir / "empty.csv").string()}).code ==
        cli::kExitInput);
  CHECK(run({"analyze", "--out", out, "--input", (dir / "empty.csv").string()}).code ==
        cli::kExitInput);
}

TEST_CASE("reconstruction failure maps to exit 4") {
  testsupport::TempDir dir("cli_fail");
  // Every Fock density underflows to zero at x = 40, so the likelihood vanishes.
  {
    std::ofstream q(dir / "q.csv");
    for (int i = 0; i < 50; ++i) q << (i - 25) * 0.1 << "\n";
    q << "40\n";
  }
  const std::string out = dir.path().string();
  const std::string input = (dir / "q.csv").string();
  auto r = run({"reconstruct", "--out", out, "--input", input});
  CHECK(r.code == cli::kExitReconstruction);
  CHECK(r.err.find("zero mixture density") != std::string::npos);
  CHECK(run({"analyze", "--out", out, "--input", input, "--replicas", "2"}).code ==
        cli::kExitReconstruction);
}

TEST_CASE("cutoff 1 on vacuum data") {
  testsupport::TempDir dir("cli_vac");
  const std::string out = dir.path().string();
  REQUIRE(run(with({"simulate", "--out", out}, kSmall)).code == 0);
  REQUIRE(run({"extract", "--out", out}).code == 0);
  auto r = run({"reconstruct", "--out", out, "--cutoff", "1", "--input",
                (dir / "vacuum_quadratures.csv").string()});
  REQUIRE(r.code == 0);
  const json j = read_json(dir / "reconstruction.json");
  CHECK(j["em"]["p"][0].get<double>() > 0.97);
  CHECK(j["em"]["p"][1].get<double>() < 0.03);

  auto a = run({"analyze", "--out", out, "--cutoff", "1", "--replicas", "30", "--resolution", "21",
                "--input", (dir / "vacuum_quadratures.csv").string()});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("(0.0 sigma)") != std::string::npos);
  CHECK(a.out.find("W(0,0) = 0.") != std::string::npos);
}

TEST_CASE("configuration precedence") {
  testsupport::TempDir dir("cli_cfg");
  const fs::path cfg = dir / "run.json";
  write_json(cfg, json{{"simulation", {{"segments", 20}, {"vacuum_segments", 4}, {"samples_per_segment", 100}}},
                       {"seed", 8}});

  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
  CHECK(read_batch(dir / "a" / "heralded.hseg").size() == 20);
  CHECK(read_json(dir / "a" / "heralded.hseg.json")["seed"] == 8);

  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "b").string(), "--segments",
               "10", "--seed", "9"}).code == 0);
  CHECK(read_batch(dir / "b" / "heralded.hseg").size() == 10);
  CHECK(read_batch(dir / "b" / "vacuum.hseg").size() == 4);
  CHECK(read_json(dir / "b" / "heralded.hseg.json")["seed"] == 9);

  write_json(dir / "bad.json", json{{"segmnts", 3}});
  CHECK(run({"simulate", "--config", (dir / "bad.json").string(), "--out", (dir / "c").string()})
            .code == cli::kExitInput);
  CHECK(run({"simulate", "--config", (dir / "missing.json").string()}).code == cli::kExitInput);
  CHECK(run({"simulate", "--out", (dir / "c").string(), "--segments", "0"}).code == cli::kExitInput);
}

TEST_CASE("output directory from the environment") {
  testsupport::TempDir dir("cli_env");
  ::setenv(cli::kOutputDirEnv, dir.path().string().c_str(), 1);
  const auto r = run({"simulate", "--segments", "3", "--vacuum-segments", "3", "--samples", "50",
                      "--config", (dir / "none.json").string()});
  CHECK(r.code == cli::kExitInput);
  CHECK(run({"simulate", "--segments", "3", "--vacuum-segments", "3", "--samples", "50"}).code == 0);
  ::unsetenv(cli::kOutputDirEnv);
  CHECK(fs::exists(dir / "heralded.hseg"));
}

TEST_CASE("quick reproduction") {
  testsupport::TempDir a("cli_rep_a");
  testsupport::TempDir b("cli_rep_b");
  const auto r = run({"reproduce", "--quick", "--out", a.path().string()});
  CHECK(r.code == cli::kExitOk);
  REQUIRE(run({"reproduce", "--quick", "--out", b.path().string()}).code == cli::kExitOk);
  CHECK(slurp(a / "reproduce_report.json") == slurp(b / "reproduce_report.json"));
  const json rep = read_json(a / "reproduce_report.json");
  CHECK(rep["quick"] == true);
  CHECK(rep["bootstrap"]["replicas"] == 50);
  CHECK(rep["criteria"].size() == 5);
  CHECK(rep["all_pass"] == true);
  CHECK(rep["seed"] == 1550);
}
