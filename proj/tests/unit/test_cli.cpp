#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ntkreg/cli.hpp"
#include "ntkreg/csv.hpp"

using namespace ntkreg;

TEST_SUITE("cli") {
  TEST_CASE("a full rate command line parses into its config") {
    const std::filesystem::path dir = testutil::temp_dir("cli-parse");
    const CliInvocation inv = parse_invocation(
        {"rate", "--n-grid", "32,64,128", "--d", "3", "--sigma", "0.5", "--seed", "7",
         "--out", (dir / "out").string()});
    CHECK(inv.command == CliCommand::Rate);
    CHECK(inv.cfg.kind == ExperimentKind::Rate);
    REQUIRE(inv.cfg.n_grid.size() == 3);
    CHECK(inv.cfg.n_grid[0] == 32);
    CHECK(inv.cfg.n_grid[2] == 128);
    CHECK(inv.cfg.sigma == 0.5);
    CHECK(inv.cfg.seed == 7);
    CHECK(inv.cfg.out_dir == (dir / "out").string());
    REQUIRE(!inv.cfg.invocation.empty());
    CHECK(inv.cfg.invocation[0] == "rate");
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("a missing seed is reported by name on one line") {
    try {
      parse_invocation({"spectrum", "--n-grid", "32", "--out", "/tmp/x"});
      FAIL("expected a usage error");
    } catch (const CliUsageError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("seed") != std::string::npos);
      CHECK(msg.find('\n') == std::string::npos);
    }
  }

  TEST_CASE("an out-of-range step size is reported by name") {
    try {
      parse_invocation({"convergence", "--seed", "1", "--out", "/tmp/x", "--eta", "0.9"});
      FAIL("expected a usage error");
    } catch (const CliUsageError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("eta") != std::string::npos);
    }
  }

  TEST_CASE("unknown subcommands are rejected") {
    CHECK_THROWS_AS(parse_invocation({"frobnicate", "--seed", "1"}), CliUsageError);
    CHECK_THROWS_AS(parse_invocation({}), CliUsageError);
  }

  TEST_CASE("kernel evaluation prints the exact shortest round-trip value") {
    const CliInvocation inv = parse_invocation({"kernel-eval", "--dot", "0.5"});
    CHECK(inv.command == CliCommand::KernelEval);
    std::ostringstream out, err;
    const int status = run(inv, out, err);
    CHECK(status == 0);
    CHECK(out.str() == "0.16666666666666666\n");
    CHECK(err.str().empty());
  }

  TEST_CASE("help requests parse to printable text") {
    const CliInvocation inv = parse_invocation({"--help"});
    CHECK(inv.command == CliCommand::Help);
    std::ostringstream out, err;
    const int status = run(inv, out, err);
    CHECK(status == 0);
    CHECK(!out.str().empty());
    CHECK(out.str().find("kernel-eval") != std::string::npos);
  }

  TEST_CASE("config files fill defaults and flags override them") {
    const std::filesystem::path dir = testutil::temp_dir("cli-config");
    const std::filesystem::path cfg_path = dir / "run.ini";
    write_text_file(cfg_path.string(),
                    "# comment line\ntrials = 1\nsigma = 0.125\n");

    const CliInvocation from_file = parse_invocation(
        {"stopping", "--config", cfg_path.string(), "--seed", "3", "--out",
         (dir / "a").string()});
    CHECK(from_file.cfg.trials == 1);
    CHECK(from_file.cfg.sigma == 0.125);

    const CliInvocation overridden = parse_invocation(
        {"stopping", "--config", cfg_path.string(), "--seed", "3", "--out",
         (dir / "b").string(), "--trials", "2"});
    CHECK(overridden.cfg.trials == 2);
    CHECK(overridden.cfg.sigma == 0.125);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("the built-in invariant suite passes") {
    std::ostringstream out;
    CHECK(selftest(out) == 0);
    CHECK(out.str().find("selftest:") != std::string::npos);
  }
}
