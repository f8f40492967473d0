#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntkreg/experiments.hpp"

namespace ntkreg {

enum class CliCommand {
  Coupling,
  Convergence,
  Rate,
  Spectrum,
  Stopping,
  KernelEval,
  Selftest,
  Help,  // --help / --version requests resolved during parsing
};

struct CliInvocation {
  CliCommand command = CliCommand::Help;
  ExperimentConfig cfg;  // experiment subcommands; carries seed, out dir, argv
  double dot = 0.0;      // kernel-eval
  std::string help_text;
};

// A rejected command line. `what()` is a single line naming the offence.
struct CliUsageError : std::runtime_error {
  explicit CliUsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parses everything after argv[0]. Throws CliUsageError on bad input; help and
// version requests come back as CliCommand::Help with the text to print.
CliInvocation parse_invocation(const std::vector<std::string>& args);

// Executes a parsed invocation; returns the process exit status.
int run(const CliInvocation& invocation, std::ostream& out, std::ostream& err);

// Fast invariant suite behind the `selftest` subcommand. Prints one line per
// check to `out` and a final tally; returns the number of failures.
int selftest(std::ostream& out);

// parse + run + single-line error reporting, for main().
int cli_main(int argc, const char* const* argv);

}  // namespace ntkreg
