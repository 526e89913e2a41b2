#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kcontact::cli {

/// Exit codes of the command line tool.
enum Exit : int {
  kOk = 0,
  kVerificationFailed = 1,
  kUsage = 2,
  kRuntime = 3,
};

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kcontact::cli
